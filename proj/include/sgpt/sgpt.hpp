#pragma once

#include "sgpt/autodiff.hpp"
#include "sgpt/config.hpp"
#include "sgpt/container.hpp"
#include "sgpt/dense.hpp"
#include "sgpt/error.hpp"
#include "sgpt/gcn.hpp"
#include "sgpt/graph.hpp"
#include "sgpt/pretrain.hpp"
#include "sgpt/prompts.hpp"
#include "sgpt/random.hpp"
#include "sgpt/sparse.hpp"
#include "sgpt/templates.hpp"
#include "sgpt/tune_eval.hpp"
