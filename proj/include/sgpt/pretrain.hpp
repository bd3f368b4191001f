#pragma once

// Link-prediction pre-training on the unsigned view. A fraction of links is
// masked out of the message-passing adjacency; each masked link (v, a) yields
// triplets (v, a, b) with b a non-neighbour of v, and the loss is
//   -ln exp(Sim(v,a)) / (exp(Sim(v,a)) + exp(Sim(v,b))),  Sim = cos / tau
// averaged over triplets.

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sgpt/autodiff.hpp"
#include "sgpt/dense.hpp"
#include "sgpt/error.hpp"
#include "sgpt/gcn.hpp"
#include "sgpt/graph.hpp"
#include "sgpt/random.hpp"
#include "sgpt/sparse.hpp"

namespace sgpt {

inline constexpr const char* kToolVersion = "sgpt 1.0.0";

struct PretrainConfig {
  GcnConfig gcn;
  double mask_fraction = 0.15;
  std::size_t per_edge = 1;
  std::size_t epochs = 200;
  double lr = 1e-3;
  double tau = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    gcn.validate();
    if (!(mask_fraction > 0.0 && mask_fraction < 1.0))
      throw ConfigError("pretrain: mask_fraction must lie in (0,1)");
    if (per_edge == 0) throw ConfigError("pretrain: per_edge must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("pretrain: lr must be > 0");
    if (!(tau > 0.0)) throw ConfigError("pretrain: tau must be > 0");
  }

  // Single-line canonical form hashed into the checkpoint. Reals use
  // round-trip precision so distinct values never collide.
  std::string canonical_text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "layer_dims=" << gcn.dims_string() << ";mask_fraction=" << mask_fraction
       << ";per_edge=" << per_edge << ";pretrain_epochs=" << epochs << ";pretrain_lr=" << lr
       << ";pretrain_tau=" << tau << ";pretrain_seed=" << seed;
    return os.str();
  }
  std::string hash() const { return sha256_hex(canonical_text()); }
};

struct Triplet {
  Index v = 0;
  Index a = 0;
  Index b = 0;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct MaskedLinks {
  std::vector<Edge> train_edges;  // masked, sorted
  SparseBinaryMatrix message_adj;
};

inline std::vector<Edge> upper_edges(const SparseBinaryMatrix& adj) {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < adj.rows(); ++i)
    for (Index j : adj.row(i))
      if (j > i) out.push_back({Index(i), j});
  return out;
}

// Masks floor(fraction * |E|) links (at least one) out of a symmetric adjacency.
inline MaskedLinks mask_links(const SparseBinaryMatrix& adj, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw PreconditionError("mask_links: fraction must lie in (0,1)");
  if (!adj.is_symmetric()) throw PreconditionError("mask_links: adjacency must be symmetric");
  std::vector<Edge> edges = upper_edges(adj);
  if (edges.empty()) throw PreconditionError("mask_links: graph has no edges, nothing to mask");
  auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(edges.size())));
  count = std::max<std::size_t>(count, 1);
  Rng rng(derive_seed(seed, 0x6d61736b));
  rng.shuffle(edges);
  MaskedLinks out;
  out.train_edges.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(out.train_edges.begin(), out.train_edges.end());
  std::vector<Edge> kept(edges.begin() + static_cast<std::ptrdiff_t>(count), edges.end());
  out.message_adj = SparseBinaryMatrix::from_positions(adj.rows(), adj.cols(), symmetric_positions(kept));
  return out;
}

// For each masked link, `per_edge` triplets anchored at a randomly chosen
// endpoint, with b uniform over the anchor's non-neighbours in `full_adj`.
inline std::vector<Triplet> sample_triplets(std::span<const Edge> train_edges,
                                            const SparseBinaryMatrix& full_adj, std::size_t per_edge,
                                            std::uint64_t seed) {
  const std::size_t n = full_adj.rows();
  Rng rng(derive_seed(seed, 0x74726970));
  std::vector<Triplet> out;
  out.reserve(train_edges.size() * per_edge);
  for (const Edge& e : train_edges) {
    for (std::size_t k = 0; k < per_edge; ++k) {
      const bool flip = rng.bernoulli(0.5);
      const Index v = flip ? e.v : e.u, a = flip ? e.u : e.v;
      if (full_adj.row(v).size() + 1 >= n)
        throw PreconditionError("sample_triplets: node " + std::to_string(v) +
                                " is adjacent to every other node; no negative exists");
      bool found = false;
      for (int attempt = 0; attempt < 100 && !found; ++attempt) {
        const auto b = static_cast<Index>(rng.index(n));
        if (b != v && !full_adj.contains(v, b)) {
          out.push_back({v, a, b});
          found = true;
        }
      }
      if (!found)
        throw PreconditionError("sample_triplets: no non-neighbour of node " + std::to_string(v) +
                                " found after 100 attempts");
    }
  }
  return out;
}

inline ad::Var pretrain_loss(ad::Tape& tape, ad::Var h, std::span<const Triplet> triplets, double tau) {
  if (triplets.empty()) throw PreconditionError("pretrain_loss: no triplets");
  std::vector<Index> vs, as, bs;
  for (const Triplet& t : triplets) {
    vs.push_back(t.v);
    as.push_back(t.a);
    bs.push_back(t.b);
  }
  const ad::Var hv = tape.gather_rows(h, vs);
  const ad::Var sims[] = {tape.cosine_similarity_rows(hv, tape.gather_rows(h, as)),
                          tape.cosine_similarity_rows(hv, tape.gather_rows(h, bs))};
  const ad::Var logits = tape.scale(tape.concat_cols(sims), 1.0 / tau);
  const std::vector<int> targets(triplets.size(), 0);
  return tape.softmax_cross_entropy(logits, targets);
}

inline double pretrain_loss(const Matrix& h, std::span<const Triplet> triplets, double tau) {
  ad::Tape tape;
  return tape.scalar(pretrain_loss(tape, tape.constant_ref(h), triplets, tau));
}

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;  // loss at each epoch, before that epoch's update
};

// Full-batch Adam on the masked-link objective. `on_epoch` sees (epoch, loss).
inline PretrainResult run_pretrain(const SparseBinaryMatrix& adj, const Matrix& features,
                                   const PretrainConfig& cfg,
                                   const std::function<void(std::size_t, double)>& on_epoch = {}) {
  cfg.validate();
  if (features.rows() != adj.rows() || features.cols() != cfg.gcn.d_in())
    throw ShapeError("run_pretrain: features are " + shape_str(features) + ", expected " +
                     std::to_string(adj.rows()) + "x" + std::to_string(cfg.gcn.d_in()));
  std::vector<ad::Parameter> weights = init_weights(cfg.gcn, derive_seed(cfg.seed, 0x77), true);
  PretrainResult res;
  if (cfg.epochs > 0) {
    const MaskedLinks masked = mask_links(adj, cfg.mask_fraction, cfg.seed);
    const std::vector<Triplet> triplets = sample_triplets(masked.train_edges, adj, cfg.per_edge, cfg.seed);
    const SparseRealMatrix a_hat = gcn_normalize(masked.message_adj);
    std::vector<ad::Parameter*> ptrs;
    for (auto& w : weights) ptrs.push_back(&w);
    ad::Adam opt(ptrs, {.lr = cfg.lr});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      ad::Tape tape;
      std::vector<ad::Var> ws;
      for (auto& w : weights) ws.push_back(tape.param(w));
      const ad::Var h = encode(tape, ws, a_hat, tape.constant_ref(features));
      const ad::Var loss = pretrain_loss(tape, h, triplets, cfg.tau);
      const double value = tape.scalar(loss);
      if (!std::isfinite(value))
        throw NumericError("pretrain: non-finite loss " + std::to_string(value) + " at epoch " +
                           std::to_string(epoch));
      res.losses.push_back(value);
      if (on_epoch) on_epoch(epoch, value);
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
    }
  }
  Checkpoint& ck = res.checkpoint;
  ck.config = cfg.gcn;
  ck.seed = cfg.seed;
  ck.config_text = cfg.canonical_text();
  ck.config_hash = sha256_hex(ck.config_text);
  ck.tool_version = kToolVersion;
  for (auto& w : weights) ck.weights.push_back(w.value);
  return res;
}

inline void write_loss_csv(std::ostream& os, std::span<const double> losses) {
  os << "epoch,loss\n" << std::setprecision(17);
  for (std::size_t e = 0; e < losses.size(); ++e) os << e << ',' << losses[e] << '\n';
}

}  // namespace sgpt
