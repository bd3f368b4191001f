#pragma once

// Bias-free GCN encoder H_l = act(A_hat H_{l-1} W_l), ReLU between layers and
// a linear last layer, plus the frozen-checkpoint file format.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sgpt/autodiff.hpp"
#include "sgpt/container.hpp"
#include "sgpt/dense.hpp"
#include "sgpt/error.hpp"
#include "sgpt/random.hpp"
#include "sgpt/sparse.hpp"

namespace sgpt {

struct GcnConfig {
  // d_in followed by the output width of each layer.
  std::vector<std::size_t> layer_dims{64, 32, 64, 64};

  void validate() const {
    if (layer_dims.size() < 2) throw PreconditionError("GcnConfig: need at least d_in and one layer");
    for (std::size_t d : layer_dims)
      if (d == 0) throw PreconditionError("GcnConfig: layer widths must be >= 1");
  }
  std::size_t d_in() const { return layer_dims.front(); }
  std::size_t d_out() const { return layer_dims.back(); }
  std::size_t num_layers() const { return layer_dims.size() - 1; }

  std::string dims_string() const {
    std::string s;
    for (std::size_t i = 0; i < layer_dims.size(); ++i) s += (i ? "," : "") + std::to_string(layer_dims[i]);
    return s;
  }
  friend bool operator==(const GcnConfig&, const GcnConfig&) = default;
};

inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Glorot-uniform weights, one Parameter per layer.
inline std::vector<ad::Parameter> init_weights(const GcnConfig& cfg, std::uint64_t seed,
                                               bool trainable = true) {
  cfg.validate();
  Rng rng(seed);
  std::vector<ad::Parameter> ws;
  for (std::size_t l = 0; l < cfg.num_layers(); ++l) {
    const std::size_t fi = cfg.layer_dims[l], fo = cfg.layer_dims[l + 1];
    const double b = glorot_bound(fi, fo);
    Matrix w(fi, fo);
    for (double& x : w.storage()) x = rng.uniform(-b, b);
    ws.emplace_back("gcn.W" + std::to_string(l), std::move(w), trainable);
  }
  return ws;
}

namespace detail {

// Propagate after projecting when the layer narrows the width; the product is
// the same matrix either way, only the cost differs.
inline bool project_first(const Matrix& w) { return w.cols() < w.rows(); }

inline void check_encode_shapes(std::span<const Matrix* const> ws, const SparseRealMatrix& adj,
                                const Matrix& x) {
  if (ws.empty()) throw ShapeError("encode: no layers");
  if (adj.rows() != adj.cols() || adj.rows() != x.rows())
    throw ShapeError("encode: adjacency is " + std::to_string(adj.rows()) + "x" +
                     std::to_string(adj.cols()) + " but features have " + std::to_string(x.rows()) +
                     " rows");
  std::size_t width = x.cols();
  for (const Matrix* w : ws) {
    if (w->rows() != width)
      throw ShapeError("encode: layer expects width " + std::to_string(w->rows()) + ", got " +
                       std::to_string(width));
    width = w->cols();
  }
}

}  // namespace detail

// Differentiable forward pass. `adj` must be a gcn_normalize output that
// outlives the tape.
inline ad::Var encode(ad::Tape& tape, std::span<const ad::Var> weights, const SparseRealMatrix& adj,
                      ad::Var x) {
  std::vector<const Matrix*> ws;
  for (ad::Var w : weights) ws.push_back(&tape.value(w));
  detail::check_encode_shapes(ws, adj, tape.value(x));
  ad::Var h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (detail::project_first(tape.value(weights[l])))
      h = tape.spmm(adj, tape.matmul(h, weights[l]));
    else
      h = tape.matmul(tape.spmm(adj, h), weights[l]);
    if (l + 1 < weights.size()) h = tape.relu(h);
  }
  return h;
}

// Plain forward pass; performs the same floating-point operations as the
// tape version.
inline Matrix encode(std::span<const Matrix> weights, const SparseRealMatrix& adj, const Matrix& x) {
  std::vector<const Matrix*> ws;
  for (const Matrix& w : weights) ws.push_back(&w);
  detail::check_encode_shapes(ws, adj, x);
  Matrix h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (detail::project_first(weights[l]))
      h = spmm(adj, dense::matmul(h, weights[l]));
    else
      h = dense::matmul(spmm(adj, h), weights[l]);
    if (l + 1 < weights.size())
      for (double& v : h.storage()) v = v > 0.0 ? v : 0.0;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Checkpoint

inline constexpr std::string_view kCheckpointMagic = "SGPTCKPT";

struct Checkpoint {
  GcnConfig config;
  std::vector<Matrix> weights;
  std::uint64_t seed = 0;
  std::string config_text;  // canonical serialization covered by config_hash
  std::string config_hash;  // SHA-256 hex of config_text
  std::string tool_version;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  TensorContainer c;
  c.magic = std::string(kCheckpointMagic);
  c.meta["layer_dims"] = ck.config.dims_string();
  c.meta["seed"] = std::to_string(ck.seed);
  c.meta["config"] = ck.config_text;
  c.meta["config_hash"] = ck.config_hash;
  c.meta["tool_version"] = ck.tool_version;
  for (std::size_t l = 0; l < ck.weights.size(); ++l)
    c.tensors.push_back({"W" + std::to_string(l), ck.weights[l]});
  write_container(path, c);
}

inline std::vector<std::size_t> parse_dims(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(tok, &pos);
    } catch (const std::exception&) {
      throw ParseError("bad dimension list '" + s + "'");
    }
    if (pos != tok.size()) throw ParseError("bad dimension list '" + s + "'");
    out.push_back(v);
  }
  return out;
}

// Loads and validates a checkpoint. When `expected_hash` is given, the stored
// config hash must equal it.
inline Checkpoint load_checkpoint(const std::string& path,
                                  const std::optional<std::string>& expected_hash = std::nullopt) {
  const TensorContainer c = read_container(path, kCheckpointMagic);
  Checkpoint ck;
  try {
    ck.config.layer_dims = parse_dims(c.meta_value("layer_dims"));
    ck.config.validate();
    ck.seed = std::stoull(c.meta_value("seed"));
  } catch (const CorruptFileError&) {
    throw;
  } catch (const std::exception& e) {
    throw CorruptFileError(std::string("checkpoint: bad header: ") + e.what());
  }
  ck.config_text = c.meta_value("config");
  ck.config_hash = c.meta_value("config_hash");
  ck.tool_version = c.meta_value("tool_version");
  if (sha256_hex(ck.config_text) != ck.config_hash)
    throw CorruptFileError("checkpoint: stored config does not match its hash");
  if (c.tensors.size() != ck.config.num_layers())
    throw CorruptFileError("checkpoint: layer count does not match layer_dims");
  for (std::size_t l = 0; l < c.tensors.size(); ++l) {
    const Matrix& w = c.tensors[l].value;
    if (w.rows() != ck.config.layer_dims[l] || w.cols() != ck.config.layer_dims[l + 1])
      throw CorruptFileError("checkpoint: weight " + std::to_string(l) + " has shape " + shape_str(w));
    ck.weights.push_back(w);
  }
  if (expected_hash && *expected_hash != ck.config_hash)
    throw HashMismatchError("checkpoint config hash " + ck.config_hash.substr(0, 12) +
                            "... does not match expected " + expected_hash->substr(0, 12) + "...");
  return ck;
}

}  // namespace sgpt
