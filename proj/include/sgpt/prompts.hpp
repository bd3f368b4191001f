#pragma once

// Tunable downstream parameters around the frozen encoder:
//   feature prompts   x_s = x + sum_j softmax_j(q_s^j . x) p_s^j, one per channel
//   hop fusion        H_s = sum_i w_s^i H_s^i for s in {P, N}
//   adapter           E = H_T + BN(relu([H_T | H_P | H_N] W_down) W_up)

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgpt/autodiff.hpp"
#include "sgpt/container.hpp"
#include "sgpt/dense.hpp"
#include "sgpt/error.hpp"
#include "sgpt/gcn.hpp"
#include "sgpt/random.hpp"
#include "sgpt/sparse.hpp"
#include "sgpt/templates.hpp"

namespace sgpt {

enum class Channel : std::size_t { pos = 0, neg = 1, topo = 2 };
inline constexpr std::array<const char*, 3> kChannelNames{"P", "N", "T"};

struct PromptDims {
  std::size_t d_in = 64;
  std::size_t d_out = 64;
  std::size_t hops = 2;   // k
  std::size_t bases = 3;  // r
  std::size_t d_mid = 8;

  void validate() const {
    if (d_in == 0 || d_out == 0) throw PreconditionError("PromptDims: widths must be >= 1");
    if (hops == 0) throw PreconditionError("PromptDims: hop count must be >= 1");
    if (bases == 0) throw PreconditionError("PromptDims: basis count r must be >= 1");
    if (d_mid == 0 || d_mid >= d_out)
      throw PreconditionError("PromptDims: need 1 <= d_mid < d_out (d_mid=" + std::to_string(d_mid) +
                              ", d_out=" + std::to_string(d_out) + ")");
  }
};

struct FeaturePrompt {
  ad::Parameter bases;  // r x d_in, row j is p^j
  ad::Parameter heads;  // d_in x r, column j is q^j
};

struct PromptState {
  PromptDims dims;
  TaskKind kind = TaskKind::lsp;
  std::array<FeaturePrompt, 3> feature;  // indexed by Channel
  ad::Parameter hop_pos;                 // 1 x k
  ad::Parameter hop_neg;                 // 1 x k
  ad::Parameter w_down;                  // 3 d_out x d_mid
  ad::Parameter w_up;                    // d_mid x d_out
  ad::Parameter bn_gamma;                // 1 x d_out
  ad::Parameter bn_beta;                 // 1 x d_out
  ad::Parameter prototypes;              // classes x (d_out | 2 d_out)

  PromptState() = default;
  PromptState(const PromptState&) = default;
  PromptState& operator=(const PromptState&) = default;

  std::vector<ad::Parameter*> parameters() {
    std::vector<ad::Parameter*> out;
    for (auto& f : feature) {
      out.push_back(&f.bases);
      out.push_back(&f.heads);
    }
    for (auto* p : {&hop_pos, &hop_neg, &w_down, &w_up, &bn_gamma, &bn_beta, &prototypes}) out.push_back(p);
    return out;
  }
  std::vector<const ad::Parameter*> parameters() const {
    auto ps = const_cast<PromptState*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }
};

// Small Gaussian prompts, uniform hop weights, Glorot W_down and zero W_up so
// that E = H_T before the first update. Prototypes are left empty; they are
// set from support embeddings by the tuner.
inline PromptState init_prompt_state(const PromptDims& dims, std::uint64_t seed,
                                     TaskKind kind = TaskKind::lsp) {
  dims.validate();
  Rng rng(seed);
  PromptState s;
  s.dims = dims;
  s.kind = kind;
  auto gaussian = [&](std::size_t r, std::size_t c, double sigma) {
    Matrix m(r, c);
    for (double& v : m.storage()) v = sigma * rng.normal();
    return m;
  };
  for (std::size_t c = 0; c < 3; ++c) {
    const std::string tag = std::string("prompt.") + kChannelNames[c];
    s.feature[c].bases = ad::Parameter(tag + ".bases", gaussian(dims.bases, dims.d_in, 0.01));
    s.feature[c].heads = ad::Parameter(tag + ".heads", gaussian(dims.d_in, dims.bases, 0.01));
  }
  const double w0 = 1.0 / static_cast<double>(dims.hops);
  s.hop_pos = ad::Parameter("hop.P", Matrix(1, dims.hops, w0));
  s.hop_neg = ad::Parameter("hop.N", Matrix(1, dims.hops, w0));
  const double b = glorot_bound(3 * dims.d_out, dims.d_mid);
  Matrix wd(3 * dims.d_out, dims.d_mid);
  for (double& v : wd.storage()) v = rng.uniform(-b, b);
  s.w_down = ad::Parameter("adapter.W_down", std::move(wd));
  s.w_up = ad::Parameter("adapter.W_up", Matrix(dims.d_mid, dims.d_out, 0.0));
  s.bn_gamma = ad::Parameter("adapter.bn_gamma", Matrix(1, dims.d_out, 1.0));
  s.bn_beta = ad::Parameter("adapter.bn_beta", Matrix(1, dims.d_out, 0.0));
  const std::size_t width = kind == TaskKind::lsp ? 2 * dims.d_out : dims.d_out;
  s.prototypes = ad::Parameter("prototypes", Matrix(0, width));
  return s;
}

// ---------------------------------------------------------------------------
// Plain (non-differentiable) reference forms

// Attention of each node over the r bases; rows are distributions.
inline Matrix prompt_attention(const Matrix& x, const FeaturePrompt& fp) {
  if (x.cols() != fp.heads.value.rows())
    throw ShapeError("feature prompt: feature width " + std::to_string(x.cols()) + " != d_in " +
                     std::to_string(fp.heads.value.rows()));
  Matrix a = dense::matmul(x, fp.heads.value);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto row = a.row(i);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double z = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : row) v /= z;
  }
  return a;
}

inline Matrix apply_feature_prompt(const Matrix& x, const FeaturePrompt& fp) {
  Matrix out = x;
  dense::matmul_acc(prompt_attention(x, fp), fp.bases.value, out);
  return out;
}

// ---------------------------------------------------------------------------
// Differentiable forms

// Normalized propagation operators for every channel sample.
struct PreparedChannels {
  std::vector<SparseRealMatrix> pos;
  std::vector<SparseRealMatrix> neg;
  SparseRealMatrix topo;
  std::size_t k = 0;
  std::size_t num_nodes = 0;
};

inline PreparedChannels prepare_channels(const ChannelSet& cs) {
  PreparedChannels p;
  p.k = cs.k;
  p.num_nodes = cs.topo.rows();
  for (const auto& a : cs.pos) p.pos.push_back(gcn_normalize(a));
  for (const auto& a : cs.neg) p.neg.push_back(gcn_normalize(a));
  p.topo = gcn_normalize(cs.topo);
  return p;
}

struct FeaturePromptVars {
  ad::Var bases;
  ad::Var heads;
};

struct PromptVars {
  std::array<FeaturePromptVars, 3> feature;
  ad::Var hop_pos, hop_neg, w_down, w_up, bn_gamma, bn_beta, prototypes;
};

inline PromptVars bind(ad::Tape& tape, PromptState& s) {
  PromptVars v;
  for (std::size_t c = 0; c < 3; ++c)
    v.feature[c] = {tape.param(s.feature[c].bases), tape.param(s.feature[c].heads)};
  v.hop_pos = tape.param(s.hop_pos);
  v.hop_neg = tape.param(s.hop_neg);
  v.w_down = tape.param(s.w_down);
  v.w_up = tape.param(s.w_up);
  v.bn_gamma = tape.param(s.bn_gamma);
  v.bn_beta = tape.param(s.bn_beta);
  v.prototypes = tape.param(s.prototypes);
  return v;
}

inline ad::Var apply_feature_prompt(ad::Tape& tape, ad::Var x, const FeaturePromptVars& fp) {
  const ad::Var attn = tape.softmax_rows(tape.matmul(x, fp.heads));
  return tape.add(x, tape.matmul(attn, fp.bases));
}

// Encodes the same input over several propagation operators. The first-layer
// projection, when it comes before propagation, is computed once and shared.
inline std::vector<ad::Var> encode_many(ad::Tape& tape, std::span<const ad::Var> weights,
                                        std::span<const SparseRealMatrix* const> adjs, ad::Var x) {
  std::vector<ad::Var> out;
  if (adjs.empty()) return out;
  const bool share = detail::project_first(tape.value(weights[0]));
  std::vector<const Matrix*> ws;
  for (ad::Var w : weights) ws.push_back(&tape.value(w));
  for (const auto* a : adjs) detail::check_encode_shapes(ws, *a, tape.value(x));
  const ad::Var projected = share ? tape.matmul(x, weights[0]) : x;
  for (const SparseRealMatrix* a : adjs) {
    ad::Var h = share ? tape.spmm(*a, projected) : tape.matmul(tape.spmm(*a, x), weights[0]);
    for (std::size_t l = 1; l < weights.size(); ++l) {
      h = tape.relu(h);
      if (detail::project_first(tape.value(weights[l])))
        h = tape.spmm(*a, tape.matmul(h, weights[l]));
      else
        h = tape.matmul(tape.spmm(*a, h), weights[l]);
    }
    out.push_back(h);
  }
  return out;
}

struct ChannelEmbeddings {
  std::vector<ad::Var> pos;  // H_P^1..k
  std::vector<ad::Var> neg;  // H_N^1..k
  ad::Var topo;              // H_T
};

// Sign-blind ablation encodes only the topological channel.
enum class ChannelMode { full, topo_only };

inline ChannelEmbeddings channel_embeddings(ad::Tape& tape, std::span<const ad::Var> backbone,
                                            const PreparedChannels& pc, ad::Var x,
                                            const PromptVars& pv, ChannelMode mode = ChannelMode::full) {
  ChannelEmbeddings ce;
  if (mode == ChannelMode::full) {
    std::vector<const SparseRealMatrix*> pos, neg;
    for (const auto& a : pc.pos) pos.push_back(&a);
    for (const auto& a : pc.neg) neg.push_back(&a);
    ce.pos = encode_many(tape, backbone, pos,
                         apply_feature_prompt(tape, x, pv.feature[std::size_t(Channel::pos)]));
    ce.neg = encode_many(tape, backbone, neg,
                         apply_feature_prompt(tape, x, pv.feature[std::size_t(Channel::neg)]));
  }
  const SparseRealMatrix* topo[] = {&pc.topo};
  ce.topo = encode_many(tape, backbone, topo,
                        apply_feature_prompt(tape, x, pv.feature[std::size_t(Channel::topo)]))[0];
  return ce;
}

inline ad::Var fuse_hops(ad::Tape& tape, std::span<const ad::Var> hs, ad::Var w) {
  return tape.row_weighted_sum(hs, w);
}

inline ad::Var apply_adapter(ad::Tape& tape, ad::Var h_topo, ad::Var h_pos, ad::Var h_neg,
                             const PromptVars& pv) {
  const Matrix& ht = tape.value(h_topo);
  if (!ht.same_shape(tape.value(h_pos)) || !ht.same_shape(tape.value(h_neg)))
    throw ShapeError("apply_adapter: channel embeddings differ in shape");
  if (ht.rows() < 2) throw PreconditionError("apply_adapter: batch normalization needs >= 2 nodes");
  const ad::Var parts[] = {h_topo, h_pos, h_neg};
  const ad::Var z = tape.relu(tape.matmul(tape.concat_cols(parts), pv.w_down));
  const ad::Var up = tape.matmul(z, pv.w_up);
  return tape.add(h_topo, tape.batchnorm_rows(up, pv.bn_gamma, pv.bn_beta));
}

// Full prompted forward pass to the final node embedding matrix E.
inline ad::Var prompted_embeddings(ad::Tape& tape, std::span<const ad::Var> backbone,
                                   const PreparedChannels& pc, ad::Var x, const PromptVars& pv,
                                   ChannelMode mode = ChannelMode::full) {
  const ChannelEmbeddings ce = channel_embeddings(tape, backbone, pc, x, pv, mode);
  ad::Var hp, hn;
  if (mode == ChannelMode::full) {
    hp = fuse_hops(tape, ce.pos, pv.hop_pos);
    hn = fuse_hops(tape, ce.neg, pv.hop_neg);
  } else {
    const Matrix& ht = tape.value(ce.topo);
    hp = tape.constant(Matrix(ht.rows(), ht.cols()));
    hn = tape.constant(Matrix(ht.rows(), ht.cols()));
  }
  return apply_adapter(tape, ce.topo, hp, hn, pv);
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr std::string_view kPromptMagic = "SGPTPRMT";

inline void save_prompt_state(const std::string& path, const PromptState& s,
                              const std::map<std::string, std::string>& extra_meta = {}) {
  TensorContainer c;
  c.magic = std::string(kPromptMagic);
  c.meta = extra_meta;
  c.meta["kind"] = to_string(s.kind);
  c.meta["d_in"] = std::to_string(s.dims.d_in);
  c.meta["d_out"] = std::to_string(s.dims.d_out);
  c.meta["hops"] = std::to_string(s.dims.hops);
  c.meta["bases"] = std::to_string(s.dims.bases);
  c.meta["d_mid"] = std::to_string(s.dims.d_mid);
  for (const ad::Parameter* p : s.parameters()) c.tensors.push_back({p->name, p->value});
  write_container(path, c);
}

inline PromptState load_prompt_state(const std::string& path) {
  const TensorContainer c = read_container(path, kPromptMagic);
  PromptDims dims;
  TaskKind kind;
  try {
    dims.d_in = std::stoul(c.meta_value("d_in"));
    dims.d_out = std::stoul(c.meta_value("d_out"));
    dims.hops = std::stoul(c.meta_value("hops"));
    dims.bases = std::stoul(c.meta_value("bases"));
    dims.d_mid = std::stoul(c.meta_value("d_mid"));
    kind = c.meta_value("kind") == "nc" ? TaskKind::nc : TaskKind::lsp;
  } catch (const CorruptFileError&) {
    throw;
  } catch (const std::exception& e) {
    throw CorruptFileError(std::string("prompt state: bad header: ") + e.what());
  }
  PromptState s = init_prompt_state(dims, 0, kind);
  for (ad::Parameter* p : s.parameters()) {
    const Matrix& m = c.tensor(p->name);
    if (p->name != "prototypes" && !m.same_shape(p->value))
      throw CorruptFileError("prompt state: tensor '" + p->name + "' has shape " + shape_str(m));
    p->value = m;
    p->zero_grad();
  }
  return s;
}

}  // namespace sgpt
