#pragma once

// Graph template: balance-theory channels. Hop-1 positive/negative samples
// are A+ / A-; hop k follows
//   P_k = I(P_{k-1} A+ + N_{k-1} A-)
//   N_k = I(P_{k-1} A- + N_{k-1} A+)
// so (i,j) is in P_k (N_k) iff a k-edge walk from i to j carries an even
// (odd) number of negative edges. Diagonals are cleared after every hop.
//
// Task template: class prototypes and argmax-by-cosine prediction.

#include <chrono>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sgpt/dense.hpp"
#include "sgpt/error.hpp"
#include "sgpt/graph.hpp"
#include "sgpt/sparse.hpp"

namespace sgpt {

struct ChannelSet {
  std::vector<SparseBinaryMatrix> pos;  // hop 1..k
  std::vector<SparseBinaryMatrix> neg;  // hop 1..k
  SparseBinaryMatrix topo;              // A+ union A-
  std::size_t k = 0;
};

struct HopTiming {
  std::size_t hop = 0;
  double seconds = 0.0;  // time to produce this hop's pair of matrices
  std::size_t nnz = 0;   // nnz(P_hop) + nnz(N_hop)
};

inline ChannelSet build_channels(const SignedGraph& g, std::size_t k,
                                 std::vector<HopTiming>* timings = nullptr) {
  if (k == 0) throw PreconditionError("build_channels: hop count k must be >= 1");
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  ChannelSet cs;
  cs.k = k;
  const SparseBinaryMatrix a_pos = positive_adjacency(g);
  const SparseBinaryMatrix a_neg = negative_adjacency(g);
  cs.pos.push_back(a_pos);
  cs.neg.push_back(a_neg);
  auto record = [&](std::size_t hop) {
    if (!timings) return;
    const auto t1 = clock::now();
    timings->push_back({hop, std::chrono::duration<double>(t1 - t0).count(),
                        cs.pos.back().nnz() + cs.neg.back().nnz()});
    t0 = t1;
  };
  record(1);
  for (std::size_t hop = 2; hop <= k; ++hop) {
    const SparseBinaryMatrix& p = cs.pos.back();
    const SparseBinaryMatrix& n = cs.neg.back();
    SparseBinaryMatrix next_p = zero_diagonal(bool_add(bool_matmul(p, a_pos), bool_matmul(n, a_neg)));
    SparseBinaryMatrix next_n = zero_diagonal(bool_add(bool_matmul(p, a_neg), bool_matmul(n, a_pos)));
    cs.pos.push_back(std::move(next_p));
    cs.neg.push_back(std::move(next_n));
    record(hop);
  }
  cs.topo = unsigned_view(g);
  return cs;
}

// ---------------------------------------------------------------------------

enum class TaskKind { nc, lsp };

inline const char* to_string(TaskKind k) { return k == TaskKind::nc ? "nc" : "lsp"; }

// LSP class order: index 0 is the positive class, index 1 the negative one.
inline int lsp_class_index(int sign) { return sign > 0 ? 0 : 1; }

struct PrototypeSet {
  TaskKind kind = TaskKind::nc;
  Matrix embeddings;  // one row per class
  std::vector<std::string> class_names;
};

// [h_u || h_v].
inline std::vector<double> link_embedding(const Matrix& h, Index u, Index v) {
  if (u >= h.rows() || v >= h.rows())
    throw PreconditionError("link_embedding: node id out of range");
  if (u == v) throw PreconditionError("link_embedding: self-pair");
  std::vector<double> out(h.row(u).begin(), h.row(u).end());
  out.insert(out.end(), h.row(v).begin(), h.row(v).end());
  return out;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    sa += a[i] * a[i];
    sb += b[i] * b[i];
  }
  const double floor = 1e-12;
  return dot / (std::max(std::sqrt(sa), floor) * std::max(std::sqrt(sb), floor));
}

struct Prediction {
  std::size_t cls = 0;
  std::vector<double> scores;  // cos / tau per class
};

// Highest-similarity class; ties go to the lowest class index.
inline Prediction predict(const Matrix& prototypes, std::span<const double> query, double tau) {
  if (query.size() != prototypes.cols())
    throw ShapeError("predict: query width " + std::to_string(query.size()) +
                     " != prototype width " + std::to_string(prototypes.cols()));
  if (prototypes.rows() == 0) throw PreconditionError("predict: no prototypes");
  Prediction p;
  for (std::size_t c = 0; c < prototypes.rows(); ++c) {
    p.scores.push_back(cosine(query, prototypes.row(c)) / tau);
    if (p.scores[c] > p.scores[p.cls]) p.cls = c;
  }
  return p;
}

inline Prediction predict(const PrototypeSet& ps, std::span<const double> query, double tau) {
  return predict(ps.embeddings, query, tau);
}

// Prototype of each class = mean of its support embeddings.
inline PrototypeSet init_prototypes(TaskKind kind, const Matrix& support, std::span<const int> labels,
                                    std::size_t num_classes) {
  if (labels.size() != support.rows())
    throw ShapeError("init_prototypes: label count != support rows");
  PrototypeSet ps;
  ps.kind = kind;
  ps.embeddings = Matrix(num_classes, support.cols());
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
      throw PreconditionError("init_prototypes: label out of range");
    const auto c = static_cast<std::size_t>(labels[i]);
    ++counts[c];
    for (std::size_t j = 0; j < support.cols(); ++j) ps.embeddings(c, j) += support(i, j);
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0)
      throw PreconditionError("init_prototypes: class " + std::to_string(c) + " has no support example");
    for (double& v : ps.embeddings.row(c)) v /= static_cast<double>(counts[c]);
    ps.class_names.push_back(kind == TaskKind::lsp ? (c == 0 ? "P" : "N") : "c" + std::to_string(c));
  }
  return ps;
}

}  // namespace sgpt
