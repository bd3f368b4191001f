#pragma once

// Independent reference implementations used only by tests. They are written
// for clarity (dense, exhaustive) rather than speed.

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "sgpt/sgpt.hpp"

namespace oracle {

using sgpt::Index;
using DenseBool = std::vector<std::vector<char>>;

inline DenseBool to_dense(const sgpt::SparseBinaryMatrix& m) {
  DenseBool d(m.rows(), std::vector<char>(m.cols(), 0));
  for (const auto& [r, c] : m.positions()) d[r][c] = 1;
  return d;
}

inline DenseBool dense_bool_matmul(const DenseBool& a, const DenseBool& b) {
  const std::size_t n = a.size(), k = b.size(), m = k ? b[0].size() : 0;
  DenseBool c(n, std::vector<char>(m, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < k; ++t)
      if (a[i][t])
        for (std::size_t j = 0; j < m; ++j)
          if (b[t][j]) c[i][j] = 1;
  return c;
}

// Random signed graph with independent edge draws.
inline sgpt::SignedGraph random_signed_graph(std::size_t n, double density, double neg_share,
                                             std::uint64_t seed) {
  sgpt::Rng rng(seed);
  std::vector<sgpt::SignedEdge> recs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(density))
        recs.push_back({sgpt::Edge::make(Index(i), Index(j)), rng.bernoulli(neg_share) ? -1 : +1});
  return sgpt::make_signed_graph(n, recs);
}

// Enumerates every walk i = v0, v1, ..., vk whose intermediate and final
// nodes all differ from i. (i, j) lands in the positive (negative) channel
// of hop k iff some such walk ends at j with an even (odd) number of
// negative edges.
struct ParityChannels {
  std::vector<std::set<std::pair<Index, Index>>> pos, neg;  // index = hop - 1
};

inline ParityChannels enumerate_parity_walks(const sgpt::SignedGraph& g, std::size_t k) {
  const std::size_t n = g.num_nodes;
  std::vector<std::vector<std::pair<Index, int>>> adj(n);
  for (const auto& e : g.pos_edges) {
    adj[e.u].push_back({e.v, 0});
    adj[e.v].push_back({e.u, 0});
  }
  for (const auto& e : g.neg_edges) {
    adj[e.u].push_back({e.v, 1});
    adj[e.v].push_back({e.u, 1});
  }
  ParityChannels out;
  out.pos.resize(k);
  out.neg.resize(k);
  for (Index start = 0; start < n; ++start) {
    // frontier of (node, parity) reachable at the current hop; sets suffice
    // because channel membership only depends on (endpoint, parity).
    std::set<std::pair<Index, int>> frontier{{start, 0}};
    for (std::size_t hop = 1; hop <= k; ++hop) {
      std::set<std::pair<Index, int>> next;
      for (const auto& [v, par] : frontier)
        for (const auto& [w, s] : adj[v])
          if (w != start) next.insert({w, par ^ s});
      for (const auto& [w, par] : next) (par ? out.neg : out.pos)[hop - 1].insert({start, w});
      frontier = std::move(next);
    }
  }
  return out;
}

inline std::set<std::pair<Index, Index>> position_set(const sgpt::SparseBinaryMatrix& m) {
  const auto p = m.positions();
  return {p.begin(), p.end()};
}

// Exhaustive pairwise AUC; ties count one half.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  std::uint64_t twice = 0, np = 0, nn = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i]) ++np; else ++nn;
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      if (s[i] > s[j]) twice += 2;
      else if (s[i] == s[j]) twice += 1;
    }
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(np) * static_cast<double>(nn));
}

inline sgpt::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  sgpt::Rng rng(seed);
  sgpt::Matrix m(r, c);
  for (double& v : m.storage()) v = scale * rng.normal();
  return m;
}

}  // namespace oracle
