#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "sgpt/pretrain.hpp"
#include "sgpt/templates.hpp"

using namespace sgpt;

namespace {

SparseBinaryMatrix adjacency(std::size_t n, const std::vector<Edge>& es) {
  return SparseBinaryMatrix::from_positions(n, n, symmetric_positions(es));
}

// Two dense blocks with sparse links between them.
SparseBinaryMatrix two_block(std::size_t n, double p_in, double p_out, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> es;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli((i < n / 2) == (j < n / 2) ? p_in : p_out)) es.push_back({Index(i), Index(j)});
  return adjacency(n, es);
}

Matrix features(std::size_t n, std::size_t d, std::uint64_t seed) { return oracle::random_matrix(n, d, seed); }

}  // namespace

TEST(Mask, CountsAndDisjointness) {
  std::vector<Edge> es;
  for (Index i = 0; i < 100; ++i) es.push_back({i, Index(i + 1)});
  const auto adj = adjacency(101, es);
  const auto m = mask_links(adj, 0.15, 3);
  EXPECT_EQ(m.train_edges.size(), 15u);
  EXPECT_EQ(m.message_adj.nnz(), 2 * 85u);
  EXPECT_TRUE(m.message_adj.is_symmetric());
  for (const Edge& e : m.train_edges) {
    EXPECT_FALSE(m.message_adj.contains(e.u, e.v));
    EXPECT_FALSE(m.message_adj.contains(e.v, e.u));
  }
  for (const auto& [r, c] : m.message_adj.positions()) EXPECT_TRUE(adj.contains(r, c));
  EXPECT_EQ(mask_links(adj, 0.15, 3).train_edges, m.train_edges);
  EXPECT_NE(mask_links(adj, 0.15, 4).train_edges, m.train_edges);
}

TEST(Mask, FloorWithMinimumOne) {
  const auto adj = adjacency(3, {{0, 1}, {1, 2}});
  EXPECT_EQ(mask_links(adj, 0.999, 1).train_edges.size(), 1u);
  EXPECT_EQ(mask_links(adj, 0.01, 1).train_edges.size(), 1u);
  EXPECT_THROW(mask_links(SparseBinaryMatrix(3, 3), 0.5, 1), PreconditionError);
  EXPECT_THROW(mask_links(adj, 0.0, 1), PreconditionError);
}

TEST(Triplets, OnlyNonNeighbour) {
  const auto adj = adjacency(4, {{0, 1}, {0, 2}, {1, 2}});
  const std::vector<Edge> train{{0, 1}, {0, 2}, {1, 2}};
  for (const auto& t : sample_triplets(train, adj, 5, 1)) {
    EXPECT_EQ(t.b, 3u);
    EXPECT_TRUE(adj.contains(t.v, t.a));
  }
  EXPECT_EQ(sample_triplets(train, adj, 2, 1).size(), 6u);
}

TEST(Triplets, CompleteGraphErrors) {
  const auto adj = adjacency(3, {{0, 1}, {0, 2}, {1, 2}});
  const std::vector<Edge> train{{0, 1}};
  EXPECT_THROW(sample_triplets(train, adj, 1, 1), PreconditionError);
}

TEST(Triplets, InvariantsAndCount) {
  const auto adj = two_block(60, 0.3, 0.02, 2);
  const auto m = mask_links(adj, 0.15, 1);
  ASSERT_GE(m.train_edges.size(), 10u);
  const std::span<const Edge> ten(m.train_edges.data(), 10);
  const auto ts = sample_triplets(ten, adj, 2, 5);
  EXPECT_EQ(ts.size(), 20u);
  for (const auto& t : ts) {
    EXPECT_NE(t.v, t.a);
    EXPECT_NE(t.v, t.b);
    EXPECT_TRUE(adj.contains(t.v, t.a));
    EXPECT_FALSE(adj.contains(t.v, t.b));
  }
  EXPECT_EQ(sample_triplets(ten, adj, 2, 5), ts);
}

TEST(Loss, EqualCandidatesGiveLn2) {
  Matrix h = features(4, 3, 1);
  for (std::size_t j = 0; j < 3; ++j) h(2, j) = h(3, j);
  const Triplet ts[] = {{0, 2, 3}, {1, 3, 2}};
  EXPECT_NEAR(pretrain_loss(h, ts, 0.1), std::log(2.0), 1e-14);
}

TEST(Loss, LimitAndMean) {
  const Matrix h = Matrix::from_rows({{1, 0}, {1, 0}, {-1, 0}, {0, 1}});
  const Triplet strong[] = {{0, 1, 2}};
  EXPECT_LT(pretrain_loss(h, strong, 0.01), 1e-50);
  const Matrix r = features(6, 4, 2);
  const Triplet t1[] = {{0, 1, 2}}, t2[] = {{3, 4, 5}}, both[] = {{0, 1, 2}, {3, 4, 5}};
  EXPECT_NEAR(pretrain_loss(r, both, 0.1), 0.5 * (pretrain_loss(r, t1, 0.1) + pretrain_loss(r, t2, 0.1)), 1e-14);
}

TEST(Loss, ScaleInvariantExactly) {
  const Matrix h = features(10, 6, 3);
  Matrix h2 = h;
  for (double& v : h2.storage()) v *= 2.0;
  const Triplet ts[] = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}, {9, 0, 5}};
  EXPECT_EQ(pretrain_loss(h, ts, 0.1), pretrain_loss(h2, ts, 0.1));
}

TEST(Run, EpochsZeroIsInitialization) {
  PretrainConfig cfg;
  cfg.gcn.layer_dims = {8, 6, 4};
  cfg.epochs = 0;
  cfg.seed = 4;
  const auto adj = two_block(20, 0.4, 0.05, 1);
  const auto res = run_pretrain(adj, features(20, 8, 1), cfg);
  const auto init = init_weights(cfg.gcn, derive_seed(cfg.seed, 0x77));
  for (std::size_t l = 0; l < init.size(); ++l) EXPECT_TRUE(res.checkpoint.weights[l].bit_equal(init[l].value));
  EXPECT_TRUE(res.losses.empty());
  EXPECT_EQ(res.checkpoint.config_hash, cfg.hash());
}

TEST(Run, Deterministic) {
  PretrainConfig cfg;
  cfg.gcn.layer_dims = {16, 8, 8};
  cfg.epochs = 15;
  const auto adj = two_block(40, 0.3, 0.03, 2);
  const auto x = features(40, 16, 2);
  const auto a = run_pretrain(adj, x, cfg), b = run_pretrain(adj, x, cfg);
  EXPECT_EQ(a.checkpoint, b.checkpoint);
  EXPECT_EQ(a.losses, b.losses);
}

TEST(Run, TwoBlockLearnsCommunities) {
  const std::size_t n = 120;
  const auto adj = two_block(n, 0.25, 0.01, 7);
  const Matrix x = features(n, 64, 7);
  PretrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 1;
  const auto res = run_pretrain(adj, x, cfg);
  ASSERT_EQ(res.losses.size(), 200u);
  EXPECT_LT(res.losses.back(), res.losses.front());

  // 5-epoch moving average never increases across the first 20 epochs
  auto avg = [&](std::size_t e) {
    double s = 0.0;
    for (std::size_t i = e; i < e + 5; ++i) s += res.losses[i];
    return s / 5.0;
  };
  for (std::size_t e = 1; e + 5 <= 20; ++e) EXPECT_LE(avg(e), avg(e - 1) + 1e-12) << "epoch " << e;

  const auto masked = mask_links(adj, cfg.mask_fraction, cfg.seed);
  const Matrix h = encode(res.checkpoint.weights, gcn_normalize(masked.message_adj), x);
  double intra = 0.0;
  std::size_t n_intra = 0;
  for (const Edge& e : masked.train_edges)
    if ((e.u < n / 2) == (e.v < n / 2)) {
      intra += cosine(h.row(e.u), h.row(e.v));
      ++n_intra;
    }
  Rng rng(3);
  double non = 0.0;
  std::size_t n_non = 0;
  while (n_non < 2000) {
    const auto u = rng.index(n), v = rng.index(n);
    if (u == v || adj.contains(u, v)) continue;
    non += cosine(h.row(u), h.row(v));
    ++n_non;
  }
  EXPECT_GT(intra / double(n_intra), non / double(n_non));
}

TEST(Config, HashCoversHyperparameters) {
  PretrainConfig a, b;
  EXPECT_EQ(a.hash(), b.hash());
  b.mask_fraction = 0.2;
  EXPECT_NE(a.hash(), b.hash());
  b = a;
  b.gcn.layer_dims = {64, 16, 64};
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.canonical_text().find('\n'), std::string::npos);
  b = a;
  b.mask_fraction = 1.0;
  EXPECT_THROW(b.validate(), ConfigError);
}
