#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "sgpt/graph.hpp"

using namespace sgpt;

namespace {

SignedGraph parse(const std::string& text, std::optional<GraphStats> st = std::nullopt) {
  std::istringstream in(text);
  return parse_signed_graph(in, st);
}

std::multiset<std::pair<Edge, int>> as_multiset(const std::vector<SignedEdge>& es) {
  std::multiset<std::pair<Edge, int>> out;
  for (const auto& e : es) out.insert({e.edge, e.sign});
  return out;
}

template <class Pairs>
std::multiset<std::pair<Edge, int>> as_multiset_pairs(const Pairs& ps) {
  std::multiset<std::pair<Edge, int>> out;
  for (const auto& p : ps) out.insert({p.pair, p.sign});
  return out;
}

}  // namespace

TEST(Loader, SignsRatingsAndDuplicates) {
  const auto g = parse("#nodes=6\n0,1,+1\n1,2,-1\n# comment\n2,3,7\n3,4,-10\n1,0,1\n\n4,5,+1\n");
  EXPECT_EQ(g.num_nodes, 6u);
  EXPECT_EQ(g.pos_edges, (std::vector<Edge>{{0, 1}, {2, 3}, {4, 5}}));
  EXPECT_EQ(g.neg_edges, (std::vector<Edge>{{1, 2}, {3, 4}}));
  EXPECT_NO_THROW(g.validate());
}

TEST(Loader, EmptyFileWithDeclaredNodes) {
  const auto g = parse("#nodes=5\n");
  EXPECT_EQ(g.num_nodes, 5u);
  EXPECT_EQ(g.num_edges(), 0u);
}

TEST(Loader, ConflictingSignsRejected) {
  EXPECT_THROW(parse("1,2,+1\n1,2,-1\n"), ConflictingSignError);
  EXPECT_THROW(parse("1,2,+1\n2,1,-3\n"), ConflictingSignError);
}

TEST(Loader, ParseErrorsCarryLineNumbers) {
  try {
    parse("0,1,1\n0,1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("0,1,0\n"), ParseError);
  EXPECT_THROW(parse("0,x,1\n"), ParseError);
  EXPECT_THROW(parse("3,3,1\n"), ParseError);
  EXPECT_THROW(parse("#nodes=2\n0,5,1\n"), ParseError);
}

TEST(Loader, StatsValidation) {
  EXPECT_NO_THROW(parse("#nodes=3\n0,1,1\n1,2,-1\n", GraphStats{3, 1, 1}));
  try {
    parse("#nodes=3\n0,1,1\n1,2,-1\n", GraphStats{3, 2, 1});
    FAIL();
  } catch (const StatsMismatchError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("found nodes=3 pos=1 neg=1"), std::string::npos);
    EXPECT_NE(msg.find("expected nodes=3 pos=2 neg=1"), std::string::npos);
  }
}

TEST(Loader, IdempotentAndRoundTrip) {
  const auto g = oracle::random_signed_graph(40, 0.2, 0.3, 11);
  const auto path = std::filesystem::temp_directory_path() / "sgpt_graph_roundtrip.csv";
  {
    std::ofstream out(path);
    write_signed_graph(out, g);
  }
  const auto a = load_signed_graph(path.string());
  const auto b = load_signed_graph(path.string());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.pos_edges, g.pos_edges);
  EXPECT_EQ(a.neg_edges, g.neg_edges);
  std::filesystem::remove(path);
}

TEST(Features, DeterministicGaussian) {
  const auto g = parse("#nodes=10\n0,1,1\n");
  const auto a = init_features(g, 64, 7), b = init_features(g, 64, 7), c = init_features(g, 64, 8);
  EXPECT_TRUE(a.features.bit_equal(b.features));
  EXPECT_FALSE(a.features.bit_equal(c.features));
  EXPECT_EQ(a.features.rows(), 10u);
  EXPECT_EQ(a.features.cols(), 64u);
  EXPECT_THROW(init_features(g, 0, 7), PreconditionError);
}

TEST(UnsignedView, Definition) {
  const auto g = parse("#nodes=4\n1,2,1\n2,3,-1\n");
  const auto u = unsigned_view(g);
  EXPECT_EQ(u.positions(), (std::vector<std::pair<Index, Index>>{{1, 2}, {2, 1}, {2, 3}, {3, 2}}));
  EXPECT_TRUE(u.is_symmetric());
  EXPECT_EQ(unsigned_view(parse("#nodes=3\n")).nnz(), 0u);
}

TEST(LspSplit, SizesFromExample) {
  // 1000 edges with both signs present
  sgpt::Rng rng(3);
  std::vector<SignedEdge> recs;
  std::set<Edge> used;
  while (recs.size() < 1000) {
    const auto u = Index(rng.index(200)), v = Index(rng.index(200));
    if (u == v || !used.insert(Edge::make(u, v)).second) continue;
    recs.push_back({Edge::make(u, v), rng.bernoulli(0.3) ? -1 : 1});
  }
  const auto g = make_signed_graph(200, recs);
  const auto s = make_lsp_split(g, 100, 5);
  EXPECT_EQ(s.mp_edges.size(), 300u);
  EXPECT_EQ(s.support.size(), 100u);
  EXPECT_EQ(s.test.size(), 600u);
  std::size_t npos = 0;
  for (const auto& p : s.support) npos += p.sign > 0;
  EXPECT_EQ(npos, 50u);
}

TEST(LspSplit, PartitionExhaustive) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = oracle::random_signed_graph(60, 0.2 + 0.01 * double(seed % 10), 0.3, seed);
    ASSERT_LE(g.num_edges(), 1000u);
    const std::size_t shots = 1 + seed % 20;
    const auto s = make_lsp_split(g, shots, seed);
    auto all = as_multiset(s.mp_edges);
    const auto sup = as_multiset_pairs(s.support), test = as_multiset_pairs(s.test);
    all.insert(sup.begin(), sup.end());
    all.insert(test.begin(), test.end());
    EXPECT_EQ(all, as_multiset(g.signed_edges()));
    EXPECT_EQ(s.mp_edges.size(), g.num_edges() * 3 / 10);
    EXPECT_EQ(s.support.size(), shots);
    for (const auto& p : s.support) EXPECT_LT(p.pair.u, p.pair.v);
  }
}

TEST(LspSplit, DeterministicAndErrors) {
  const auto g = oracle::random_signed_graph(40, 0.3, 0.3, 1);
  EXPECT_EQ(make_lsp_split(g, 10, 9), make_lsp_split(g, 10, 9));
  EXPECT_NE(make_lsp_split(g, 10, 9), make_lsp_split(g, 10, 10));
  EXPECT_THROW(make_lsp_split(g, g.num_edges(), 1), PreconditionError);
  const auto only_pos = parse("0,1,1\n1,2,1\n");
  EXPECT_THROW(make_lsp_split(only_pos, 1, 1), PreconditionError);
}

TEST(LspSplit, BalancedDegradesWhenClassExhausted) {
  std::vector<SignedEdge> recs;
  for (Index i = 0; i < 40; ++i) recs.push_back({{i, Index(i + 1)}, i < 3 ? -1 : 1});
  const auto g = make_signed_graph(41, recs);
  const auto s = make_lsp_split(g, 10, 2);
  std::size_t neg = 0;
  for (const auto& p : s.support) neg += p.sign < 0;
  EXPECT_EQ(s.support.size(), 10u);
  EXPECT_LE(neg, 3u);
  const auto pc = make_lsp_split(oracle::random_signed_graph(40, 0.3, 0.4, 3), 5, 2, ShotMode::per_class);
  std::size_t pos_pc = 0;
  for (const auto& p : pc.support) pos_pc += p.sign > 0;
  EXPECT_EQ(pc.support.size(), 10u);
  EXPECT_EQ(pos_pc, 5u);
}

TEST(LspSplit, Json) {
  const auto g = oracle::random_signed_graph(20, 0.4, 0.3, 2);
  const auto s = make_lsp_split(g, 4, 1);
  const auto j = split_to_json(s);
  EXPECT_EQ(j["support"].size(), 4u);
  EXPECT_EQ(j["seed"], 1);
  EXPECT_EQ(j["mp"][0].size(), 3u);
}

TEST(NcTasks, SupportPerClassAndDisjoint) {
  const auto g = oracle::random_signed_graph(30, 0.2, 0.3, 4);
  NodeLabels labels(30);
  for (std::size_t i = 0; i < 30; ++i) labels[i] = i % 2;
  const auto tasks = sample_nc_tasks(g, labels, 1, 100, 5);
  ASSERT_EQ(tasks.size(), 100u);
  for (const auto& t : tasks) {
    EXPECT_EQ(t.support.size(), 2u);
    std::set<Index> sup;
    std::vector<int> per(2, 0);
    for (const auto& [v, c] : t.support) {
      sup.insert(v);
      ++per[static_cast<std::size_t>(c)];
      EXPECT_EQ(labels[v], c);
    }
    EXPECT_EQ(per, (std::vector<int>{1, 1}));
    EXPECT_EQ(t.test.size(), 28u);
    for (const auto& [v, c] : t.test) EXPECT_FALSE(sup.count(v));
  }
  EXPECT_EQ(sample_nc_tasks(g, labels, 1, 100, 5), tasks);
  EXPECT_TRUE(sample_nc_tasks(g, labels, 1, 0, 5).empty());
}

TEST(NcTasks, TooFewNamesClass) {
  const auto g = oracle::random_signed_graph(10, 0.2, 0.3, 4);
  NodeLabels labels(10, 0);
  labels[3] = 1;
  try {
    sample_nc_tasks(g, labels, 2, 1, 0);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

TEST(NcTasks, LabelsFile) {
  const auto path = std::filesystem::temp_directory_path() / "sgpt_labels.csv";
  {
    std::ofstream out(path);
    out << "0,1\n2,0\n";
  }
  const auto l = load_labels(path.string(), 4);
  EXPECT_EQ(l, (NodeLabels{1, -1, 0, -1}));
  EXPECT_THROW(load_labels(path.string(), 2), ParseError);
  std::filesystem::remove(path);
}
