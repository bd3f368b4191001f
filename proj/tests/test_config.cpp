#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <fstream>
#include <sstream>

#include "sgpt/config.hpp"

using namespace sgpt;

namespace {

std::string write_tmp(const char* name, const std::string& body) {
  const auto p = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST(Config, FlagsOverrideFileOverrideDefaults) {
  const auto path = write_tmp("sgpt_cfg_prec.conf", "# tuning\nlr = 0.01\nshots = 20\n\n");
  const RunConfig a = parse_config(path, {{"lr", "0.001"}});
  EXPECT_EQ(a.real("lr"), 0.001);
  EXPECT_EQ(a.count("shots"), 20u);
  EXPECT_EQ(a.count("epochs"), 200u);
  EXPECT_EQ(a.explicit_keys, (std::set<std::string>{"lr", "shots"}));
  EXPECT_EQ(parse_config(path, {}).real("lr"), 0.01);
  std::filesystem::remove(path);
}

TEST(Config, EmptyFileGivesDefaults) {
  const auto path = write_tmp("sgpt_cfg_empty.conf", "");
  const RunConfig rc = parse_config(path, {});
  EXPECT_TRUE(rc.explicit_keys.empty());
  const TuneConfig t = rc.tune();
  EXPECT_EQ(t.shots, 100u);
  EXPECT_EQ(t.hops, 2u);
  EXPECT_EQ(t.bases, 3u);
  EXPECT_EQ(t.d_mid, 8u);
  EXPECT_EQ(t.tau, 0.1);
  EXPECT_EQ(rc.gcn().layer_dims, (std::vector<std::size_t>{64, 32, 64, 64}));
  EXPECT_EQ(rc.pretrain().hash(), PretrainConfig{}.hash());
  EXPECT_FALSE(rc.pins_pretrain_config());
  EXPECT_FALSE(rc.expected_stats().has_value());
  std::filesystem::remove(path);
}

TEST(Config, MissingRequiredKeyIsNamed) {
  const RunConfig rc = parse_config(std::nullopt, {});
  try {
    rc.require({"graph"});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("graph"), std::string::npos);
  }
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config(std::nullopt, {{"bogus", "1"}}), ConfigError);
  EXPECT_THROW(parse_config(std::nullopt, {{"shots", "ten"}}), ConfigError);
  EXPECT_THROW(parse_config(std::nullopt, {{"shots", "-3"}}), ConfigError);
  EXPECT_THROW(parse_config(std::nullopt, {{"lr", "0.1x"}}), ConfigError);
  EXPECT_THROW(parse_config(std::nullopt, {{"lr", "nan"}}), ConfigError);
  EXPECT_THROW(parse_config(std::nullopt, {{"task", "graph"}}), ConfigError);
  EXPECT_THROW(parse_config(std::nullopt, {{"graph", "/no/such/file.tsv"}}), ConfigError);
  EXPECT_THROW(parse_config(std::string("/no/such/config.conf"), {}), ConfigError);
  const auto unknown = write_tmp("sgpt_cfg_unknown.conf", "lr = 0.1\nwarmup = 5\n");
  EXPECT_THROW(parse_config(unknown, {}), ConfigError);
  const auto noeq = write_tmp("sgpt_cfg_noeq.conf", "lr 0.1\n");
  EXPECT_THROW(parse_config(noeq, {}), ParseError);
  std::filesystem::remove(unknown);
  std::filesystem::remove(noeq);
  // values that parse but violate the tuning domain
  EXPECT_THROW(parse_config(std::nullopt, {{"dmid", "0"}}).tune(), ConfigError);
  EXPECT_THROW(parse_config(std::nullopt, {{"expect_nodes", "3"}}).expected_stats(), ConfigError);
}

TEST(Config, PinningPretrainKeys) {
  EXPECT_TRUE(parse_config(std::nullopt, {{"mask", "0.2"}}).pins_pretrain_config());
  EXPECT_FALSE(parse_config(std::nullopt, {{"lr", "0.2"}}).pins_pretrain_config());
  const auto j = parse_config(std::nullopt, {{"shots", "5"}}).to_json();
  EXPECT_EQ(j["shots"], "5");
  EXPECT_EQ(j["tool_version"], kToolVersion);
}

TEST(Logger, KeyValueLines) {
  std::ostringstream os;
  Logger log(os);
  log("epoch", "n", 3, "loss", 0.5);
  EXPECT_EQ(os.str(), "event=epoch n=3 loss=0.5\n");
  Logger off(os, false);
  off("x");
  EXPECT_EQ(os.str(), "event=epoch n=3 loss=0.5\n");
}

TEST(Synthetic, NoiselessGraphIsBalanced) {
  SyntheticSpec spec;
  spec.num_nodes = 41;
  spec.noise_flip_prob = 0.0;
  spec.seed = 5;
  const auto sg = generate_synthetic(spec);
  EXPECT_EQ(std::count(sg.labels.begin(), sg.labels.end(), 0), 21);
  EXPECT_EQ(std::count(sg.labels.begin(), sg.labels.end(), 1), 20);
  for (const auto& e : sg.graph.signed_edges())
    EXPECT_EQ(e.sign, sg.labels[e.edge.u] == sg.labels[e.edge.v] ? 1 : -1);
  // every triangle carries an even number of negative edges
  const auto& g = sg.graph;
  std::map<std::pair<Index, Index>, int> sign;
  for (const auto& e : g.signed_edges()) sign[{e.edge.u, e.edge.v}] = e.sign;
  auto s = [&](Index a, Index b) {
    auto it = sign.find({std::min(a, b), std::max(a, b)});
    return it == sign.end() ? 0 : it->second;
  };
  std::size_t triangles = 0;
  for (Index a = 0; a < 41; ++a)
    for (Index b = a + 1; b < 41; ++b)
      for (Index c = b + 1; c < 41; ++c)
        if (s(a, b) && s(b, c) && s(a, c)) {
          EXPECT_EQ(s(a, b) * s(b, c) * s(a, c), 1);
          ++triangles;
        }
  EXPECT_GT(triangles, 0u);
}

TEST(Synthetic, FullNoiseInvertsSignsOnSameEdges) {
  SyntheticSpec spec;
  spec.noise_flip_prob = 0.0;
  const auto clean = generate_synthetic(spec);
  spec.noise_flip_prob = 1.0;
  const auto flipped = generate_synthetic(spec);
  EXPECT_EQ(clean.graph.pos_edges, flipped.graph.neg_edges);
  EXPECT_EQ(clean.graph.neg_edges, flipped.graph.pos_edges);
  spec.noise_flip_prob = 0.05;
  EXPECT_EQ(generate_synthetic(spec).graph, generate_synthetic(spec).graph);
  spec.seed = 1;
  EXPECT_FALSE(generate_synthetic(spec).graph == flipped.graph);
  spec.intra_pos_prob = 1.5;
  EXPECT_THROW(generate_synthetic(spec), ConfigError);
}

TEST(Synthetic, LabelsFile) {
  std::ostringstream os;
  write_labels(os, NodeLabels{0, -1, 1});
  EXPECT_EQ(os.str(), "0,0\n2,1\n");
}

TEST(TrustSurrogate, ExactCounts) {
  const SignedGraph g = generate_trust_surrogate(TrustSurrogateSpec{});
  EXPECT_EQ(g.num_nodes, 3783u);
  EXPECT_EQ(g.pos_edges.size(), 22650u);
  EXPECT_EQ(g.neg_edges.size(), 1536u);
  EXPECT_EQ(g, generate_trust_surrogate(TrustSurrogateSpec{}));
}
