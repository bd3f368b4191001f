#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "sgpt/gcn.hpp"
#include "sgpt/graph.hpp"

using namespace sgpt;

namespace {

std::vector<Matrix> values(const std::vector<ad::Parameter>& ps) {
  std::vector<Matrix> out;
  for (const auto& p : ps) out.push_back(p.value);
  return out;
}

std::string tmp(const char* name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST(Init, DeterministicAndBounded) {
  GcnConfig cfg;
  const auto a = init_weights(cfg, 3), b = init_weights(cfg, 3), c = init_weights(cfg, 4);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t l = 0; l < a.size(); ++l) {
    EXPECT_TRUE(a[l].value.bit_equal(b[l].value));
    EXPECT_FALSE(a[l].value.bit_equal(c[l].value));
    const double bound = glorot_bound(cfg.layer_dims[l], cfg.layer_dims[l + 1]);
    for (double v : a[l].value.storage()) EXPECT_LE(std::abs(v), bound);
  }
  EXPECT_NE(glorot_bound(64, 32), glorot_bound(32, 64 + 1));
}

TEST(Encode, IsolatedNodeIdentityWeights) {
  GcnConfig cfg{{3, 3, 3}};
  std::vector<Matrix> ws{dense::identity(3), dense::identity(3)};
  const auto adj = gcn_normalize(SparseBinaryMatrix(1, 1));
  const Matrix x = Matrix::from_rows({{1.5, -2.0, 0.25}});
  EXPECT_EQ(encode(ws, adj, x), Matrix::from_rows({{1.5, 0.0, 0.25}}));
}

TEST(Encode, ZeroFeaturesGiveZero) {
  const auto g = oracle::random_signed_graph(15, 0.3, 0.3, 1);
  const auto ws = values(init_weights(GcnConfig{}, 1));
  const Matrix h = encode(ws, gcn_normalize(unsigned_view(g)), Matrix(15, 64));
  for (double v : h.storage()) EXPECT_EQ(v, 0.0);
}

TEST(Encode, TapeMatchesPlainBitwise) {
  const auto g = init_features(oracle::random_signed_graph(25, 0.2, 0.3, 2), 64, 3);
  auto params = init_weights(GcnConfig{}, 5);
  const auto adj = gcn_normalize(unsigned_view(g));
  ad::Tape t;
  std::vector<ad::Var> ws;
  for (auto& p : params) ws.push_back(t.param(p));
  const Matrix& a = t.value(encode(t, ws, adj, t.constant_ref(g.features)));
  EXPECT_TRUE(a.bit_equal(encode(values(params), adj, g.features)));
  EXPECT_TRUE(encode(values(params), adj, g.features).bit_equal(encode(values(params), adj, g.features)));
}

TEST(Encode, PermutationEquivariance) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto g = init_features(oracle::random_signed_graph(20, 0.2, 0.3, s), 8, s);
    const auto ws = values(init_weights(GcnConfig{{8, 6, 5}}, s));
    std::vector<Index> perm(20);
    for (Index i = 0; i < 20; ++i) perm[i] = i;
    Rng rng(s + 77);
    rng.shuffle(perm);
    std::vector<SignedEdge> recs;
    for (const auto& e : g.signed_edges()) recs.push_back({Edge::make(perm[e.edge.u], perm[e.edge.v]), e.sign});
    SignedGraph pg = make_signed_graph(20, recs);
    pg.features = Matrix(20, 8);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 8; ++j) pg.features(perm[i], j) = g.features(i, j);
    const Matrix h = encode(ws, gcn_normalize(unsigned_view(g)), g.features);
    const Matrix ph = encode(ws, gcn_normalize(unsigned_view(pg)), pg.features);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(ph(perm[i], j), h(i, j), 1e-12);
  }
}

TEST(Encode, ShapeErrors) {
  const auto ws = values(init_weights(GcnConfig{}, 1));
  EXPECT_THROW(encode(ws, gcn_normalize(SparseBinaryMatrix(3, 3)), Matrix(3, 10)), ShapeError);
  EXPECT_THROW(encode(ws, gcn_normalize(SparseBinaryMatrix(3, 3)), Matrix(4, 64)), ShapeError);
}

namespace {

Checkpoint sample_checkpoint(std::vector<std::size_t> dims = {64, 32, 64, 64}) {
  Checkpoint ck;
  ck.config.layer_dims = std::move(dims);
  ck.weights = values(init_weights(ck.config, 9));
  ck.seed = 9;
  ck.config_text = "layer_dims=" + ck.config.dims_string();
  ck.config_hash = sha256_hex(ck.config_text);
  ck.tool_version = "test";
  return ck;
}

}  // namespace

TEST(Checkpoint, RoundTripBitExact) {
  const auto path = tmp("sgpt_ck_roundtrip.bin");
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path, ck.config_hash);
  ASSERT_EQ(back.weights.size(), ck.weights.size());
  for (std::size_t l = 0; l < ck.weights.size(); ++l) EXPECT_TRUE(back.weights[l].bit_equal(ck.weights[l]));
  EXPECT_EQ(back, ck);
  std::filesystem::remove(path);
}

TEST(Checkpoint, TruncatedIsCorrupt) {
  const auto path = tmp("sgpt_ck_trunc.bin");
  save_checkpoint(path, sample_checkpoint());
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 100);
  EXPECT_THROW(load_checkpoint(path), CorruptFileError);
  std::filesystem::resize_file(path, 5);
  EXPECT_THROW(load_checkpoint(path), CorruptFileError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, FlippedByteIsCorrupt) {
  const auto path = tmp("sgpt_ck_flip.bin");
  save_checkpoint(path, sample_checkpoint());
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(200);
    f.put('\x5a');
  }
  EXPECT_THROW(load_checkpoint(path), CorruptFileError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, DifferentDimsIsHashMismatch) {
  const auto path = tmp("sgpt_ck_dims.bin");
  save_checkpoint(path, sample_checkpoint({64, 16, 64}));
  const std::string expected = sha256_hex("layer_dims=64,32,64,64");
  EXPECT_THROW(load_checkpoint(path, expected), HashMismatchError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, WrongMagicIsCorrupt) {
  const auto path = tmp("sgpt_wrong_magic.bin");
  TensorContainer c;
  c.magic = "SGPTPRMT";
  write_container(path, c);
  EXPECT_THROW(load_checkpoint(path), CorruptFileError);
  std::filesystem::remove(path);
}
