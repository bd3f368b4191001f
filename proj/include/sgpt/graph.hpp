#pragma once

// Signed graphs: loading the canonical edge-list format, seeded node
// features, unsigned/signed adjacency views, and few-shot split sampling.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sgpt/dense.hpp"
#include "sgpt/error.hpp"
#include "sgpt/random.hpp"
#include "sgpt/sparse.hpp"

namespace sgpt {

// Unordered node pair stored with the smaller id first.
struct Edge {
  Index u = 0;
  Index v = 0;

  static Edge make(Index a, Index b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct SignedEdge {
  Edge edge;
  int sign = 1;  // +1 or -1
  friend bool operator==(const SignedEdge&, const SignedEdge&) = default;
};

struct SignedGraph {
  std::size_t num_nodes = 0;
  std::vector<Edge> pos_edges;  // sorted, unique
  std::vector<Edge> neg_edges;  // sorted, unique
  Matrix features;              // num_nodes x d_in

  std::size_t num_edges() const noexcept { return pos_edges.size() + neg_edges.size(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }

  // All edges, sorted by pair.
  std::vector<SignedEdge> signed_edges() const {
    std::vector<SignedEdge> out;
    out.reserve(num_edges());
    for (const Edge& e : pos_edges) out.push_back({e, +1});
    for (const Edge& e : neg_edges) out.push_back({e, -1});
    std::sort(out.begin(), out.end(),
              [](const SignedEdge& a, const SignedEdge& b) { return a.edge < b.edge; });
    return out;
  }

  void validate() const {
    auto check = [&](const std::vector<Edge>& es, const char* what) {
      for (std::size_t i = 0; i < es.size(); ++i) {
        const Edge& e = es[i];
        if (e.u >= e.v) throw PreconditionError(std::string(what) + ": self-loop or unordered pair");
        if (e.v >= num_nodes) throw PreconditionError(std::string(what) + ": node id out of range");
        if (i && !(es[i - 1] < e)) throw PreconditionError(std::string(what) + ": not sorted/unique");
      }
    };
    check(pos_edges, "pos_edges");
    check(neg_edges, "neg_edges");
    std::vector<Edge> both;
    std::set_intersection(pos_edges.begin(), pos_edges.end(), neg_edges.begin(), neg_edges.end(),
                          std::back_inserter(both));
    if (!both.empty()) throw ConflictingSignError("edge present with both signs");
    if (features.rows() != num_nodes)
      throw ShapeError("feature rows " + std::to_string(features.rows()) + " != num_nodes " +
                       std::to_string(num_nodes));
  }

  friend bool operator==(const SignedGraph& a, const SignedGraph& b) {
    return a.num_nodes == b.num_nodes && a.pos_edges == b.pos_edges &&
           a.neg_edges == b.neg_edges && a.features == b.features;
  }
};

// Builds a graph from signed records; later duplicates of a pair are dropped,
// opposite-sign duplicates are rejected.
inline SignedGraph make_signed_graph(std::size_t num_nodes, const std::vector<SignedEdge>& records) {
  std::map<Edge, int> seen;
  for (const auto& r : records) {
    if (r.edge.u == r.edge.v) throw PreconditionError("self-loop on node " + std::to_string(r.edge.u));
    if (r.edge.v >= num_nodes || r.edge.u >= num_nodes)
      throw PreconditionError("node id out of range");
    const Edge e = Edge::make(r.edge.u, r.edge.v);
    auto [it, inserted] = seen.emplace(e, r.sign);
    if (!inserted && it->second != r.sign)
      throw ConflictingSignError("conflicting signs for pair (" + std::to_string(e.u) + "," +
                                 std::to_string(e.v) + ")");
  }
  SignedGraph g;
  g.num_nodes = num_nodes;
  for (const auto& [e, s] : seen) (s > 0 ? g.pos_edges : g.neg_edges).push_back(e);
  g.features = Matrix(num_nodes, 0);
  return g;
}

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t pos = 0;
  std::size_t neg = 0;
  friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

// Parses canonical edge-list text: optional `#nodes=<n>` header, then
// `src,dst,sign` or `src,dst,rating` records. Other `#` lines and blank lines
// are ignored.
inline SignedGraph parse_signed_graph(std::istream& in,
                                      std::optional<GraphStats> expected = std::nullopt) {
  std::optional<std::size_t> declared_nodes;
  std::vector<SignedEdge> records;
  std::size_t max_id_plus_one = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view s = detail::trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      constexpr std::string_view key = "#nodes=";
      if (s.substr(0, key.size()) == key) {
        auto n = detail::parse_int(s.substr(key.size()));
        if (!n || *n < 0) throw ParseError("bad #nodes header", line_no);
        declared_nodes = static_cast<std::size_t>(*n);
      }
      continue;
    }
    const auto fields = detail::split(s, ',');
    if (fields.size() != 3) throw ParseError("expected src,dst,sign: '" + std::string(s) + "'", line_no);
    const auto src = detail::parse_int(fields[0]);
    const auto dst = detail::parse_int(fields[1]);
    const auto val = detail::parse_int(fields[2]);
    if (!src || !dst || !val || *src < 0 || *dst < 0 || *src > 0xFFFFFFFELL || *dst > 0xFFFFFFFELL)
      throw ParseError("malformed record '" + std::string(s) + "'", line_no);
    if (*val == 0) throw ParseError("zero sign/rating '" + std::string(s) + "'", line_no);
    if (*src == *dst) throw ParseError("self-loop '" + std::string(s) + "'", line_no);
    records.push_back({{Index(*src), Index(*dst)}, *val > 0 ? +1 : -1});
    max_id_plus_one = std::max<std::size_t>(max_id_plus_one, std::max(*src, *dst) + 1);
  }
  const std::size_t n = declared_nodes.value_or(max_id_plus_one);
  if (max_id_plus_one > n)
    throw ParseError("node id " + std::to_string(max_id_plus_one - 1) + " exceeds #nodes=" +
                     std::to_string(n));
  SignedGraph g = make_signed_graph(n, records);
  if (expected) {
    const GraphStats found{g.num_nodes, g.pos_edges.size(), g.neg_edges.size()};
    if (found != *expected)
      throw StatsMismatchError("dataset statistics mismatch: found nodes=" + std::to_string(found.nodes) +
                               " pos=" + std::to_string(found.pos) + " neg=" + std::to_string(found.neg) +
                               ", expected nodes=" + std::to_string(expected->nodes) +
                               " pos=" + std::to_string(expected->pos) +
                               " neg=" + std::to_string(expected->neg));
  }
  return g;
}

inline SignedGraph load_signed_graph(const std::string& path,
                                     std::optional<GraphStats> expected = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph file '" + path + "'");
  return parse_signed_graph(in, expected);
}

inline void write_signed_graph(std::ostream& os, const SignedGraph& g) {
  os << "#nodes=" << g.num_nodes << '\n';
  for (const auto& e : g.signed_edges())
    os << e.edge.u << ',' << e.edge.v << ',' << (e.sign > 0 ? "+1" : "-1") << '\n';
}

// Fills features with seeded standard Gaussian values.
inline SignedGraph init_features(SignedGraph g, std::size_t d_in, std::uint64_t seed) {
  if (d_in == 0) throw PreconditionError("init_features: d_in must be >= 1");
  Rng rng(seed);
  g.features = Matrix(g.num_nodes, d_in);
  for (double& x : g.features.storage()) x = rng.normal();
  return g;
}

inline std::vector<std::pair<Index, Index>> symmetric_positions(const std::vector<Edge>& es) {
  std::vector<std::pair<Index, Index>> pos;
  pos.reserve(2 * es.size());
  for (const Edge& e : es) {
    pos.emplace_back(e.u, e.v);
    pos.emplace_back(e.v, e.u);
  }
  return pos;
}

// A+ union A-, symmetric, zero diagonal.
inline SparseBinaryMatrix unsigned_view(const SignedGraph& g) {
  auto pos = symmetric_positions(g.pos_edges);
  auto neg = symmetric_positions(g.neg_edges);
  pos.insert(pos.end(), neg.begin(), neg.end());
  return SparseBinaryMatrix::from_positions(g.num_nodes, g.num_nodes, std::move(pos));
}

inline SparseBinaryMatrix positive_adjacency(const SignedGraph& g) {
  return SparseBinaryMatrix::from_positions(g.num_nodes, g.num_nodes, symmetric_positions(g.pos_edges));
}

inline SparseBinaryMatrix negative_adjacency(const SignedGraph& g) {
  return SparseBinaryMatrix::from_positions(g.num_nodes, g.num_nodes, symmetric_positions(g.neg_edges));
}

// Same nodes and features, restricted to the given edges.
inline SignedGraph subgraph_with_edges(const SignedGraph& g, const std::vector<SignedEdge>& edges) {
  SignedGraph out = make_signed_graph(g.num_nodes, edges);
  out.features = g.features;
  return out;
}

// ---------------------------------------------------------------------------
// Link sign prediction splits

struct LabeledPair {
  Edge pair;
  int sign = 1;
  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

enum class ShotMode {
  balanced_total,  // `shots` support links in total, split evenly across signs
  per_class,       // `shots` support links per sign
};

struct LspSplit {
  std::vector<SignedEdge> mp_edges;
  std::vector<LabeledPair> support;
  std::vector<LabeledPair> test;
  std::uint64_t seed = 0;
  friend bool operator==(const LspSplit&, const LspSplit&) = default;
};

inline std::size_t message_passing_count(std::size_t total) { return total * 3 / 10; }

// Shuffles the edge set under `seed` and reserves 30% of it for message passing.
inline std::pair<std::vector<SignedEdge>, std::vector<SignedEdge>> partition_message_passing(
    const SignedGraph& g, std::uint64_t seed) {
  auto all = g.signed_edges();
  Rng rng(derive_seed(seed, 0x6d70));
  rng.shuffle(all);
  const std::size_t mp = message_passing_count(all.size());
  std::vector<SignedEdge> pool(all.begin() + static_cast<std::ptrdiff_t>(mp), all.end());
  all.resize(mp);
  return {std::move(all), std::move(pool)};
}

// Draws the support set from `pool` (class-balanced) and leaves the rest as test.
inline LspSplit make_lsp_task(std::vector<SignedEdge> mp_edges, std::vector<SignedEdge> pool,
                              std::size_t shots, std::uint64_t seed,
                              ShotMode mode = ShotMode::balanced_total) {
  if (shots == 0) throw PreconditionError("make_lsp_split: shots must be >= 1");
  const std::size_t total_support = mode == ShotMode::per_class ? 2 * shots : shots;
  if (total_support >= pool.size())
    throw PreconditionError("make_lsp_split: insufficient edges: " + std::to_string(pool.size()) +
                            " non-message-passing edges for " + std::to_string(total_support) +
                            " support links (test would be empty)");
  Rng rng(derive_seed(seed, 0x7370));
  rng.shuffle(pool);
  std::vector<SignedEdge> pos, neg;
  for (const auto& e : pool) (e.sign > 0 ? pos : neg).push_back(e);

  std::size_t want_pos = mode == ShotMode::per_class ? shots : (shots + 1) / 2;
  std::size_t want_neg = mode == ShotMode::per_class ? shots : shots / 2;
  if (want_pos > pos.size()) {
    want_neg += want_pos - pos.size();
    want_pos = pos.size();
  }
  if (want_neg > neg.size()) {
    want_pos = std::min(pos.size(), want_pos + (want_neg - neg.size()));
    want_neg = neg.size();
  }

  LspSplit split;
  split.mp_edges = std::move(mp_edges);
  split.seed = seed;
  for (std::size_t i = 0; i < want_pos; ++i) split.support.push_back({pos[i].edge, +1});
  for (std::size_t i = 0; i < want_neg; ++i) split.support.push_back({neg[i].edge, -1});
  std::set<Edge> in_support;
  for (const auto& s : split.support) in_support.insert(s.pair);
  for (const auto& e : pool)
    if (!in_support.count(e.edge)) split.test.push_back({e.edge, e.sign});
  return split;
}

inline LspSplit make_lsp_split(const SignedGraph& g, std::size_t shots, std::uint64_t seed,
                               ShotMode mode = ShotMode::balanced_total) {
  if (g.pos_edges.empty() || g.neg_edges.empty())
    throw PreconditionError("make_lsp_split: both sign classes must be nonempty");
  auto [mp, pool] = partition_message_passing(g, seed);
  return make_lsp_task(std::move(mp), std::move(pool), shots, seed, mode);
}

inline nlohmann::json split_to_json(const LspSplit& s) {
  auto pairs = [](const auto& xs) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : xs) {
      if constexpr (requires { x.edge; })
        a.push_back({x.edge.u, x.edge.v, x.sign});
      else
        a.push_back({x.pair.u, x.pair.v, x.sign});
    }
    return a;
  };
  return {{"mp", pairs(s.mp_edges)}, {"support", pairs(s.support)}, {"test", pairs(s.test)},
          {"seed", s.seed}};
}

// ---------------------------------------------------------------------------
// Node classification tasks

// Class id per node; -1 marks an unlabeled node.
using NodeLabels = std::vector<int>;

struct NcTask {
  std::vector<std::pair<Index, int>> support;
  std::vector<std::pair<Index, int>> test;
  std::size_t num_classes = 0;
  friend bool operator==(const NcTask&, const NcTask&) = default;
};

// Reads a `node,class` sidecar file; nodes not listed stay unlabeled.
inline NodeLabels load_labels(const std::string& path, std::size_t num_nodes) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open labels file '" + path + "'");
  NodeLabels labels(num_nodes, -1);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto f = detail::split(s, ',');
    if (f.size() != 2) throw ParseError("expected node,class", line_no);
    const auto node = detail::parse_int(f[0]);
    const auto cls = detail::parse_int(f[1]);
    if (!node || !cls || *node < 0 || *cls < 0) throw ParseError("malformed label record", line_no);
    if (static_cast<std::size_t>(*node) >= num_nodes)
      throw ParseError("label for node " + std::to_string(*node) + " out of range", line_no);
    labels[static_cast<std::size_t>(*node)] = static_cast<int>(*cls);
  }
  return labels;
}

inline std::size_t count_classes(const NodeLabels& labels) {
  int m = -1;
  for (int c : labels) m = std::max(m, c);
  return static_cast<std::size_t>(m + 1);
}

inline std::vector<NcTask> sample_nc_tasks(const SignedGraph& g, const NodeLabels& labels,
                                           std::size_t shots, std::size_t num_tasks,
                                           std::uint64_t seed) {
  if (labels.size() != g.num_nodes) throw ShapeError("sample_nc_tasks: labels size != num_nodes");
  if (shots == 0) throw PreconditionError("sample_nc_tasks: shots must be >= 1");
  const std::size_t m = count_classes(labels);
  std::vector<std::vector<Index>> members(m);
  for (std::size_t v = 0; v < labels.size(); ++v)
    if (labels[v] >= 0) members[static_cast<std::size_t>(labels[v])].push_back(Index(v));
  for (std::size_t c = 0; c < m; ++c)
    if (members[c].size() < shots)
      throw PreconditionError("sample_nc_tasks: class " + std::to_string(c) + " has " +
                              std::to_string(members[c].size()) + " labeled nodes, fewer than shots=" +
                              std::to_string(shots));

  std::vector<NcTask> tasks;
  tasks.reserve(num_tasks);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    Rng rng(derive_seed(seed, 0x6e63 + (t << 16)));
    NcTask task;
    task.num_classes = m;
    std::vector<char> chosen(g.num_nodes, 0);
    for (std::size_t c = 0; c < m; ++c) {
      std::vector<Index> pool = members[c];
      for (std::size_t i = 0; i < shots; ++i) {  // partial Fisher-Yates
        const std::size_t j = i + static_cast<std::size_t>(rng.index(pool.size() - i));
        std::swap(pool[i], pool[j]);
        task.support.emplace_back(pool[i], static_cast<int>(c));
        chosen[pool[i]] = 1;
      }
    }
    for (std::size_t v = 0; v < labels.size(); ++v)
      if (labels[v] >= 0 && !chosen[v]) task.test.emplace_back(Index(v), labels[v]);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace sgpt
