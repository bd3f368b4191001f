#pragma once

// Run configuration (flat `key = value` files plus command-line overrides),
// stderr logging, and synthetic signed-graph generators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sgpt/error.hpp"
#include "sgpt/gcn.hpp"
#include "sgpt/graph.hpp"
#include "sgpt/pretrain.hpp"
#include "sgpt/random.hpp"
#include "sgpt/tune_eval.hpp"

namespace sgpt {

enum class ValueType { string, path, integer, real, boolean, choice };

struct KeySpec {
  std::string name;
  ValueType type;
  std::optional<std::string> default_value;  // nullopt: no default
  std::vector<std::string> choices;          // for ValueType::choice
  std::string help;
};

inline const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema = {
      {"graph", ValueType::path, std::nullopt, {}, "signed edge list"},
      {"labels", ValueType::path, std::nullopt, {}, "node,class sidecar for node classification"},
      {"checkpoint", ValueType::path, std::nullopt, {}, "pre-trained checkpoint to load"},
      {"out", ValueType::string, std::nullopt, {}, "output file"},
      {"out_dir", ValueType::string, std::nullopt, {}, "output directory"},
      {"log", ValueType::string, std::nullopt, {}, "per-epoch CSV log"},
      {"expect_nodes", ValueType::integer, std::nullopt, {}, "expected node count"},
      {"expect_pos", ValueType::integer, std::nullopt, {}, "expected positive edge count"},
      {"expect_neg", ValueType::integer, std::nullopt, {}, "expected negative edge count"},
      {"d_in", ValueType::integer, "64", {}, "node feature width"},
      {"hidden", ValueType::string, "32,64,64", {}, "GCN layer widths after d_in"},
      {"feature_seed", ValueType::integer, "7", {}, "seed for Gaussian node features"},
      {"mask", ValueType::real, "0.15", {}, "fraction of links masked for pre-training"},
      {"per_edge", ValueType::integer, "1", {}, "triplets per masked link"},
      {"pretrain_epochs", ValueType::integer, "200", {}, "pre-training epochs"},
      {"pretrain_lr", ValueType::real, "0.001", {}, "pre-training learning rate"},
      {"pretrain_tau", ValueType::real, "0.1", {}, "pre-training similarity temperature"},
      {"pretrain_seed", ValueType::integer, "0", {}, "pre-training seed"},
      {"task", ValueType::choice, "lsp", {"lsp", "nc"}, "downstream task"},
      {"shots", ValueType::integer, "100", {}, "support size (LSP total, NC per class)"},
      {"shot_mode", ValueType::choice, "balanced", {"balanced", "per_class"}, "LSP shot counting"},
      {"epochs", ValueType::integer, "200", {}, "prompt-tuning epochs"},
      {"lr", ValueType::real, "0.001", {}, "prompt-tuning learning rate"},
      {"tau", ValueType::real, "0.1", {}, "similarity temperature"},
      {"hops", ValueType::integer, "2", {}, "hop count k"},
      {"basis", ValueType::integer, "3", {}, "feature-prompt basis count r"},
      {"dmid", ValueType::integer, "8", {}, "adapter bottleneck width"},
      {"tasks", ValueType::integer, "100", {}, "number of few-shot tasks"},
      {"seed", ValueType::integer, "0", {}, "task sampling seed"},
      {"init_seed", ValueType::integer, "1", {}, "prompt initialization seed"},
      {"channels", ValueType::choice, "full", {"full", "topo_only"}, "channels used downstream"},
      {"axis", ValueType::choice, "hops", {"hops", "basis"}, "sweep axis"},
      {"values", ValueType::string, "", {}, "sweep values, comma separated (default 1..4 / 1..10)"},
      {"generator", ValueType::choice, "communities", {"communities", "trust"}, "synthetic graph family"},
      {"nodes", ValueType::integer, "100", {}, "synthetic node count"},
      {"intra_pos", ValueType::real, "0.2", {}, "synthetic intra-community positive probability"},
      {"inter_neg", ValueType::real, "0.2", {}, "synthetic inter-community negative probability"},
      {"noise", ValueType::real, "0.05", {}, "synthetic sign flip probability"},
  };
  return schema;
}

inline const KeySpec* find_key(const std::string& name) {
  for (const auto& k : config_schema())
    if (k.name == name) return &k;
  return nullptr;
}

namespace detail {

inline void check_value(const KeySpec& k, const std::string& v) {
  auto fail = [&](const std::string& why) {
    throw ConfigError("config key '" + k.name + "': " + why + " (got '" + v + "')");
  };
  switch (k.type) {
    case ValueType::integer: {
      const auto x = parse_int(v);
      if (!x || *x < 0) fail("expected a non-negative integer");
      break;
    }
    case ValueType::real: {
      std::size_t pos = 0;
      double x = 0;
      try {
        x = std::stod(v, &pos);
      } catch (const std::exception&) {
        fail("expected a real number");
      }
      if (pos != v.size() || !std::isfinite(x)) fail("expected a real number");
      break;
    }
    case ValueType::boolean:
      if (v != "true" && v != "false") fail("expected true or false");
      break;
    case ValueType::choice:
      if (std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end()) fail("not an allowed value");
      break;
    case ValueType::path:
      if (!std::filesystem::exists(v)) fail("file does not exist");
      break;
    case ValueType::string:
      break;
  }
}

}  // namespace detail

// Fully resolved configuration: every schema key with a default or an explicit
// setting has a value. `explicit_keys` records what the user actually set.
struct RunConfig {
  std::map<std::string, std::string> values;
  std::set<std::string> explicit_keys;

  bool has(const std::string& k) const { return values.count(k) != 0; }
  const std::string& str(const std::string& k) const {
    auto it = values.find(k);
    if (it == values.end()) throw ConfigError("missing required key '" + k + "'");
    return it->second;
  }
  std::uint64_t integer(const std::string& k) const { return static_cast<std::uint64_t>(*detail::parse_int(str(k))); }
  std::size_t count(const std::string& k) const { return static_cast<std::size_t>(integer(k)); }
  double real(const std::string& k) const { return std::stod(str(k)); }

  GcnConfig gcn() const {
    GcnConfig g;
    g.layer_dims = {count("d_in")};
    for (std::size_t d : parse_dims(str("hidden"))) g.layer_dims.push_back(d);
    g.validate();
    return g;
  }

  PretrainConfig pretrain() const {
    PretrainConfig p;
    p.gcn = gcn();
    p.mask_fraction = real("mask");
    p.per_edge = count("per_edge");
    p.epochs = count("pretrain_epochs");
    p.lr = real("pretrain_lr");
    p.tau = real("pretrain_tau");
    p.seed = integer("pretrain_seed");
    p.validate();
    return p;
  }

  // True when the user pinned any setting that the checkpoint hash covers.
  bool pins_pretrain_config() const {
    for (const char* k : {"d_in", "hidden", "mask", "per_edge", "pretrain_epochs", "pretrain_lr",
                          "pretrain_tau", "pretrain_seed"})
      if (explicit_keys.count(k)) return true;
    return false;
  }

  TuneConfig tune() const {
    TuneConfig t;
    t.kind = str("task") == "nc" ? TaskKind::nc : TaskKind::lsp;
    t.shots = count("shots");
    t.shot_mode = str("shot_mode") == "per_class" ? ShotMode::per_class : ShotMode::balanced_total;
    t.epochs = count("epochs");
    t.lr = real("lr");
    t.tau = real("tau");
    t.hops = count("hops");
    t.bases = count("basis");
    t.d_mid = count("dmid");
    t.num_tasks = count("tasks");
    t.task_seed = integer("seed");
    t.init_seed = integer("init_seed");
    t.channel_mode = str("channels") == "topo_only" ? ChannelMode::topo_only : ChannelMode::full;
    t.validate();
    return t;
  }

  std::optional<GraphStats> expected_stats() const {
    const bool any = has("expect_nodes") || has("expect_pos") || has("expect_neg");
    if (!any) return std::nullopt;
    if (!(has("expect_nodes") && has("expect_pos") && has("expect_neg")))
      throw ConfigError("expect_nodes, expect_pos and expect_neg must be given together");
    return GraphStats{count("expect_nodes"), count("expect_pos"), count("expect_neg")};
  }

  void require(std::initializer_list<const char*> keys) const {
    for (const char* k : keys)
      if (!has(k)) throw ConfigError(std::string("missing required key '") + k + "'");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values) j[k] = v;
    j["tool_version"] = kToolVersion;
    return j;
  }
};

// Parses a flat `key = value` file. Blank lines and lines starting with '#'
// are ignored.
inline std::map<std::string, std::string> read_config_file(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError("config: expected key = value", line_no);
    const std::string key(detail::trim(s.substr(0, eq)));
    const std::string val(detail::trim(s.substr(eq + 1)));
    if (key.empty()) throw ParseError("config: empty key", line_no);
    if (!find_key(key)) throw ConfigError("config: unknown key '" + key + "' (line " + std::to_string(line_no) + ")");
    out[key] = val;
  }
  return out;
}

// Resolves defaults < file < flags and validates every value.
inline RunConfig parse_config(const std::map<std::string, std::string>& file_values,
                              const std::map<std::string, std::string>& flag_values) {
  RunConfig rc;
  for (const auto& k : config_schema())
    if (k.default_value) rc.values[k.name] = *k.default_value;
  for (const auto* layer : {&file_values, &flag_values})
    for (const auto& [k, v] : *layer) {
      const KeySpec* spec = find_key(k);
      if (!spec) throw ConfigError("unknown config key '" + k + "'");
      detail::check_value(*spec, v);
      rc.values[k] = v;
      rc.explicit_keys.insert(k);
    }
  return rc;
}

inline RunConfig parse_config(const std::optional<std::string>& path,
                              const std::map<std::string, std::string>& flag_values) {
  std::map<std::string, std::string> file_values;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config file '" + *path + "'");
    file_values = read_config_file(in);
  }
  return parse_config(file_values, flag_values);
}

// ---------------------------------------------------------------------------
// Logging: one `key=value` record per line on stderr.

class Logger {
 public:
  explicit Logger(std::ostream& os = std::cerr, bool enabled = true) : os_(&os), enabled_(enabled) {}

  template <class... KV>
  void operator()(const std::string& event, const KV&... kv) const {
    if (!enabled_) return;
    std::ostringstream line;
    line << std::setprecision(10) << "event=" << event;
    static_assert(sizeof...(kv) % 2 == 0, "key/value pairs");
    emit(line, kv...);
    *os_ << line.str() << '\n';
  }

 private:
  static void emit(std::ostringstream&) {}
  template <class K, class V, class... Rest>
  static void emit(std::ostringstream& line, const K& k, const V& v, const Rest&... rest) {
    line << ' ' << k << '=' << v;
    emit(line, rest...);
  }

  std::ostream* os_;
  bool enabled_;
};

// ---------------------------------------------------------------------------
// Synthetic graphs

struct SyntheticSpec {
  std::size_t num_nodes = 100;
  std::size_t num_communities = 2;
  double intra_pos_prob = 0.2;
  double inter_neg_prob = 0.2;
  double noise_flip_prob = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_communities != 2) throw ConfigError("synthetic: only 2 communities are supported");
    for (double p : {intra_pos_prob, inter_neg_prob, noise_flip_prob})
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synthetic: probabilities must lie in [0,1]");
  }
};

struct SyntheticGraph {
  SignedGraph graph;  // features empty (n x 0)
  NodeLabels labels;  // community id
};

// Community 0 holds nodes [0, ceil(n/2)), community 1 the rest. Edge presence
// and sign flips use separate streams, so changing the noise level never moves
// an edge.
inline SyntheticGraph generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.num_nodes;
  const std::size_t split = (n + 1) / 2;
  SyntheticGraph out;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = i < split ? 0 : 1;
  Rng edges(derive_seed(spec.seed, 0x65));
  Rng flips(derive_seed(spec.seed, 0x66));
  std::vector<SignedEdge> recs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same = out.labels[i] == out.labels[j];
      if (!edges.bernoulli(same ? spec.intra_pos_prob : spec.inter_neg_prob)) continue;
      int sign = same ? +1 : -1;
      if (flips.bernoulli(spec.noise_flip_prob)) sign = -sign;
      recs.push_back({Edge::make(Index(i), Index(j)), sign});
    }
  out.graph = make_signed_graph(n, recs);
  return out;
}

struct TrustSurrogateSpec {
  std::size_t num_nodes = 3783;
  std::size_t num_pos = 22650;
  std::size_t num_neg = 1536;
  double distrusted_fraction = 0.08;
  double noise = 0.05;  // share of negative links not touching a distrusted node
  std::uint64_t seed = 0;
};

// Stand-in for a trust network with Bitcoin-Alpha's size: heavy-tailed degrees
// and a planted set of distrusted nodes that attract most negative links.
// Produces exactly the requested edge counts.
inline SignedGraph generate_trust_surrogate(const TrustSurrogateSpec& spec) {
  const std::size_t n = spec.num_nodes;
  const std::size_t total_pairs = n * (n - 1) / 2;
  if (n < 3 || spec.num_pos + spec.num_neg > total_pairs / 4)
    throw PreconditionError("trust surrogate: edge counts too large for node count");
  Rng rng(derive_seed(spec.seed, 0x7472));
  // Zipf-like activity weights and their cumulative table.
  std::vector<double> cum(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += 1.0 / std::pow(static_cast<double>(i) + 10.0, 0.9);
    cum[i] = acc;
  }
  std::vector<Index> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = Index(i);
  rng.shuffle(perm);  // activity rank -> node id
  auto draw = [&] {
    const double u = rng.uniform01() * acc;
    const auto r = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    return perm[std::min(r, n - 1)];
  };
  std::vector<char> distrusted(n, 0);
  std::vector<Index> bad;
  const auto n_bad = std::max<std::size_t>(1, static_cast<std::size_t>(spec.distrusted_fraction * double(n)));
  while (bad.size() < n_bad) {
    const auto v = static_cast<Index>(rng.index(n));
    if (!distrusted[v]) {
      distrusted[v] = 1;
      bad.push_back(v);
    }
  }
  std::set<Edge> used;
  std::vector<SignedEdge> recs;
  std::size_t pos = 0, neg = 0;
  while (neg < spec.num_neg) {
    const Index u = draw();
    const Index v = rng.bernoulli(spec.noise) ? draw() : bad[rng.index(bad.size())];
    if (u == v || !used.insert(Edge::make(u, v)).second) continue;
    recs.push_back({Edge::make(u, v), -1});
    ++neg;
  }
  while (pos < spec.num_pos) {
    const Index u = draw(), v = draw();
    if (u == v || distrusted[u] || distrusted[v]) {
      if (!rng.bernoulli(spec.noise)) continue;
    }
    if (u == v || !used.insert(Edge::make(u, v)).second) continue;
    recs.push_back({Edge::make(u, v), +1});
    ++pos;
  }
  return make_signed_graph(n, recs);
}

inline void write_labels(std::ostream& os, const NodeLabels& labels) {
  for (std::size_t v = 0; v < labels.size(); ++v)
    if (labels[v] >= 0) os << v << ',' << labels[v] << '\n';
}

}  // namespace sgpt
