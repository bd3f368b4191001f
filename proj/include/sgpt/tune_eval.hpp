#pragma once

// Prompt tuning against a frozen encoder and the few-shot evaluation harness.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "sgpt/autodiff.hpp"
#include "sgpt/dense.hpp"
#include "sgpt/error.hpp"
#include "sgpt/gcn.hpp"
#include "sgpt/graph.hpp"
#include "sgpt/prompts.hpp"
#include "sgpt/random.hpp"
#include "sgpt/templates.hpp"

namespace sgpt {

struct TuneConfig {
  TaskKind kind = TaskKind::lsp;
  std::size_t shots = 100;
  ShotMode shot_mode = ShotMode::balanced_total;
  std::size_t epochs = 200;
  double lr = 1e-3;
  double tau = 0.1;
  std::size_t hops = 2;
  std::size_t bases = 3;
  std::size_t d_mid = 8;
  std::size_t num_tasks = 100;
  std::uint64_t task_seed = 0;
  std::uint64_t init_seed = 0;
  ChannelMode channel_mode = ChannelMode::full;

  void validate() const {
    if (shots == 0) throw ConfigError("tune: shots must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("tune: lr must be > 0");
    if (!(tau > 0.0)) throw ConfigError("tune: tau must be > 0");
    if (hops == 0) throw ConfigError("tune: hops must be >= 1");
    if (bases == 0) throw ConfigError("tune: basis count must be >= 1");
    if (d_mid == 0) throw ConfigError("tune: dmid must be >= 1");
  }

  PromptDims dims(const GcnConfig& gcn) const {
    return {.d_in = gcn.d_in(), .d_out = gcn.d_out(), .hops = hops, .bases = bases, .d_mid = d_mid};
  }

  nlohmann::json to_json() const {
    return {{"task", to_string(kind)},
            {"shots", shots},
            {"shot_mode", shot_mode == ShotMode::per_class ? "per_class" : "balanced"},
            {"epochs", epochs},
            {"lr", lr},
            {"tau", tau},
            {"hops", hops},
            {"basis", bases},
            {"dmid", d_mid},
            {"tasks", num_tasks},
            {"seed", task_seed},
            {"init_seed", init_seed},
            {"channels", channel_mode == ChannelMode::full ? "full" : "topo_only"}};
  }
};

// Labeled items of one task: nodes (NC) or node pairs (LSP, smaller id first).
struct LabeledItems {
  std::vector<Index> first;
  std::vector<Index> second;  // empty for NC
  std::vector<int> labels;    // class index; LSP: 0 = positive, 1 = negative

  std::size_t size() const noexcept { return labels.size(); }
};

struct TaskInstance {
  TaskKind kind = TaskKind::lsp;
  std::size_t num_classes = 2;
  LabeledItems support;
  LabeledItems test;
};

inline LabeledItems to_items(std::span<const LabeledPair> pairs) {
  LabeledItems it;
  for (const auto& p : pairs) {
    it.first.push_back(p.pair.u);
    it.second.push_back(p.pair.v);
    it.labels.push_back(lsp_class_index(p.sign));
  }
  return it;
}

inline LabeledItems to_items(std::span<const std::pair<Index, int>> nodes) {
  LabeledItems it;
  for (const auto& [v, c] : nodes) {
    it.first.push_back(v);
    it.labels.push_back(c);
  }
  return it;
}

inline TaskInstance make_task(const LspSplit& s) {
  return {TaskKind::lsp, 2, to_items(s.support), to_items(s.test)};
}

inline TaskInstance make_task(const NcTask& t) {
  return {TaskKind::nc, t.num_classes, to_items(t.support), to_items(t.test)};
}

// Rows of E for NC items, [E_u | E_v] rows for LSP items.
inline ad::Var item_embeddings(ad::Tape& tape, ad::Var e, const LabeledItems& items) {
  const ad::Var a = tape.gather_rows(e, items.first);
  if (items.second.empty()) return a;
  const ad::Var parts[] = {a, tape.gather_rows(e, items.second)};
  return tape.concat_cols(parts);
}

inline Matrix item_embeddings(const Matrix& e, const LabeledItems& items) {
  ad::Tape tape;
  return tape.value(item_embeddings(tape, tape.constant_ref(e), items));
}

inline ad::Var downstream_loss(ad::Tape& tape, ad::Var items, ad::Var prototypes,
                               std::span<const int> labels, double tau) {
  if (labels.empty()) throw PreconditionError("downstream_loss: empty labeled set");
  return tape.softmax_cross_entropy(tape.scale(tape.cosine_matrix(items, prototypes), 1.0 / tau), labels);
}

// Everything shared read-only by the tasks of one evaluation.
struct DownstreamContext {
  std::vector<ad::Parameter> backbone;  // frozen copies of the checkpoint weights
  PreparedChannels channels;
  Matrix features;

  DownstreamContext(const Checkpoint& ck, const ChannelSet& cs, Matrix x)
      : channels(prepare_channels(cs)), features(std::move(x)) {
    for (std::size_t l = 0; l < ck.weights.size(); ++l)
      backbone.emplace_back("gcn.W" + std::to_string(l), ck.weights[l], false);
    if (features.rows() != channels.num_nodes || features.cols() != ck.config.d_in())
      throw ShapeError("downstream: features are " + shape_str(features) + ", expected " +
                       std::to_string(channels.num_nodes) + "x" + std::to_string(ck.config.d_in()));
  }

  std::vector<ad::Var> bind_backbone(ad::Tape& tape) {
    std::vector<ad::Var> out;
    for (auto& w : backbone) out.push_back(tape.param(w));
    return out;
  }

  ad::Var embed(ad::Tape& tape, const PromptVars& pv, ChannelMode mode) {
    const auto ws = bind_backbone(tape);
    return prompted_embeddings(tape, ws, channels, tape.constant_ref(features), pv, mode);
  }
};

struct TuneResult {
  PromptState state;
  std::vector<double> losses;  // per epoch, before that epoch's update
  double final_loss = 0.0;     // after the last update
  Matrix embeddings;           // E under the final state
};

inline TuneResult tune(DownstreamContext& ctx, const TaskInstance& task, const TuneConfig& cfg,
                       std::uint64_t init_seed,
                       const std::function<void(std::size_t, double)>& on_epoch = {}) {
  cfg.validate();
  if (task.support.size() == 0) throw PreconditionError("tune: empty support set");
  if (ctx.channels.k != cfg.hops)
    throw PreconditionError("tune: channels built with k=" + std::to_string(ctx.channels.k) +
                            " but config has hops=" + std::to_string(cfg.hops));
  TuneResult res;
  const GcnConfig gcn{[&] {
    std::vector<std::size_t> d{ctx.backbone.front().value.rows()};
    for (const auto& w : ctx.backbone) d.push_back(w.value.cols());
    return d;
  }()};
  res.state = init_prompt_state(cfg.dims(gcn), init_seed, task.kind);
  PromptState& st = res.state;

  {  // prototypes from step-0 support embeddings
    ad::Tape tape;
    const PromptVars pv = bind(tape, st);
    const Matrix& sup = tape.value(item_embeddings(tape, ctx.embed(tape, pv, cfg.channel_mode), task.support));
    st.prototypes.value =
        init_prototypes(task.kind, sup, task.support.labels, task.num_classes).embeddings;
    st.prototypes.zero_grad();
  }

  ad::Adam opt(st.parameters(), {.lr = cfg.lr});
  auto forward = [&](ad::Tape& tape, ad::Var* e_out) {
    const PromptVars pv = bind(tape, st);
    const ad::Var e = ctx.embed(tape, pv, cfg.channel_mode);
    if (e_out) *e_out = e;
    return downstream_loss(tape, item_embeddings(tape, e, task.support), pv.prototypes,
                           task.support.labels, cfg.tau);
  };
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    const ad::Var loss = forward(tape, nullptr);
    const double v = tape.scalar(loss);
    if (!std::isfinite(v))
      throw NumericError("tune: non-finite loss at epoch " + std::to_string(epoch));
    res.losses.push_back(v);
    if (on_epoch) on_epoch(epoch, v);
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
  }
  ad::Tape tape;
  ad::Var e;
  res.final_loss = tape.scalar(forward(tape, &e));
  res.embeddings = tape.value(e);
  return res;
}

// ---------------------------------------------------------------------------
// ROC-AUC

// Mann-Whitney AUC with ties worth one half. Counting is done in integers
// (twice the U statistic) so the result is exact up to the final division.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (double s : scores)
    if (std::isnan(s)) throw NumericError("auc: NaN score");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::uint64_t n_pos = 0, n_neg = 0, twice_u = 0, neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? pos : neg) += 1;
      ++j;
    }
    twice_u += pos * (2 * neg_below + neg);
    neg_below += neg;
    n_pos += pos;
    n_neg += neg;
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) throw PreconditionError("auc: both classes must be present");
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Prototype-logit gap Sim(e, proto_pos) - Sim(e, proto_neg). The positive
// class is P for LSP and class 1 for NC.
inline std::vector<double> binary_scores(const Matrix& item_emb, const Matrix& prototypes, TaskKind kind,
                                         double tau) {
  if (prototypes.rows() != 2) throw PreconditionError("binary_scores: exactly two classes supported");
  const std::size_t pos = kind == TaskKind::lsp ? 0 : 1;
  std::vector<double> out;
  for (std::size_t i = 0; i < item_emb.rows(); ++i) {
    const auto pr = predict(prototypes, item_emb.row(i), tau);
    out.push_back(pr.scores[pos] - pr.scores[1 - pos]);
  }
  return out;
}

inline std::vector<int> positive_indicator(const LabeledItems& items, TaskKind kind) {
  std::vector<int> out;
  for (int c : items.labels) out.push_back(kind == TaskKind::lsp ? (c == 0) : (c == 1));
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation harness

struct EvalReport {
  std::vector<double> per_task;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over tasks
  double runtime_seconds = 0.0;
  double construct_seconds = 0.0;
  nlohmann::json config;

  nlohmann::json to_json() const {
    return {{"mean", mean},
            {"std", std},
            {"per_task", per_task},
            {"runtime_seconds", runtime_seconds},
            {"construct_seconds", construct_seconds},
            {"config", config}};
  }
};

inline std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  double s = 0.0;
  for (double x : xs) s += x;
  const double m = s / static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

struct EvalInputs {
  const SignedGraph* graph = nullptr;  // features must be set
  const Checkpoint* checkpoint = nullptr;
  const NodeLabels* labels = nullptr;  // required for NC
};

// Builds the template once, then tunes and scores each task in order. The
// per-task callback receives (task index, auc).
inline EvalReport run_eval(const EvalInputs& in, const TuneConfig& cfg,
                           const std::function<void(std::size_t, double)>& on_task = {}) {
  cfg.validate();
  if (!in.graph || !in.checkpoint) throw PreconditionError("run_eval: graph and checkpoint are required");
  const SignedGraph& g = *in.graph;
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();

  std::vector<TaskInstance> tasks;
  std::optional<SignedGraph> mp_graph;
  if (cfg.kind == TaskKind::lsp) {
    if (g.pos_edges.empty() || g.neg_edges.empty())
      throw PreconditionError("run_eval: link sign prediction needs both edge signs");
    auto [mp, pool] = partition_message_passing(g, cfg.task_seed);
    for (std::size_t t = 0; t < cfg.num_tasks; ++t)
      tasks.push_back(make_task(make_lsp_task(mp, pool, cfg.shots, derive_seed(cfg.task_seed, t), cfg.shot_mode)));
    mp_graph = subgraph_with_edges(g, mp);
  } else {
    if (!in.labels) throw PreconditionError("run_eval: node classification needs labels");
    if (count_classes(*in.labels) != 2)
      throw PreconditionError("run_eval: node classification supports exactly 2 classes");
    for (const NcTask& t : sample_nc_tasks(g, *in.labels, cfg.shots, cfg.num_tasks, cfg.task_seed))
      tasks.push_back(make_task(t));
  }

  const auto tc = clock::now();
  const ChannelSet cs = build_channels(mp_graph ? *mp_graph : g, cfg.hops);
  EvalReport rep;
  rep.construct_seconds = std::chrono::duration<double>(clock::now() - tc).count();
  DownstreamContext ctx(*in.checkpoint, cs, g.features);

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const TaskInstance& task = tasks[t];
    const TuneResult tr = tune(ctx, task, cfg, derive_seed(cfg.init_seed, t));
    const Matrix q = item_embeddings(tr.embeddings, task.test);
    const double a = auc(binary_scores(q, tr.state.prototypes.value, task.kind, cfg.tau),
                         positive_indicator(task.test, task.kind));
    rep.per_task.push_back(a);
    if (on_task) on_task(t, a);
  }
  std::tie(rep.mean, rep.std) = mean_std(rep.per_task);
  rep.runtime_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  rep.config = cfg.to_json();
  rep.config["checkpoint_hash"] = in.checkpoint->config_hash;
  rep.config["tool_version"] = in.checkpoint->tool_version;
  return rep;
}

enum class SweepAxis { hops, basis };

struct SweepRow {
  std::size_t axis_value = 0;
  double mean_auc = 0.0;
  double std = 0.0;
  double construct_seconds = 0.0;
};

// One evaluation per axis value. construct_seconds is the template build time
// for that row's hop count.
inline std::vector<SweepRow> sweep(const EvalInputs& in, const TuneConfig& base, SweepAxis axis,
                                   std::span<const std::size_t> values,
                                   const std::function<void(const SweepRow&)>& on_row = {}) {
  std::vector<SweepRow> rows;
  for (std::size_t v : values) {
    TuneConfig cfg = base;
    (axis == SweepAxis::hops ? cfg.hops : cfg.bases) = v;
    const EvalReport r = run_eval(in, cfg);
    rows.push_back({v, r.mean, r.std, r.construct_seconds});
    if (on_row) on_row(rows.back());
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
  os << "axis_value,mean_auc,std,construct_seconds\n" << std::setprecision(17);
  for (const auto& r : rows)
    os << r.axis_value << ',' << r.mean_auc << ',' << r.std << ',' << r.construct_seconds << '\n';
}

}  // namespace sgpt
