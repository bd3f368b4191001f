// Command-line front end: sgpt {pretrain,template,tune,eval,sweep,synth}.
//
// Every subcommand accepts --config FILE plus one flag per config key. Keys
// with underscores also accept dashes (--out-dir, --init-seed). Under
// `pretrain`, --epochs/--lr/--tau/--seed set the pretrain_* keys.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "sgpt/sgpt.hpp"

using namespace sgpt;
namespace fs = std::filesystem;

namespace {

struct Command {
  CLI::App* app = nullptr;
  std::string config_path;
  std::map<std::string, std::string> flags;
};

std::string dashed(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

void add_key_flags(Command& cmd, bool pretrain_aliases) {
  cmd.app->add_option("--config", cmd.config_path, "key = value config file");
  for (const KeySpec& k : config_schema()) {
    std::string key = k.name;
    std::string names = "--" + k.name;
    if (pretrain_aliases && (k.name == "epochs" || k.name == "lr" || k.name == "tau" || k.name == "seed")) continue;
    if (pretrain_aliases && k.name.rfind("pretrain_", 0) == 0) names += ",--" + k.name.substr(9);
    if (dashed(k.name) != k.name) names += ",--" + dashed(k.name);
    std::string help = k.help;
    if (k.default_value) help += " [" + *k.default_value + "]";
    cmd.app->add_option_function<std::string>(
        names, [&cmd, key](const std::string& v) { cmd.flags[key] = v; }, help);
  }
}

std::ostream& open_out(const RunConfig& rc, std::ofstream& file) {
  if (!rc.has("out")) return std::cout;
  file.open(rc.str("out"));
  if (!file) throw Error("cannot write '" + rc.str("out") + "'");
  return file;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path + "'");
  f << j.dump(2) << '\n';
}

// CSV outputs carry their resolved config in a sidecar next to them.
void write_config_sidecar(const std::string& csv_path, const RunConfig& rc) {
  write_json(csv_path + ".config.json", rc.to_json());
}

SignedGraph load_graph(const RunConfig& rc, const Logger& log) {
  rc.require({"graph"});
  SignedGraph g = load_signed_graph(rc.str("graph"), rc.expected_stats());
  log("graph_loaded", "nodes", g.num_nodes, "pos", g.pos_edges.size(), "neg", g.neg_edges.size());
  return init_features(std::move(g), rc.count("d_in"), rc.integer("feature_seed"));
}

Checkpoint load_ck(const RunConfig& rc) {
  rc.require({"checkpoint"});
  std::optional<std::string> want;
  if (rc.pins_pretrain_config()) want = rc.pretrain().hash();
  return load_checkpoint(rc.str("checkpoint"), want);
}

int cmd_pretrain(const RunConfig& rc, const Logger& log) {
  rc.require({"graph", "out"});
  const SignedGraph g = load_graph(rc, log);
  const PretrainConfig pc = rc.pretrain();
  const PretrainResult res = run_pretrain(unsigned_view(g), g.features, pc, [&](std::size_t e, double l) {
    log("pretrain_epoch", "epoch", e, "loss", l);
  });
  save_checkpoint(rc.str("out"), res.checkpoint);
  write_json(rc.str("out") + ".config.json", rc.to_json());
  if (rc.has("log")) {
    std::ofstream f(rc.str("log"));
    write_loss_csv(f, res.losses);
    write_config_sidecar(rc.str("log"), rc);
  }
  log("pretrain_done", "hash", res.checkpoint.config_hash, "out", rc.str("out"));
  return 0;
}

int cmd_template(const RunConfig& rc, const Logger& log) {
  rc.require({"graph", "out_dir"});
  const SignedGraph g = load_graph(rc, log);
  std::vector<HopTiming> timings;
  const ChannelSet cs = build_channels(g, rc.count("hops"), &timings);
  const fs::path dir = rc.str("out_dir");
  fs::create_directories(dir);
  for (std::size_t h = 0; h < cs.k; ++h) {
    std::ofstream p(dir / ("pos_hop" + std::to_string(h + 1) + ".txt"));
    write_triplets(p, cs.pos[h]);
    std::ofstream n(dir / ("neg_hop" + std::to_string(h + 1) + ".txt"));
    write_triplets(n, cs.neg[h]);
  }
  std::ofstream t(dir / "topo.txt");
  write_triplets(t, cs.topo);
  std::ofstream csv(dir / "timing.csv");
  csv << "hop,seconds,nnz\n" << std::setprecision(17);
  for (const auto& ht : timings) {
    csv << ht.hop << ',' << ht.seconds << ',' << ht.nnz << '\n';
    log("template_hop", "hop", ht.hop, "seconds", ht.seconds, "nnz", ht.nnz);
  }
  write_json((dir / "config.json").string(), rc.to_json());
  return 0;
}

int cmd_tune(const RunConfig& rc, const Logger& log) {
  rc.require({"graph", "checkpoint", "out"});
  const SignedGraph g = load_graph(rc, log);
  const Checkpoint ck = load_ck(rc);
  const TuneConfig cfg = rc.tune();
  TaskInstance task;
  SignedGraph structure = g;
  if (cfg.kind == TaskKind::lsp) {
    const LspSplit split = make_lsp_split(g, cfg.shots, cfg.task_seed, cfg.shot_mode);
    structure = subgraph_with_edges(g, split.mp_edges);
    task = make_task(split);
  } else {
    rc.require({"labels"});
    const NodeLabels labels = load_labels(rc.str("labels"), g.num_nodes);
    task = make_task(sample_nc_tasks(g, labels, cfg.shots, 1, cfg.task_seed).front());
  }
  DownstreamContext ctx(ck, build_channels(structure, cfg.hops), g.features);
  const TuneResult r = tune(ctx, task, cfg, cfg.init_seed, [&](std::size_t e, double l) {
    log("tune_epoch", "epoch", e, "loss", l);
  });
  const Matrix q = item_embeddings(r.embeddings, task.test);
  const double test_auc = auc(binary_scores(q, r.state.prototypes.value, task.kind, cfg.tau),
                              positive_indicator(task.test, task.kind));
  nlohmann::json meta = rc.to_json();
  meta["checkpoint_hash"] = ck.config_hash;
  save_prompt_state(rc.str("out"), r.state, {{"config", meta.dump()}});
  if (rc.has("log")) {
    std::ofstream f(rc.str("log"));
    write_loss_csv(f, r.losses);
    write_config_sidecar(rc.str("log"), rc);
  }
  log("tune_done", "final_loss", r.final_loss, "test_auc", test_auc);
  std::cout << nlohmann::json{{"final_loss", r.final_loss}, {"test_auc", test_auc}, {"config", meta}}.dump(2)
            << '\n';
  return 0;
}

EvalInputs eval_inputs(const RunConfig& rc, const SignedGraph& g, const Checkpoint& ck,
                       std::optional<NodeLabels>& labels) {
  if (rc.str("task") == "nc") {
    rc.require({"labels"});
    labels = load_labels(rc.str("labels"), g.num_nodes);
  }
  return {&g, &ck, labels ? &*labels : nullptr};
}

int cmd_eval(const RunConfig& rc, const Logger& log) {
  const SignedGraph g = load_graph(rc, log);
  const Checkpoint ck = load_ck(rc);
  std::optional<NodeLabels> labels;
  const EvalReport rep = run_eval(eval_inputs(rc, g, ck, labels), rc.tune(), [&](std::size_t t, double a) {
    log("task_done", "task", t, "auc", a);
  });
  nlohmann::json j = rep.to_json();
  j["config"]["resolved"] = rc.to_json();
  std::ofstream f;
  open_out(rc, f) << j.dump(2) << '\n';
  log("eval_done", "mean", rep.mean, "std", rep.std, "seconds", rep.runtime_seconds);
  return 0;
}

int cmd_sweep(const RunConfig& rc, const Logger& log) {
  const SignedGraph g = load_graph(rc, log);
  const Checkpoint ck = load_ck(rc);
  std::optional<NodeLabels> labels;
  const SweepAxis axis = rc.str("axis") == "basis" ? SweepAxis::basis : SweepAxis::hops;
  std::vector<std::size_t> values;
  if (rc.str("values").empty()) {
    for (std::size_t v = 1; v <= (axis == SweepAxis::hops ? 4u : 10u); ++v) values.push_back(v);
  } else {
    values = parse_dims(rc.str("values"));
  }
  const auto rows = sweep(eval_inputs(rc, g, ck, labels), rc.tune(), axis, values, [&](const SweepRow& r) {
    log("sweep_row", "value", r.axis_value, "mean_auc", r.mean_auc, "construct_seconds", r.construct_seconds);
  });
  std::ofstream f;
  write_sweep_csv(open_out(rc, f), rows);
  if (rc.has("out")) write_config_sidecar(rc.str("out"), rc);
  return 0;
}

int cmd_synth(const RunConfig& rc, const Logger& log) {
  rc.require({"out"});
  SignedGraph g;
  std::optional<NodeLabels> labels;
  if (rc.str("generator") == "trust") {
    TrustSurrogateSpec spec;
    spec.seed = rc.integer("seed");
    g = generate_trust_surrogate(spec);
  } else {
    SyntheticSpec spec;
    spec.num_nodes = rc.count("nodes");
    spec.intra_pos_prob = rc.real("intra_pos");
    spec.inter_neg_prob = rc.real("inter_neg");
    spec.noise_flip_prob = rc.real("noise");
    spec.seed = rc.integer("seed");
    auto sg = generate_synthetic(spec);
    g = std::move(sg.graph);
    labels = std::move(sg.labels);
  }
  const std::string header = "# config: " + rc.to_json().dump() + "\n";
  {
    std::ofstream f(rc.str("out"));
    if (!f) throw Error("cannot write '" + rc.str("out") + "'");
    f << header;
    write_signed_graph(f, g);
  }
  if (labels) {
    std::ofstream f(rc.str("out") + ".labels");
    f << header;
    write_labels(f, *labels);
  }
  log("synth_done", "nodes", g.num_nodes, "pos", g.pos_edges.size(), "neg", g.neg_edges.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signed graph prompt tuning"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress log records");
  app.set_version_flag("--version", std::string(kToolVersion));

  using Handler = int (*)(const RunConfig&, const Logger&);
  const std::vector<std::tuple<const char*, const char*, Handler>> table = {
      {"pretrain", "pre-train the GCN backbone by link prediction", cmd_pretrain},
      {"template", "build and dump the balance channels", cmd_template},
      {"tune", "tune prompts on one few-shot task", cmd_tune},
      {"eval", "tune and score a series of few-shot tasks", cmd_eval},
      {"sweep", "evaluate across hop or basis counts", cmd_sweep},
      {"synth", "generate a synthetic signed graph", cmd_synth},
  };
  std::vector<Command> cmds(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    cmds[i].app = app.add_subcommand(std::get<0>(table[i]), std::get<1>(table[i]));
    add_key_flags(cmds[i], std::string(std::get<0>(table[i])) == "pretrain");
  }
  CLI11_PARSE(app, argc, argv);

  const Logger log(std::cerr, !quiet);
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!cmds[i].app->parsed()) continue;
    try {
      std::optional<std::string> path;
      if (!cmds[i].config_path.empty()) path = cmds[i].config_path;
      const RunConfig rc = parse_config(path, cmds[i].flags);
      return std::get<2>(table[i])(rc, log);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}
