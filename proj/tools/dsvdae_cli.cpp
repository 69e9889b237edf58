// dsvdae command-line front end: train, eval, sweep-beta, ablate, synth, embed.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "dsvdae/dsvdae.hpp"

namespace fs = std::filesystem;
using namespace dsvdae;
using Json = nlohmann::ordered_json;

namespace {

// bad flags, bad config or bad input data: exit code 2
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string data;
  std::string out;
  std::string config;
  std::string normal_class;
  std::uint64_t seed = 0;
  std::string seeds;
  double beta = 0, mu_s = 0, mu_a = 0, lr = 0, lambda = 0;
  std::size_t epochs = 0, embed_dim = 0, hidden = 0, checkpoint_every = 0;
  std::string variant, weighting, graph_mode, structure_loss;
  bool self_loops = true, stratify = false, select_best = false;
  std::size_t jobs = 1;
  // sweep-beta / ablate / eval / embed
  std::string grid, variants;
  std::vector<std::string> checkpoints;
  std::string runs;
  // synth
  PlantedConfig planted;

  // the same flag exists on several subcommands; only the parsed one has a count
  std::multimap<std::string, const CLI::Option*> given;
  bool has(const std::string& flag) const {
    const auto [lo, hi] = given.equal_range(flag);
    return std::any_of(lo, hi, [](const auto& e) { return e.second->count() > 0; });
  }
};

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::istringstream is(tok);
    T v{};
    if (!(is >> v) || !is.eof()) throw UsageError(std::string("bad ") + what + " entry '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

// ---------------------------------------------------------------- config resolution

void apply(ExperimentConfig& c, const Json& j, const std::string& origin) {
  if (!j.is_object()) throw UsageError(origin + ": expected a JSON object");
  std::size_t dim = c.train.model.embed_dim;
  std::size_t hidden = c.train.model.structure_layers.front();
  bool reshape = false;
  for (const auto& [k, v] : j.items()) {
    try {
      if (k == "epochs") c.train.epochs = v.get<std::size_t>();
      else if (k == "lr") c.train.adam.learning_rate = v.get<double>();
      else if (k == "beta") c.train.beta = c.scoring.beta = v.get<double>();
      else if (k == "mu_s") c.train.mu_s = v.get<double>();
      else if (k == "mu_a") c.train.mu_a = v.get<double>();
      else if (k == "variant") c.train.model.variant = parse_variant(v.get<std::string>());
      else if (k == "weighting") c.scoring.weighting = parse_weighting(v.get<std::string>());
      else if (k == "lambda") c.scoring.lambda = v.get<double>();
      else if (k == "self_loops") c.train.model.self_loops = v.get<bool>();
      else if (k == "graph_mode") c.train.graph_mode = parse_graph_mode(v.get<std::string>());
      else if (k == "structure_loss") c.train.structure_loss = parse_structure_loss(v.get<std::string>());
      else if (k == "sampled_negatives") c.train.sampled_negatives = v.get<std::size_t>();
      else if (k == "checkpoint_every") c.train.checkpoint_every = v.get<std::size_t>();
      else if (k == "select_best_validation") c.train.select_best_validation = v.get<bool>();
      else if (k == "validation_every") c.train.validation_every = v.get<std::size_t>();
      else if (k == "stratify") c.stratify = v.get<bool>();
      else if (k == "output_activation") c.train.model.output_activation = parse_activation(v.get<std::string>());
      else if (k == "embed_dim") dim = v.get<std::size_t>(), reshape = true;
      else if (k == "hidden") hidden = v.get<std::size_t>(), reshape = true;
      else if (k == "seeds" || k == "normal_class") continue;  // run selection, handled by the caller
      else throw UsageError(origin + ": unknown key '" + k + "'");
    } catch (const Json::exception& e) {
      throw UsageError(origin + ": key '" + k + "': " + e.what());
    }
  }
  if (reshape) {
    ModelConfig m = ModelConfig::standard(c.train.model.n_attrs, dim, hidden);
    m.hidden_activation = c.train.model.hidden_activation;
    m.output_activation = c.train.model.output_activation;
    m.self_loops = c.train.model.self_loops;
    m.variant = c.train.model.variant;
    c.train.model = m;
  }
}

Json flag_overrides(const Options& o) {
  Json j = Json::object();
  if (o.has("--epochs")) j["epochs"] = o.epochs;
  if (o.has("--lr")) j["lr"] = o.lr;
  if (o.has("--beta")) j["beta"] = o.beta;
  if (o.has("--mu-s")) j["mu_s"] = o.mu_s;
  if (o.has("--mu-a")) j["mu_a"] = o.mu_a;
  if (o.has("--variant")) j["variant"] = o.variant;
  if (o.has("--weighting")) j["weighting"] = o.weighting;
  if (o.has("--lambda")) j["lambda"] = o.lambda;
  if (o.has("--self-loops")) j["self_loops"] = o.self_loops;
  if (o.has("--graph-mode")) j["graph_mode"] = o.graph_mode;
  if (o.has("--structure-loss")) j["structure_loss"] = o.structure_loss;
  if (o.has("--embed-dim")) j["embed_dim"] = o.embed_dim;
  if (o.has("--hidden")) j["hidden"] = o.hidden;
  if (o.has("--checkpoint-every")) j["checkpoint_every"] = o.checkpoint_every;
  if (o.has("--select-best")) j["select_best_validation"] = o.select_best;
  if (o.has("--stratify")) j["stratify"] = o.stratify;
  return j;
}

Json read_config_file(const Options& o) {
  if (o.config.empty()) return Json::object();
  try {
    return Json::parse(detail::read_file(o.config));
  } catch (const Json::exception& e) {
    throw UsageError("config " + o.config + ": " + e.what());
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

/// defaults < config file < flags
ExperimentConfig resolve(const Options& o, const DatasetBundle& bundle) {
  ExperimentConfig c = default_config(bundle);
  apply(c, read_config_file(o), "config " + o.config);
  apply(c, flag_overrides(o), "flags");
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return c;
}

std::vector<std::uint64_t> resolve_seeds(const Options& o) {
  if (o.has("--seed") && o.has("--seeds")) throw UsageError("give either --seed or --seeds, not both");
  if (o.has("--seeds")) return parse_list<std::uint64_t>(o.seeds, "--seeds");
  if (o.has("--seed")) return {o.seed};
  const Json file = read_config_file(o);
  if (file.contains("seeds")) return file["seeds"].get<std::vector<std::uint64_t>>();
  return {0};
}

std::vector<int> resolve_classes(const Options& o, const DatasetBundle& bundle) {
  std::string text = o.normal_class;
  if (!o.has("--normal-class")) {
    const Json file = read_config_file(o);
    text = file.contains("normal_class") ? (file["normal_class"].is_string() ? file["normal_class"].get<std::string>()
                                                                             : file["normal_class"].dump())
                                         : "0";
  }
  const int n_classes = static_cast<int>(bundle.class_names.size());
  std::vector<int> classes;
  if (text == "all") {
    for (int c = 0; c < n_classes; ++c) classes.push_back(c);
  } else {
    classes = parse_list<int>(text, "--normal-class");
  }
  for (int c : classes) {
    if (c < 0 || c >= n_classes) {
      throw UsageError("normal class " + std::to_string(c) + " out of range [0," + std::to_string(n_classes) + ")");
    }
  }
  return classes;
}

DatasetBundle load(const std::string& dir) {
  if (dir.empty()) throw UsageError("--data is required");
  try {
    return load_dataset(dir);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

fs::path require_out(const Options& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  return o.out;
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 1; i < argc; ++i) s += (i > 1 ? " " : "") + std::string(argv[i]);
  return s;
}

void write_manifest(const fs::path& out, const ExperimentConfig& c, const DatasetBundle& b,
                    const std::vector<int>& classes, const std::vector<std::uint64_t>& seeds, const std::string& cmd) {
  RunManifest m;
  m.config = c;
  m.dataset_checksum = combined_checksum(b.provenance);
  m.dataset_name = b.name;
  m.normal_classes = classes;
  m.seeds = seeds;
  m.command = cmd;
  m.out_dir = out;
  fs::create_directories(out);
  detail::write_file(out / "manifest.json", manifest_json(m).dump(2) + "\n");
}

fs::path run_dir(const fs::path& out, int cls, std::uint64_t seed) {
  return out / ("class" + std::to_string(cls)) / ("seed" + std::to_string(seed));
}

Json metrics_file(const RunMetrics& m, const std::string& manifest) {
  Json j = metrics_json(m);
  j["manifest"] = manifest;
  return j;
}

// ---------------------------------------------------------------- summaries

struct Row {
  std::string group;  // variant or beta label
  RunMetrics m;
};

/// Per (group, class) mean and sample std over seeds, plus a class-averaged row
/// per group (classes averaged per seed first).
std::string summary_csv(const std::vector<Row>& rows) {
  std::vector<std::string> groups;
  std::map<std::string, std::map<int, std::vector<const RunMetrics*>>> by;
  for (const auto& r : rows) {
    if (!by.count(r.group)) groups.push_back(r.group);
    by[r.group][r.m.normal_class].push_back(&r.m);
  }
  std::string out = "group,normal_class,n,auc_mean,auc_std,ap_mean,ap_std\n";
  const auto line = [&](const std::string& g, const std::string& cls, const std::vector<double>& auc,
                        const std::vector<double>& ap) {
    const Aggregate a = aggregate(auc), p = aggregate(ap);
    out += g + "," + cls + "," + std::to_string(a.n) + "," + format_double(a.mean) + "," + format_double(a.std) + "," +
           format_double(p.mean) + "," + format_double(p.std) + "\n";
  };
  for (const auto& g : groups) {
    std::map<std::uint64_t, std::pair<std::vector<double>, std::vector<double>>> per_seed;
    for (const auto& [cls, ms] : by[g]) {
      std::vector<double> auc, ap;
      for (const RunMetrics* m : ms) {
        auc.push_back(m->auc);
        ap.push_back(m->ap);
        per_seed[m->seed].first.push_back(m->auc);
        per_seed[m->seed].second.push_back(m->ap);
      }
      line(g, std::to_string(cls), auc, ap);
    }
    if (by[g].size() > 1) {
      std::vector<double> auc, ap;
      for (const auto& [seed, v] : per_seed) {
        auc.push_back(aggregate(v.first).mean);
        ap.push_back(aggregate(v.second).mean);
      }
      line(g, "all", auc, ap);
    }
  }
  return out;
}

std::mutex report_mutex;

void report(const RunMetrics& m, const std::string& extra = "") {
  const std::lock_guard lock(report_mutex);
  std::cout << m.dataset << " class " << m.normal_class << " seed " << m.seed << extra << ": AUC "
            << format_double(m.auc) << " AP " << format_double(m.ap) << "\n";
}

struct Task {
  ExperimentConfig cfg;
  std::string group;
  int cls;
  std::uint64_t seed;
};

// rows come back in task order whatever the job count
std::vector<Row> run_tasks(const DatasetBundle& bundle, const std::vector<Task>& tasks, std::size_t jobs,
                           const std::string& label) {
  std::vector<Row> rows(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    rows[i] = {t.group, run_single(bundle, t.cls, t.seed, t.cfg).metrics};
    report(rows[i].m, label + t.group);
  });
  return rows;
}

// ---------------------------------------------------------------- commands

int cmd_train(const Options& o, const std::string& cmd) {
  const DatasetBundle bundle = load(o.data);
  const ExperimentConfig cfg = resolve(o, bundle);
  const auto seeds = resolve_seeds(o);
  const auto classes = resolve_classes(o, bundle);
  const fs::path out = require_out(o);
  write_manifest(out, cfg, bundle, classes, seeds, cmd);

  std::vector<std::pair<int, std::uint64_t>> tasks;
  for (int cls : classes) {
    for (std::uint64_t seed : seeds) tasks.emplace_back(cls, seed);
  }
  std::vector<RunMetrics> results(tasks.size());
  parallel_for(tasks.size(), o.jobs, [&](std::size_t i) {
    const auto [cls, seed] = tasks[i];
    const fs::path dir = run_dir(out, cls, seed);
    fs::create_directories(dir);
    TrainHooks hooks;
    Checkpoint ck;
    ck.normal_class = cls;
    ck.dataset_checksum = combined_checksum(bundle.provenance);
    hooks.on_checkpoint = [&](const TrainedModel& m) {
      Checkpoint snap = ck;
      snap.model = m;
      save_checkpoint(snap, dir / ("checkpoint-epoch" + std::to_string(m.epochs_run) + ".json"), true);
    };
    const RunResult r = run_single(bundle, cls, seed, cfg, hooks);
    ck.model = r.model;
    save_checkpoint(ck, dir / "checkpoint.json");
    detail::write_file(dir / "loss.csv", loss_history_csv(r.model.history));
    detail::write_file(dir / "metrics.json", metrics_file(r.metrics, "../../manifest.json").dump(2) + "\n");
    results[i] = r.metrics;
    report(r.metrics);
  });
  std::vector<Row> rows;
  std::string csv = metrics_csv_header();
  for (const RunMetrics& m : results) {
    csv += metrics_csv_row(m);
    rows.push_back({std::string(to_string(cfg.train.model.variant)), m});
  }
  detail::write_file(out / "metrics.csv", csv);
  detail::write_file(out / "summary.csv", summary_csv(rows));
  return 0;
}

std::vector<fs::path> checkpoint_paths(const Options& o) {
  std::vector<fs::path> paths(o.checkpoints.begin(), o.checkpoints.end());
  if (!o.runs.empty()) {
    if (!fs::is_directory(o.runs)) throw UsageError("--runs directory not found: " + o.runs);
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(o.runs)) {
      if (e.is_regular_file() && e.path().filename() == "checkpoint.json") found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    paths.insert(paths.end(), found.begin(), found.end());
  }
  if (paths.empty()) throw UsageError("eval needs --checkpoint or --runs");
  return paths;
}

Checkpoint load_ck(const fs::path& p) {
  try {
    return load_checkpoint(p);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

int cmd_eval(const Options& o) {
  const DatasetBundle bundle = load(o.data);
  const auto paths = checkpoint_paths(o);
  std::vector<Checkpoint> cks;
  for (const auto& p : paths) {
    cks.push_back(load_ck(p));
    if (cks.back().dataset_checksum != combined_checksum(bundle.provenance)) {
      throw UsageError("checkpoint " + p.string() + " was trained on a different dataset (checksum " +
                       cks.back().dataset_checksum + ")");
    }
  }
  const fs::path out = require_out(o);
  fs::create_directories(out);

  std::vector<Row> rows;
  std::string csv = metrics_csv_header();
  Json all = Json::array();
  for (const Checkpoint& ck : cks) {
    ScoringConfig sc;
    sc.beta = o.has("--beta") ? o.beta : ck.model.config.beta;
    sc.lambda = o.has("--lambda") ? o.lambda : 0.0;
    sc.weighting = o.has("--weighting") ? parse_weighting(o.weighting) : Weighting::PaperLiteral;
    sc.validate();
    const EvalResult e = evaluate_checkpoint(ck, bundle, sc, o.stratify);
    RunMetrics m;
    m.dataset = bundle.name;
    m.normal_class = ck.normal_class;
    m.seed = ck.model.config.seed;
    m.auc = e.auc;
    m.ap = e.ap;
    m.beta = sc.beta;
    m.lambda = sc.lambda;
    m.variant = ck.model.config.model.variant;
    m.weighting = sc.weighting;
    if (bundle.anomalies) {
      const SplitSpec split = experiment_splits(bundle, ck.normal_class, m.seed, o.stratify);
      m.auc_structure = detail::subtype_auc(e.scores, split, *bundle.anomalies, AnomalyKind::Structure);
      m.auc_attribute = detail::subtype_auc(e.scores, split, *bundle.anomalies, AnomalyKind::Attribute);
      m.auc_combined = detail::subtype_auc(e.scores, split, *bundle.anomalies, AnomalyKind::Combined);
    }
    all.push_back(metrics_json(m));
    csv += metrics_csv_row(m);
    rows.push_back({std::string(to_string(m.variant)), m});
    report(m);
  }
  detail::write_file(out / "metrics.json", all.dump(2) + "\n");
  detail::write_file(out / "metrics.csv", csv);
  detail::write_file(out / "summary.csv", summary_csv(rows));
  return 0;
}

int cmd_sweep_beta(const Options& o, const std::string& cmd) {
  const DatasetBundle bundle = load(o.data);
  const ExperimentConfig cfg = resolve(o, bundle);
  const auto seeds = resolve_seeds(o);
  const auto classes = resolve_classes(o, bundle);
  const auto grid = o.grid.empty() ? std::vector<double>{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}
                                   : parse_list<double>(o.grid, "--grid");
  for (double b : grid) {
    if (!(b >= 0.0 && b <= 1.0)) throw UsageError("--grid values must lie in [0,1], got " + format_double(b));
  }
  const fs::path out = require_out(o);
  write_manifest(out, cfg, bundle, classes, seeds, cmd);

  std::vector<Task> tasks;
  for (double b : grid) {
    ExperimentConfig c = cfg;
    c.train.beta = c.scoring.beta = b;
    for (int cls : classes) {
      for (std::uint64_t seed : seeds) tasks.push_back({c, format_double(b), cls, seed});
    }
  }
  std::vector<Row> rows;
  std::string csv = metrics_csv_header();
  for (const Row& r : run_tasks(bundle, tasks, o.jobs, " beta ")) {
    csv += metrics_csv_row(r.m);
    rows.push_back(r);
  }
  detail::write_file(out / "sweep.csv", csv);
  detail::write_file(out / "summary.csv", summary_csv(rows));
  return 0;
}

int cmd_ablate(const Options& o, const std::string& cmd) {
  const DatasetBundle bundle = load(o.data);
  const ExperimentConfig cfg = resolve(o, bundle);
  const auto seeds = resolve_seeds(o);
  const auto classes = resolve_classes(o, bundle);
  std::vector<Variant> variants;
  if (o.has("--variant")) {
    variants.push_back(cfg.train.model.variant);
  } else if (!o.variants.empty()) {
    try {
      for (const auto& n : split_names(o.variants)) variants.push_back(parse_variant(n));
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  } else {
    variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
  }
  const fs::path out = require_out(o);
  write_manifest(out, cfg, bundle, classes, seeds, cmd);

  std::vector<Task> tasks;
  for (Variant v : variants) {
    ExperimentConfig c = cfg;
    c.train.model.variant = v;
    for (int cls : classes) {
      for (std::uint64_t seed : seeds) tasks.push_back({c, std::string(to_string(v)), cls, seed});
    }
  }
  std::vector<Row> rows;
  std::string csv = metrics_csv_header();
  for (const Row& r : run_tasks(bundle, tasks, o.jobs, " ")) {
    csv += metrics_csv_row(r.m);
    rows.push_back(r);
  }
  detail::write_file(out / "ablation.csv", csv);
  detail::write_file(out / "summary.csv", summary_csv(rows));
  return 0;
}

int cmd_synth(const Options& o) {
  const fs::path out = require_out(o);
  PlantedDataset d;
  try {
    d = synth_planted(o.planted, o.seed);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  write_dataset(d.bundle, out);
  std::cout << "wrote " << d.bundle.graph.n_nodes() << " nodes, " << d.bundle.graph.n_edges() << " edges to "
            << out.string() << "\n";
  return 0;
}

int cmd_embed(const Options& o) {
  const DatasetBundle bundle = load(o.data);
  if (o.checkpoints.size() != 1) throw UsageError("embed needs exactly one --checkpoint");
  const Checkpoint ck = load_ck(o.checkpoints.front());
  if (ck.model.config.model.n_attrs != bundle.graph.n_attrs()) {
    throw UsageError("checkpoint expects " + std::to_string(ck.model.config.model.n_attrs) + " attributes, dataset has " +
                     std::to_string(bundle.graph.n_attrs()));
  }
  const fs::path out = require_out(o);
  const ForwardOutputs f = embed(ck.model, bundle.graph);
  const Tensor2 zs = f.zs.value_or(Tensor2());
  const Tensor2 za = f.za.value_or(Tensor2());
  std::string csv = "node";
  for (Eigen::Index k = 0; k < zs.cols(); ++k) csv += ",zs" + std::to_string(k);
  for (Eigen::Index k = 0; k < za.cols(); ++k) csv += ",za" + std::to_string(k);
  csv += "\n";
  for (std::size_t i = 0; i < bundle.graph.n_nodes(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    csv += std::to_string(i);
    for (Eigen::Index k = 0; k < zs.cols(); ++k) csv += "," + format_double(zs(r, k));
    for (Eigen::Index k = 0; k < za.cols(); ++k) csv += "," + format_double(za(r, k));
    csv += "\n";
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  detail::write_file(out, csv);
  return 0;
}

void add_run_flags(CLI::App* sub, Options& o) {
  const auto reg = [&](CLI::Option* opt) { o.given.emplace(opt->get_name(), opt); };
  sub->add_option("--data", o.data, "Dataset directory");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--config", o.config, "JSON config (flags take precedence)");
  reg(sub->add_option("--normal-class", o.normal_class, "Normal class id, comma list, or 'all'"));
  reg(sub->add_option("--seed", o.seed, "Single seed"));
  reg(sub->add_option("--seeds", o.seeds, "Comma-separated seeds"));
  reg(sub->add_option("--beta", o.beta, "Structure/attribute trade-off"));
  reg(sub->add_option("--mu-s", o.mu_s, "Structure sphere outlier fraction"));
  reg(sub->add_option("--mu-a", o.mu_a, "Attribute sphere outlier fraction"));
  reg(sub->add_option("--epochs", o.epochs, "Training epochs"));
  reg(sub->add_option("--lr", o.lr, "Adam learning rate"));
  reg(sub->add_option("--variant", o.variant, "full, wo-oc, wo-aes, wo-aea, wo-dea, wo-des, wo-deboth"));
  reg(sub->add_option("--weighting", o.weighting, "paper-literal or loss-consistent"));
  reg(sub->add_option("--lambda", o.lambda, "Decision threshold"));
  reg(sub->add_option("--self-loops", o.self_loops, "Add self-loops before normalization (true/false)"));
  reg(sub->add_option("--graph-mode", o.graph_mode, "train-induced or full"));
  reg(sub->add_option("--structure-loss", o.structure_loss, "full or sampled"));
  reg(sub->add_option("--embed-dim", o.embed_dim, "Embedding width"));
  reg(sub->add_option("--hidden", o.hidden, "Hidden layer width"));
  reg(sub->add_option("--checkpoint-every", o.checkpoint_every, "Write a checkpoint every N epochs"));
  reg(sub->add_flag("--select-best", o.select_best, "Keep the snapshot with the best validation AUC"));
  reg(sub->add_flag("--stratify", o.stratify, "Stratify anomalies by class in the splits"));
  sub->add_option("--jobs", o.jobs, "Runs trained concurrently (outputs do not depend on it)")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-SVDAE graph anomaly detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolkitVersion);
  Options o;

  auto* train = app.add_subcommand("train", "Train and write checkpoint, loss history and metrics");
  add_run_flags(train, o);

  auto* eval = app.add_subcommand("eval", "Score checkpoints on their test split");
  eval->add_option("--data", o.data, "Dataset directory");
  eval->add_option("--out", o.out, "Output directory");
  eval->add_option("--checkpoint", o.checkpoints, "Checkpoint file (repeatable)");
  eval->add_option("--runs", o.runs, "Directory searched for checkpoint.json files");
  o.given.emplace("--beta", eval->add_option("--beta", o.beta, "Score weight (default: training beta)"));
  o.given.emplace("--lambda", eval->add_option("--lambda", o.lambda, "Decision threshold"));
  o.given.emplace("--weighting", eval->add_option("--weighting", o.weighting, "paper-literal or loss-consistent"));
  eval->add_flag("--stratify", o.stratify, "Splits were stratified");

  auto* sweep = app.add_subcommand("sweep-beta", "Train and evaluate over a grid of beta values");
  add_run_flags(sweep, o);
  sweep->add_option("--grid", o.grid, "Comma-separated beta values (default 0,0.1,...,1)");

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every model variant");
  add_run_flags(ablate, o);
  ablate->add_option("--variants", o.variants, "Comma-separated variants (default: all seven)");

  auto* synth = app.add_subcommand("synth", "Write a planted-anomaly block-model dataset");
  synth->add_option("--out", o.out, "Output dataset directory")->required();
  synth->add_option("--seed", o.seed, "Generator seed");
  synth->add_option("--n-per-block", o.planted.n_per_block, "Nodes per block");
  synth->add_option("--blocks", o.planted.blocks, "Number of blocks");
  synth->add_option("--p-in", o.planted.p_in, "Within-block edge probability");
  synth->add_option("--p-out", o.planted.p_out, "Between-block edge probability");
  synth->add_option("--attr-dim", o.planted.attr_dim, "Attribute width");
  synth->add_option("--anomaly-rate", o.planted.anomaly_rate, "Fraction of planted anomalies");
  synth->add_option("--attr-noise", o.planted.attr_noise, "Attribute noise std-dev");

  auto* emb = app.add_subcommand("embed", "Write structure and attribute embeddings as CSV");
  emb->add_option("--data", o.data, "Dataset directory");
  emb->add_option("--checkpoint", o.checkpoints, "Checkpoint file");
  emb->add_option("--out", o.out, "Output CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string cmd = command_line(argc, argv);
  try {
    if (*train) return cmd_train(o, cmd);
    if (*eval) return cmd_eval(o);
    if (*sweep) return cmd_sweep_beta(o, cmd);
    if (*ablate) return cmd_ablate(o, cmd);
    if (*synth) return cmd_synth(o);
    if (*emb) return cmd_embed(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
