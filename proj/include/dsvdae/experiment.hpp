#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsvdae/checkpoint.hpp"
#include "dsvdae/dataset.hpp"
#include "dsvdae/scoring.hpp"
#include "dsvdae/synthetic.hpp"
#include "dsvdae/training.hpp"

namespace dsvdae {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Training and scoring settings for one (dataset, class, seed) run.
struct ExperimentConfig {
  TrainConfig train;
  ScoringConfig scoring;
  bool stratify = false;

  void validate() const {
    train.validate();
    scoring.validate();
  }
};

inline bool binary_features(const Tensor2& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x.data()[i] != 0.0 && x.data()[i] != 1.0) return false;
  }
  return true;
}

/// Built-in defaults: D=32, hidden 64, lr 0.002, and per-dataset epochs and
/// [mu_a, mu_s, beta]. Datasets are recognised by name or by their node and
/// attribute counts. The decoder output is a sigmoid for 0/1 features and
/// linear otherwise.
inline ExperimentConfig default_config(const DatasetBundle& bundle) {
  ExperimentConfig c;
  const Graph& g = bundle.graph;
  c.train.model = ModelConfig::standard(g.n_attrs(), 32, 64);
  c.train.model.output_activation = binary_features(g.attributes()) ? Activation::Sigmoid : Activation::Identity;
  const std::string& name = bundle.name;
  const auto is = [&](const char* n, std::size_t nodes, std::size_t attrs) {
    return name == n || (g.n_nodes() == nodes && g.n_attrs() == attrs);
  };
  if (is("citeseer", 3327, 3703)) {
    c.train.epochs = 2000;
    c.train.mu_a = 0.4;
    c.train.mu_s = 0.6;
    c.train.beta = 0.4;
  } else if (is("pubmed", 19717, 500)) {
    c.train.epochs = 2000;
    c.train.mu_a = 0.4;
    c.train.mu_s = 0.9;
    c.train.beta = 0.2;
    c.train.structure_loss = StructureLossPolicy::Sampled;
  } else if (bundle.anomalies.has_value()) {
    // planted synthetic data
    c.train.epochs = 300;
    c.train.mu_a = 0.2;
    c.train.mu_s = 0.2;
    c.train.beta = 0.5;
  } else {
    c.train.epochs = 5000;
    c.train.mu_a = 0.2;
    c.train.mu_s = 0.9;
    c.train.beta = 0.2;
  }
  c.scoring.beta = c.train.beta;
  return c;
}

/// Splits with the protocol matching the dataset: planted truth when present,
/// one-class-vs-rest otherwise.
inline SplitSpec experiment_splits(const DatasetBundle& bundle, int normal_class, std::uint64_t seed, bool stratify) {
  if (bundle.anomalies.has_value()) return make_planted_splits(bundle, normal_class, seed);
  return make_splits(bundle, normal_class, seed, stratify);
}

/// Per-node reconstruction error on `nodes`: mean squared error of the node's
/// adjacency row against every node, and of its attribute row.
inline std::vector<double> reconstruction_score(const TrainedModel& m, const Graph& g,
                                                const std::vector<std::size_t>& nodes, const ScoringConfig& cfg) {
  const Branches b = branches(m.config.model.variant);
  const auto [wa, ws] = score_weights(cfg, b.attribute_decoder, b.structure_decoder);
  const SparseMatrix adj = normalized_adjacency(g, m.config.model.self_loops);
  const ForwardTrace t = forward_trace(adj, g.attributes(), m.params, m.config.model, nodes, false);
  std::vector<double> s(nodes.size(), 0.0);
  if (b.structure_decoder) {
    const Tensor2 a = dense_adjacency(g);
    const Tensor2 logits = t.zs_rows * t.zs.transpose();
    const double inv = 1.0 / static_cast<double>(g.n_nodes());
    for (std::size_t r = 0; r < nodes.size(); ++r) {
      double e = 0.0;
      for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        const double d = sigmoid(logits(static_cast<Eigen::Index>(r), j)) - a(static_cast<Eigen::Index>(nodes[r]), j);
        e += d * d;
      }
      s[r] += ws * e * inv;
    }
  }
  if (b.attribute_decoder) {
    const Tensor2 x = gather_rows(g.attributes(), nodes);
    const double inv = 1.0 / static_cast<double>(g.n_attrs());
    for (std::size_t r = 0; r < nodes.size(); ++r) {
      s[r] += wa * (t.x_hat.row(static_cast<Eigen::Index>(r)) - x.row(static_cast<Eigen::Index>(r))).squaredNorm() * inv;
    }
  }
  return s;
}

/// Scores of `nodes` from a forward pass over all of `g`. Variants without
/// hypersphere losses fall back to reconstruction error.
inline std::vector<double> score_nodes(const TrainedModel& m, const Graph& g, const std::vector<std::size_t>& nodes,
                                       const ScoringConfig& cfg) {
  const Branches b = branches(m.config.model.variant);
  if (!b.spheres) return reconstruction_score(m, g, nodes, cfg);
  const SparseMatrix adj = normalized_adjacency(g, m.config.model.self_loops);
  const ForwardTrace t = forward_trace(adj, g.attributes(), m.params, m.config.model, nodes, false);
  Tensor2 zs, za;
  if (b.structure_encoder) zs = t.zs_rows;
  if (b.attribute_encoder) za = gather_rows(t.za, nodes);
  return anomaly_score(b.structure_encoder ? &zs : nullptr, b.attribute_encoder ? &za : nullptr, m.structure,
                       m.attribute, cfg);
}

struct RunMetrics {
  std::string dataset;
  int normal_class = 0;
  std::uint64_t seed = 0;
  double auc = 0.0;
  double ap = 0.0;
  double beta = 0.0;
  double lambda = 0.0;
  Variant variant = Variant::Full;
  Weighting weighting = Weighting::PaperLiteral;
  // AUC of each planted anomaly kind against the test normals (planted data only)
  std::optional<double> auc_structure, auc_attribute, auc_combined;
};

struct RunResult {
  RunMetrics metrics;
  SplitSpec split;
  TrainedModel model;
  EvalResult test;
};

namespace detail {

inline std::optional<double> subtype_auc(const std::vector<double>& scores, const SplitSpec& s,
                                         const std::vector<AnomalyKind>& kinds, AnomalyKind kind) {
  std::vector<double> sc;
  std::vector<int> truth;
  for (std::size_t k = 0; k < s.test.size(); ++k) {
    const AnomalyKind nk = kinds[s.test[k]];
    if (s.test_truth[k] == 0 || nk == kind) {
      sc.push_back(scores[k]);
      truth.push_back(s.test_truth[k]);
    }
  }
  const auto pos = std::count(truth.begin(), truth.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(truth.size())) return std::nullopt;
  return auc(sc, truth);
}

}  // namespace detail

/// Calls fn(0), ..., fn(n-1) on up to `jobs` threads. Tasks must not share
/// mutable state. After every thread has finished, the exception of the lowest
/// failing index (if any) is rethrown.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  require(jobs >= 1, "parallel_for: jobs must be at least 1");
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t extra = std::min(jobs, n) > 0 ? std::min(jobs, n) - 1 : 0;
  std::vector<std::thread> pool;
  pool.reserve(extra);
  for (std::size_t t = 0; t < extra; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Split, train on the normal training nodes, score the test nodes.
inline RunResult run_single(const DatasetBundle& bundle, int normal_class, std::uint64_t seed,
                            const ExperimentConfig& base, const TrainHooks& hooks = {}) {
  ExperimentConfig cfg = base;
  cfg.train.seed = seed;
  cfg.validate();
  RunResult r;
  r.split = experiment_splits(bundle, normal_class, seed, cfg.stratify);
  TrainHooks h = hooks;
  if (cfg.train.select_best_validation && !h.validation_score) {
    h.validation_score = [&](const TrainedModel& m) {
      return auc(score_nodes(m, bundle.graph, r.split.val, cfg.scoring), r.split.val_truth);
    };
  }
  r.model = train(bundle.graph, r.split.train, cfg.train, h);
  r.test = evaluate_scores(score_nodes(r.model, bundle.graph, r.split.test, cfg.scoring), r.split.test_truth,
                           cfg.scoring.lambda);

  RunMetrics& m = r.metrics;
  m.dataset = bundle.name;
  m.normal_class = normal_class;
  m.seed = seed;
  m.auc = r.test.auc;
  m.ap = r.test.ap;
  m.beta = cfg.scoring.beta;
  m.lambda = cfg.scoring.lambda;
  m.variant = cfg.train.model.variant;
  m.weighting = cfg.scoring.weighting;
  if (bundle.anomalies) {
    m.auc_structure = detail::subtype_auc(r.test.scores, r.split, *bundle.anomalies, AnomalyKind::Structure);
    m.auc_attribute = detail::subtype_auc(r.test.scores, r.split, *bundle.anomalies, AnomalyKind::Attribute);
    m.auc_combined = detail::subtype_auc(r.test.scores, r.split, *bundle.anomalies, AnomalyKind::Combined);
  }
  return r;
}

/// Reloads a checkpoint and scores the test split it was trained for.
inline EvalResult evaluate_checkpoint(const Checkpoint& ck, const DatasetBundle& bundle, const ScoringConfig& scoring,
                                      bool stratify = false) {
  const std::string sum = combined_checksum(bundle.provenance);
  if (ck.dataset_checksum != sum) {
    throw DataError("checkpoint was trained on dataset " + ck.dataset_checksum + ", got " + sum);
  }
  const SplitSpec split = experiment_splits(bundle, ck.normal_class, ck.model.config.seed, stratify);
  return evaluate_scores(score_nodes(ck.model, bundle.graph, split.test, scoring), split.test_truth, scoring.lambda);
}

// ---------------------------------------------------------------- reporting

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t n = 0;
};

inline Aggregate aggregate(const std::vector<double>& v) {
  Aggregate a;
  a.n = v.size();
  if (v.empty()) return a;
  // shifted by the first value: identical inputs give exactly that value and 0
  const double v0 = v.front();
  double sum = 0.0;
  for (double x : v) sum += x - v0;
  const double shift = sum / static_cast<double>(v.size());
  a.mean = v0 + shift;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - v0 - shift) * (x - v0 - shift);
    a.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return a;
}

inline nlohmann::ordered_json metrics_json(const RunMetrics& m) {
  nlohmann::ordered_json j;
  j["dataset"] = m.dataset;
  j["normal_class"] = m.normal_class;
  j["seed"] = m.seed;
  j["auc"] = m.auc;
  j["ap"] = m.ap;
  j["beta"] = m.beta;
  j["lambda"] = m.lambda;
  j["variant"] = to_string(m.variant);
  j["weighting_mode"] = to_string(m.weighting);
  if (m.auc_structure) j["auc_structure"] = *m.auc_structure;
  if (m.auc_attribute) j["auc_attribute"] = *m.auc_attribute;
  if (m.auc_combined) j["auc_combined"] = *m.auc_combined;
  return j;
}

inline std::string metrics_csv_header() { return "dataset,normal_class,seed,variant,beta,weighting_mode,auc,ap\n"; }

inline std::string metrics_csv_row(const RunMetrics& m) {
  return m.dataset + "," + std::to_string(m.normal_class) + "," + std::to_string(m.seed) + "," +
         std::string(to_string(m.variant)) + "," + format_double(m.beta) + "," + std::string(to_string(m.weighting)) +
         "," + format_double(m.auc) + "," + format_double(m.ap) + "\n";
}

/// Manifest of a batch of runs; contains no timestamps so identical inputs give
/// identical bytes.
struct RunManifest {
  ExperimentConfig config;
  std::string dataset_checksum;
  std::string dataset_name;
  std::vector<int> normal_classes;
  std::vector<std::uint64_t> seeds;
  std::string command;
  std::filesystem::path out_dir;
};

inline nlohmann::ordered_json manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["toolkit_version"] = kToolkitVersion;
  j["command"] = m.command;
  j["dataset"] = m.dataset_name;
  j["dataset_checksum"] = m.dataset_checksum;
  j["normal_classes"] = m.normal_classes;
  j["seeds"] = m.seeds;
  j["out_dir"] = m.out_dir.string();
  j["train_config"] = to_json(m.config.train);
  j["scoring"] = {{"beta", m.config.scoring.beta},
                  {"lambda", m.config.scoring.lambda},
                  {"weighting_mode", to_string(m.config.scoring.weighting)}};
  j["stratify"] = m.config.stratify;
  return j;
}

}  // namespace dsvdae
