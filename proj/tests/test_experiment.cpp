#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include <unistd.h>

#include "test_support.hpp"

using namespace dsvdae;
using namespace dsvdae::testing;

namespace {

DatasetBundle small_planted(std::uint64_t seed = 3) {
  PlantedConfig c;
  c.n_per_block = 60;
  c.attr_dim = 8;
  c.p_in = 0.1;
  c.p_out = 0.005;
  c.anomaly_rate = 0.1;
  return synth_planted(c, seed).bundle;
}

ExperimentConfig small_experiment(const DatasetBundle& b, Variant v = Variant::Full) {
  ExperimentConfig c = default_config(b);
  c.train.model = tiny_config(b.graph.n_attrs(), 4, 8, v);
  c.train.epochs = 20;
  return c;
}

Checkpoint trained_checkpoint(const DatasetBundle& b, Variant v = Variant::Full) {
  const RunResult r = run_single(b, 0, 11, small_experiment(b, v));
  Checkpoint ck;
  ck.model = r.model;
  ck.normal_class = 0;
  ck.dataset_checksum = combined_checksum(b.provenance);
  return ck;
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("dsvdae_exp_" + name + "_" + std::to_string(getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Checkpoint, JsonRoundTripIsExact) {
  const DatasetBundle b = small_planted();
  const Checkpoint ck = trained_checkpoint(b);
  for (bool moments : {false, true}) {
    const auto j = checkpoint_json(ck, moments);
    const Checkpoint back = checkpoint_from_json(nlohmann::ordered_json::parse(j.dump()));
    EXPECT_EQ(checkpoint_json(back, moments), j);
    for (const auto& p : ck.model.params) {
      const Parameter* q = back.model.params.find(p.name);
      ASSERT_NE(q, nullptr);
      EXPECT_EQ(q->value, p.value) << p.name;
      EXPECT_EQ(q->active, p.active);
      if (moments) {
        EXPECT_EQ(q->second_moment, p.second_moment);
      }
    }
    EXPECT_EQ(back.model.structure.center, ck.model.structure.center);
    EXPECT_EQ(back.model.attribute.radius, ck.model.attribute.radius);
    EXPECT_EQ(back.dataset_checksum, ck.dataset_checksum);
  }
}

TEST(Checkpoint, FileRoundTripScoresIdentically) {
  const DatasetBundle b = small_planted();
  const Checkpoint ck = trained_checkpoint(b);
  const auto dir = scratch("ckpt");
  save_checkpoint(ck, dir / "model.json");
  const Checkpoint back = load_checkpoint(dir / "model.json");
  ScoringConfig sc;
  sc.beta = 0.5;
  const EvalResult a = evaluate_checkpoint(ck, b, sc);
  const EvalResult c = evaluate_checkpoint(back, b, sc);
  EXPECT_EQ(a.scores, c.scores);
  EXPECT_EQ(a.auc, c.auc);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, Rejections) {
  const DatasetBundle b = small_planted();
  const Checkpoint ck = trained_checkpoint(b);
  auto j = checkpoint_json(ck);
  auto bad = j;
  bad["format"] = "something-else";
  EXPECT_THROW(checkpoint_from_json(bad), DataError);
  bad = j;
  bad["version"] = 99;
  EXPECT_THROW(checkpoint_from_json(bad), DataError);
  bad = j;
  bad["parameters"][0]["rows"] = 1000;
  EXPECT_THROW(checkpoint_from_json(bad), DataError);
  bad = j;
  bad["parameters"][0]["values"].erase(0);
  EXPECT_THROW(checkpoint_from_json(bad), DataError);
  bad = j;
  bad["parameters"][0]["name"] = "nope";
  EXPECT_THROW(checkpoint_from_json(bad), DataError);
  bad = j;
  bad["parameters"].erase(0);
  EXPECT_THROW(checkpoint_from_json(bad), DataError);

  const auto dir = scratch("ckpt_bad");
  dsvdae::detail::write_file(dir / "broken.json", "{ not json");
  EXPECT_THROW(load_checkpoint(dir / "broken.json"), DataError);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, WrongDatasetIsRejected) {
  const DatasetBundle b = small_planted(3);
  const DatasetBundle other = small_planted(4);
  const Checkpoint ck = trained_checkpoint(b);
  EXPECT_THROW(evaluate_checkpoint(ck, other, ScoringConfig{}), DataError);
}

TEST(TrainConfigJson, RoundTrip) {
  TrainConfig c;
  c.model = tiny_config(9, 3, 5, Variant::WoDes);
  c.model.output_activation = Activation::Sigmoid;
  c.epochs = 17;
  c.beta = 0.35;
  c.mu_s = 0.7;
  c.seed = 123456789012345ULL;
  c.structure_loss = StructureLossPolicy::Sampled;
  c.sampled_negatives = 42;
  c.graph_mode = GraphMode::Full;
  const auto j = to_json(c);
  EXPECT_EQ(to_json(train_config_from_json(j)), j);
  auto bad = j;
  bad["beta"] = 1.5;
  EXPECT_THROW(train_config_from_json(bad), InvalidArgument);
  bad = j;
  bad["structure_loss"] = "dense";
  EXPECT_THROW(train_config_from_json(bad), InvalidArgument);
}

TEST(LossHistory, Csv) {
  std::vector<LossRecord> h(2);
  h[0] = {1, 1.5, 0.25, 0.5, 0.125, 2.0, 0.0, 0.0};
  h[1] = {2, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  EXPECT_EQ(loss_history_csv(h),
            "epoch,total,sphere_s,sphere_a,recon_s,recon_a\n"
            "1,1.5,0.25,0.5,0.125,2\n"
            "2,0.10000000000000001,0,0,0,0\n");
}

TEST(DefaultConfig, DetectsDatasets) {
  DatasetBundle b;
  b.name = "citeseer";
  b.graph = build_graph(3, {}, Tensor2::Zero(3, 5));
  ExperimentConfig c = default_config(b);
  EXPECT_EQ(c.train.epochs, 2000u);
  EXPECT_EQ(c.train.mu_a, 0.4);
  EXPECT_EQ(c.train.mu_s, 0.6);
  EXPECT_EQ(c.train.beta, 0.4);
  EXPECT_EQ(c.scoring.beta, 0.4);
  EXPECT_EQ(c.train.model.output_activation, Activation::Sigmoid);
  EXPECT_EQ(c.train.model.embed_dim, 32u);

  b.name = "pubmed";
  c = default_config(b);
  EXPECT_EQ(c.train.structure_loss, StructureLossPolicy::Sampled);
  EXPECT_EQ(c.train.mu_s, 0.9);

  b.name = "cora";
  c = default_config(b);
  EXPECT_EQ(c.train.epochs, 5000u);
  EXPECT_EQ(c.train.mu_a, 0.2);
  EXPECT_EQ(c.train.mu_s, 0.9);
  EXPECT_EQ(c.train.beta, 0.2);
  EXPECT_EQ(c.train.adam.learning_rate, 0.002);

  const DatasetBundle p = small_planted();
  c = default_config(p);
  EXPECT_EQ(c.train.epochs, 300u);
  EXPECT_EQ(c.train.model.output_activation, Activation::Identity);
}

TEST(Aggregate, MeanAndSampleStd) {
  const Aggregate same = aggregate({0.8, 0.8, 0.8});
  EXPECT_EQ(same.mean, 0.8);
  EXPECT_EQ(same.std, 0.0);
  const Aggregate a = aggregate({1.0, 2.0, 3.0, 4.0});
  EXPECT_EQ(a.mean, 2.5);
  EXPECT_NEAR(a.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(aggregate({0.3}).std, 0.0);
  EXPECT_EQ(aggregate({}).n, 0u);
}

TEST(MetricsJson, Keys) {
  RunMetrics m;
  m.dataset = "cora";
  m.auc = 0.5;
  const auto j = metrics_json(m);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"dataset", "normal_class", "seed", "auc", "ap", "beta", "lambda", "variant",
                                            "weighting_mode"}));
  m.auc_structure = 0.9;
  EXPECT_TRUE(metrics_json(m).contains("auc_structure"));
  EXPECT_EQ(metrics_csv_row(m), "cora,0,0,full,0,paper-literal,0.5,0\n");
}

TEST(RunSingle, DeterministicAndComplete) {
  const DatasetBundle b = small_planted();
  const ExperimentConfig c = small_experiment(b);
  const RunResult r1 = run_single(b, 1, 7, c);
  const RunResult r2 = run_single(b, 1, 7, c);
  EXPECT_EQ(metrics_json(r1.metrics).dump(), metrics_json(r2.metrics).dump());
  EXPECT_EQ(r1.test.scores, r2.test.scores);
  EXPECT_EQ(r1.metrics.seed, 7u);
  EXPECT_EQ(r1.model.config.seed, 7u);
  EXPECT_EQ(r1.test.scores.size(), r1.split.test.size());
  // a subtype AUC is reported exactly when that kind appears in the test split
  const auto& kinds = *b.anomalies;
  const auto in_test = [&](AnomalyKind k) {
    return std::any_of(r1.split.test.begin(), r1.split.test.end(), [&](std::size_t i) { return kinds[i] == k; });
  };
  EXPECT_EQ(r1.metrics.auc_structure.has_value(), in_test(AnomalyKind::Structure));
  EXPECT_EQ(r1.metrics.auc_attribute.has_value(), in_test(AnomalyKind::Attribute));
  EXPECT_EQ(r1.metrics.auc_combined.has_value(), in_test(AnomalyKind::Combined));
  const RunResult r3 = run_single(b, 1, 8, c);
  EXPECT_NE(r1.test.scores, r3.test.scores);
}

TEST(ScoreNodes, MissingStructureEncoderUsesAttributeSphereOnly) {
  const DatasetBundle b = small_planted();
  const Checkpoint ck = trained_checkpoint(b, Variant::WoAEs);
  std::vector<std::size_t> nodes{0, 5, 17, 60, 119};
  ScoringConfig sc;
  sc.beta = 0.3;
  const auto s = score_nodes(ck.model, b.graph, nodes, sc);
  const ForwardOutputs f = embed(ck.model, b.graph);
  const Hypersphere& a = ck.model.attribute;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double d2 = (f.za->row(static_cast<Eigen::Index>(nodes[k])) - a.center).squaredNorm();
    EXPECT_NEAR(s[k], d2 - a.radius * a.radius, 1e-12);
  }
}

TEST(ScoreNodes, BetaZeroIgnoresAttributeTerm) {
  const DatasetBundle b = small_planted();
  const Checkpoint ck = trained_checkpoint(b);
  std::vector<std::size_t> nodes{1, 2, 3, 70};
  ScoringConfig sc;
  sc.beta = 0.0;
  const auto s = score_nodes(ck.model, b.graph, nodes, sc);
  const ForwardOutputs f = embed(ck.model, b.graph);
  const Hypersphere& st = ck.model.structure;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double d2 = (f.zs->row(static_cast<Eigen::Index>(nodes[k])) - st.center).squaredNorm();
    EXPECT_NEAR(s[k], d2 - st.radius * st.radius, 1e-12);
  }
}

TEST(ScoreNodes, WithoutSpheresFallsBackToReconstruction) {
  const DatasetBundle b = small_planted();
  const Checkpoint ck = trained_checkpoint(b, Variant::WoOC);
  std::vector<std::size_t> nodes{4, 9};
  ScoringConfig sc;
  sc.beta = 0.5;
  const auto s = score_nodes(ck.model, b.graph, nodes, sc);
  const ForwardOutputs f = embed(ck.model, b.graph);
  const Tensor2 a = dense_adjacency(b.graph);
  const auto n = static_cast<Eigen::Index>(b.graph.n_nodes());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(nodes[k]);
    double es = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = sigmoid(f.zs->row(i).dot(f.zs->row(j))) - a(i, j);
      es += d * d;
    }
    const double ea = (f.x_hat->row(i) - b.graph.attributes().row(i)).squaredNorm() / 8.0;
    EXPECT_NEAR(s[k], 0.5 * es / static_cast<double>(n) + 0.5 * ea, 1e-12);
  }
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (std::size_t jobs : {1u, 2u, 5u}) {
    std::vector<int> hits(37, 0);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i] += 1; });
    EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 37) << jobs;
  }
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
  EXPECT_THROW(parallel_for(3, 0, [](std::size_t) {}), InvalidArgument);
}

TEST(ParallelFor, RethrowsLowestFailingIndexAfterAllTasks) {
  std::vector<int> done(10, 0);
  try {
    parallel_for(done.size(), 3, [&](std::size_t i) {
      done[i] = 1;
      if (i == 4 || i == 7) throw std::runtime_error("task " + std::to_string(i));
    });
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "task 4");
  }
  EXPECT_EQ(std::count(done.begin(), done.end(), 1), 10);
}

TEST(ParallelFor, RunsMatchSerialResults) {
  const DatasetBundle b = small_planted(3);
  const ExperimentConfig cfg = small_experiment(b);
  std::vector<double> serial(4), threaded(4);
  parallel_for(4, 1, [&](std::size_t i) { serial[i] = run_single(b, static_cast<int>(i % 2), i / 2, cfg).metrics.auc; });
  parallel_for(4, 4, [&](std::size_t i) { threaded[i] = run_single(b, static_cast<int>(i % 2), i / 2, cfg).metrics.auc; });
  EXPECT_EQ(serial, threaded);
}

TEST(Manifest, HasNoVolatileFields) {
  RunManifest m;
  m.config = small_experiment(small_planted());
  m.dataset_name = "synthetic-planted";
  m.seeds = {1, 2};
  m.normal_classes = {0};
  const auto a = manifest_json(m).dump();
  EXPECT_EQ(a, manifest_json(m).dump());
  EXPECT_EQ(manifest_json(m)["toolkit_version"], kToolkitVersion);
  EXPECT_EQ(a.find("time"), std::string::npos);
}
