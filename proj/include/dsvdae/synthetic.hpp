#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dsvdae/dataset.hpp"

namespace dsvdae {

/// Stochastic block model with Gaussian attributes and planted anomalies.
struct PlantedConfig {
  std::size_t n_per_block = 200;
  std::size_t blocks = 2;
  double p_in = 0.05;
  double p_out = 0.002;
  std::size_t attr_dim = 16;
  double anomaly_rate = 0.05;
  // proportions of structure, attribute and combined anomalies
  std::array<double, 3> anomaly_mix{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double center_scale = 1.0;  // std-dev of each block center coordinate
  double attr_noise = 0.5;    // std-dev of node attributes around their center

  void validate() const {
    require(blocks >= 2, "synth_planted: need at least two blocks");
    require(n_per_block >= 2, "synth_planted: blocks need at least two nodes");
    require(p_in > p_out, "synth_planted: p_in must exceed p_out");
    require(p_in <= 1.0 && p_out >= 0.0, "synth_planted: probabilities must lie in [0,1]");
    require(attr_dim > 0, "synth_planted: attr_dim must be positive");
    require(anomaly_rate >= 0.0 && anomaly_rate < 0.5, "synth_planted: anomaly_rate must lie in [0, 0.5)");
    double total = 0.0;
    for (double m : anomaly_mix) {
      require(m >= 0.0, "synth_planted: anomaly_mix entries must be non-negative");
      total += m;
    }
    require(anomaly_rate == 0.0 || total > 0.0, "synth_planted: anomaly_mix must not be all zero");
  }
};

struct PlantedDataset {
  DatasetBundle bundle;  // planted graph, labels = home block, anomalies set
  Graph clean;           // the same graph before planting
  std::vector<std::size_t> foreign_block;  // block used for planting (== home block for normal nodes)
};

namespace detail {

/// Splits `count` by proportions with largest-remainder rounding.
inline std::array<std::size_t, 3> apportion(std::size_t count, const std::array<double, 3>& mix) {
  const double total = mix[0] + mix[1] + mix[2];
  std::array<std::size_t, 3> out{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = total > 0.0 ? static_cast<double>(count) * mix[k] / total : 0.0;
    out[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - static_cast<double>(out[k]);
    assigned += out[k];
  }
  while (assigned < count) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (rem[k] > rem[best]) best = k;
    }
    ++out[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return out;
}

}  // namespace detail

/// Generates the block graph, then plants anomalies:
///  - structure: every edge of the node is replaced by as many edges (at least
///    one) to random nodes of one foreign block; attributes untouched;
///  - attribute: attributes resampled around a foreign block's center; edges untouched;
///  - combined: both, using the same foreign block.
inline PlantedDataset synth_planted(const PlantedConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t n = cfg.n_per_block * cfg.blocks;
  const auto m = static_cast<Eigen::Index>(cfg.attr_dim);

  std::vector<int> block(n);
  for (std::size_t i = 0; i < n; ++i) block[i] = static_cast<int>(i / cfg.n_per_block);

  Tensor2 centers(static_cast<Eigen::Index>(cfg.blocks), m);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = cfg.center_scale * gauss(rng);
  Tensor2 x(static_cast<Eigen::Index>(n), m);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < m; ++c) {
      x(static_cast<Eigen::Index>(i), c) = centers(block[i], c) + cfg.attr_noise * gauss(rng);
    }
  }
  std::set<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (unif(rng) < (block[u] == block[v] ? cfg.p_in : cfg.p_out)) edges.emplace(u, v);
    }
  }

  std::vector<std::string> names;
  for (std::size_t b = 0; b < cfg.blocks; ++b) names.push_back("block" + std::to_string(b));

  PlantedDataset out;
  out.clean = build_graph(n, std::vector<Edge>(edges.begin(), edges.end()), x, block);
  out.foreign_block.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) out.foreign_block[i] = static_cast<std::size_t>(block[i]);

  const auto n_anom = static_cast<std::size_t>(std::llround(cfg.anomaly_rate * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto counts = detail::apportion(n_anom, cfg.anomaly_mix);

  // kinds follow the shuffled order so that every block gets a mix
  std::vector<AnomalyKind> kinds(n, AnomalyKind::None);
  {
    std::size_t k = 0;
    for (int kind = 0; kind < 3; ++kind) {
      for (std::size_t c = 0; c < counts[kind]; ++c) kinds[order[k++]] = static_cast<AnomalyKind>(kind + 1);
    }
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_anom));
  std::sort(chosen.begin(), chosen.end());

  // detach every structure anomaly first so later rewiring cannot strip edges
  // that an earlier one just received
  std::vector<std::size_t> clean_degree(n, 0);
  for (const auto& [u, v] : edges) {
    ++clean_degree[u];
    ++clean_degree[v];
  }
  const auto rewired = [&](std::size_t i) {
    return kinds[i] == AnomalyKind::Structure || kinds[i] == AnomalyKind::Combined;
  };
  for (auto it = edges.begin(); it != edges.end();) {
    it = rewired(it->first) || rewired(it->second) ? edges.erase(it) : std::next(it);
  }

  for (std::size_t i : chosen) {
    const AnomalyKind kind = kinds[i];
    std::uniform_int_distribution<std::size_t> pick_block(0, cfg.blocks - 2);
    std::size_t foreign = pick_block(rng);
    if (foreign >= static_cast<std::size_t>(block[i])) ++foreign;
    out.foreign_block[i] = foreign;

    if (rewired(i)) {
      const std::size_t wanted = std::max<std::size_t>(clean_degree[i], 1);
      if (wanted > cfg.n_per_block) {
        throw InvalidArgument("synth_planted: node " + std::to_string(i) + " needs " + std::to_string(wanted) +
                              " foreign neighbours but blocks hold " + std::to_string(cfg.n_per_block));
      }
      std::vector<std::size_t> members(cfg.n_per_block);
      std::iota(members.begin(), members.end(), foreign * cfg.n_per_block);
      std::shuffle(members.begin(), members.end(), rng);
      for (std::size_t k = 0; k < wanted; ++k) edges.emplace(std::min(i, members[k]), std::max(i, members[k]));
    }
    if (kind == AnomalyKind::Attribute || kind == AnomalyKind::Combined) {
      for (Eigen::Index c = 0; c < m; ++c) {
        x(static_cast<Eigen::Index>(i), c) =
            centers(static_cast<Eigen::Index>(foreign), c) + cfg.attr_noise * gauss(rng);
      }
    }
  }

  out.bundle.name = "synthetic-planted";
  out.bundle.class_names = names;
  out.bundle.provenance.source = "synth_planted seed=" + std::to_string(seed);
  out.bundle.graph = build_graph(n, std::vector<Edge>(edges.begin(), edges.end()), std::move(x), block);
  out.bundle.provenance.checksum_edges = sha256_hex(encode_edges(out.bundle.graph));
  out.bundle.provenance.checksum_features = sha256_hex(encode_features(out.bundle.graph.attributes()));
  out.bundle.anomalies = std::move(kinds);
  return out;
}

/// Split for planted datasets: block `normal_class` is the normal community.
/// Its unplanted nodes are split 60/15/25 like make_splits; the anomalies planted
/// in that block are divided between validation and test in a 15:25 ratio (test
/// receives the rounding remainder). Other blocks stay out of the evaluation.
inline SplitSpec make_planted_splits(const DatasetBundle& bundle, int normal_class, std::uint64_t seed) {
  require(bundle.anomalies.has_value(), "make_planted_splits: dataset has no planted anomaly truth");
  const Graph& g = bundle.graph;
  const auto& kinds = *bundle.anomalies;
  std::vector<std::size_t> normals, planted;
  for (std::size_t i = 0; i < g.n_nodes(); ++i) {
    if (g.labels()[i] != normal_class) continue;
    (kinds[i] == AnomalyKind::None ? normals : planted).push_back(i);
  }
  require(normals.size() >= 10, "make_planted_splits: block " + std::to_string(normal_class) + " has " +
                                    std::to_string(normals.size()) + " normal nodes, need at least 10");
  require(!planted.empty(), "make_planted_splits: block " + std::to_string(normal_class) + " has no anomalies");
  std::mt19937_64 rng(seed);
  std::shuffle(normals.begin(), normals.end(), rng);
  std::shuffle(planted.begin(), planted.end(), rng);
  const std::size_t n = normals.size();
  const std::size_t n_val = 15 * n / 100;
  const std::size_t n_test = 25 * n / 100;
  const std::size_t n_train = n - n_val - n_test;
  const std::size_t a_val = 15 * planted.size() / 40;

  SplitSpec s;
  s.normal_class = normal_class;
  s.seed = seed;
  s.train.assign(normals.begin(), normals.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(s.train.begin(), s.train.end());
  for (std::size_t i = 0; i < n_val; ++i) {
    s.val.push_back(normals[n_train + i]);
    s.val_truth.push_back(0);
  }
  for (std::size_t i = 0; i < n_test; ++i) {
    s.test.push_back(normals[n_train + n_val + i]);
    s.test_truth.push_back(0);
  }
  for (std::size_t k = 0; k < planted.size(); ++k) {
    auto& idx = k < a_val ? s.val : s.test;
    auto& truth = k < a_val ? s.val_truth : s.test_truth;
    idx.push_back(planted[k]);
    truth.push_back(1);
  }
  detail::sort_with_truth(s.val, s.val_truth);
  detail::sort_with_truth(s.test, s.test_truth);
  return s;
}

}  // namespace dsvdae
