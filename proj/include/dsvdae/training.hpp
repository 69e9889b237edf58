#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dsvdae/graph.hpp"
#include "dsvdae/hypersphere.hpp"
#include "dsvdae/model.hpp"
#include "dsvdae/parameters.hpp"

namespace dsvdae {

enum class StructureLossPolicy { Full, Sampled };
enum class GraphMode { TrainInduced, Full };

inline std::string_view to_string(GraphMode m) { return m == GraphMode::Full ? "full" : "train-induced"; }
inline GraphMode parse_graph_mode(std::string_view s) {
  if (s == "full") return GraphMode::Full;
  if (s == "train-induced") return GraphMode::TrainInduced;
  throw InvalidArgument("unknown graph mode '" + std::string(s) + "' (expected train-induced or full)");
}
inline std::string_view to_string(StructureLossPolicy p) { return p == StructureLossPolicy::Full ? "full" : "sampled"; }

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 5000;
  AdamConfig adam;
  double beta = 0.2;
  double mu_s = 0.9;
  double mu_a = 0.2;
  std::uint64_t seed = 0;
  StructureLossPolicy structure_loss = StructureLossPolicy::Full;
  // non-edges sampled per epoch under the sampled policy; 0 means 10 x |E|
  std::size_t sampled_negatives = 0;
  GraphMode graph_mode = GraphMode::TrainInduced;
  std::size_t checkpoint_every = 0;
  bool select_best_validation = false;
  std::size_t validation_every = 100;

  void validate() const {
    model.validate();
    require(epochs >= 1, "TrainConfig: epochs must be >= 1");
    require(beta >= 0.0 && beta <= 1.0, "TrainConfig: beta must lie in [0,1], got " + std::to_string(beta));
    check_mu(mu_s);
    check_mu(mu_a);
    require(adam.learning_rate > 0.0, "TrainConfig: learning rate must be positive");
    require(!select_best_validation || validation_every >= 1, "TrainConfig: validation_every must be >= 1");
  }
};

/// One row of the loss history. Component values are unweighted.
struct LossRecord {
  std::size_t epoch = 0;
  double total = 0.0;
  double sphere_s = 0.0;
  double sphere_a = 0.0;
  double recon_s = 0.0;
  double recon_a = 0.0;
  double variance_s = 0.0;  // mean per-dimension variance of the training embeddings
  double variance_a = 0.0;
};

struct TrainedModel {
  TrainConfig config;
  ParameterStore params;
  Hypersphere structure;
  Hypersphere attribute;
  std::vector<LossRecord> history;
  std::size_t epochs_run = 0;
  std::size_t selected_epoch = 0;
};

struct TrainHooks {
  std::function<void(const LossRecord&)> on_epoch;
  std::function<void(const TrainedModel&)> on_checkpoint;
  // validation score of a snapshot (higher is better); used with select_best_validation
  std::function<double(const TrainedModel&)> validation_score;
};

// ---------------------------------------------------------------- losses

/// Mean squared error over every entry.
inline double structure_recon_loss(const Tensor2& a_hat, const Tensor2& a) {
  require(a_hat.rows() == a.rows() && a_hat.cols() == a.cols(), "structure_recon_loss: shape mismatch");
  if (a.size() == 0) return 0.0;
  return (a_hat - a).squaredNorm() / static_cast<double>(a.size());
}

inline double attribute_recon_loss(const Tensor2& x_hat, const Tensor2& x) {
  require(x_hat.rows() == x.rows() && x_hat.cols() == x.cols(), "attribute_recon_loss: shape mismatch");
  if (x.size() == 0) return 0.0;
  return (x_hat - x).squaredNorm() / static_cast<double>(x.size());
}

/// Entry set for the sampled structure loss: all edges plus sampled non-edges,
/// indexed in the loss-row numbering.
struct SampledEntries {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> targets;
};

/// Mean squared error of sigmoid(z_i . z_j) against the sampled targets, and its
/// gradient w.r.t. the embeddings.
inline double sampled_structure_loss(const Tensor2& zs, const SampledEntries& entries, Tensor2* grad) {
  require(entries.pairs.size() == entries.targets.size(), "sampled_structure_loss: pair/target count mismatch");
  if (grad != nullptr) *grad = Tensor2::Zero(zs.rows(), zs.cols());
  if (entries.pairs.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(entries.pairs.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < entries.pairs.size(); ++k) {
    const auto [i, j] = entries.pairs[k];
    const auto ii = static_cast<Eigen::Index>(i);
    const auto jj = static_cast<Eigen::Index>(j);
    const double p = sigmoid(zs.row(ii).dot(zs.row(jj)));
    const double r = p - entries.targets[k];
    loss += r * r;
    if (grad != nullptr) {
      const double g = 2.0 * r * inv * p * (1.0 - p);
      grad->row(ii) += g * zs.row(jj);
      grad->row(jj) += g * zs.row(ii);
    }
  }
  return loss * inv;
}

/// Multipliers of the four loss components for a variant.
struct LossWeights {
  double sphere_s = 0.0;
  double recon_s = 0.0;
  double sphere_a = 0.0;
  double recon_a = 0.0;
};

/// beta (L_s + sMSE) + (1 - beta)(L_a + aMSE), minus the terms a variant removes.
/// Single-branch variants keep their group with weight one.
inline LossWeights loss_weights(Variant v, double beta) {
  require(beta >= 0.0 && beta <= 1.0, "total_loss: beta must lie in [0,1], got " + std::to_string(beta));
  const Branches b = branches(v);
  LossWeights w;
  if (b.structure_encoder && b.attribute_encoder) {
    w = {beta, beta, 1.0 - beta, 1.0 - beta};
  } else if (b.structure_encoder) {
    w = {1.0, 1.0, 0.0, 0.0};
  } else {
    w = {0.0, 0.0, 1.0, 1.0};
  }
  if (!b.spheres) w.sphere_s = w.sphere_a = 0.0;
  if (!b.structure_decoder) w.recon_s = 0.0;
  if (!b.attribute_decoder) w.recon_a = 0.0;
  return w;
}

struct LossBreakdown {
  double total = 0.0;
  double sphere_s = 0.0;
  double sphere_a = 0.0;
  double recon_s = 0.0;
  double recon_a = 0.0;
};

inline double combine(const LossWeights& w, const LossBreakdown& l) {
  return w.sphere_s * l.sphere_s + w.recon_s * l.recon_s + w.sphere_a * l.sphere_a + w.recon_a * l.recon_a;
}

/// Targets and sphere state for evaluating the composite loss on a trace.
struct LossContext {
  Tensor2 adjacency_target;  // |rows| x |rows|; unused under the sampled policy
  std::optional<SampledEntries> sampled;
  Tensor2 attribute_target;  // |rows| x M
  Hypersphere structure;
  Hypersphere attribute;
  double beta = 0.5;
};

/// Composite loss of a traced forward pass. When `up` is non-null it receives the
/// weighted upstream gradients for `backward`. Components whose weight is zero are
/// still reported when computable, so histories stay comparable across variants,
/// except sphere terms of variants without spheres, which are reported as zero.
inline LossBreakdown evaluate_loss(const ForwardTrace& t, const LossContext& ctx, UpstreamGradients* up) {
  if (!t.completed) throw std::logic_error("evaluate_loss: no completed forward trace");
  const Branches b = branches(t.cfg.variant);
  const LossWeights w = loss_weights(t.cfg.variant, ctx.beta);
  LossBreakdown l;
  const auto n = b.structure_encoder ? t.zs.rows() : t.za.rows();
  const auto d = static_cast<Eigen::Index>(t.cfg.embed_dim);
  if (up != nullptr) {
    *up = UpstreamGradients{};
    if (b.structure_encoder) up->d_zs = Tensor2::Zero(n, d);
    if (b.attribute_encoder) up->d_za = Tensor2::Zero(n, d);
  }

  if (b.structure_encoder) {
    if (b.spheres) {
      l.sphere_s = sphere_loss(t.zs_rows, ctx.structure);
      if (up != nullptr && w.sphere_s != 0.0) {
        scatter_add_rows(up->d_zs, w.sphere_s * sphere_loss_gradient(t.zs_rows, ctx.structure), t.rows);
      }
    }
    if (b.structure_decoder) {
      if (ctx.sampled) {
        Tensor2 g;
        l.recon_s = sampled_structure_loss(t.zs_rows, *ctx.sampled, up != nullptr ? &g : nullptr);
        if (up != nullptr && w.recon_s != 0.0) scatter_add_rows(up->d_zs, w.recon_s * g, t.rows);
      } else {
        l.recon_s = structure_recon_loss(t.a_hat, ctx.adjacency_target);
        if (up != nullptr && w.recon_s != 0.0) {
          up->d_a_hat = (2.0 * w.recon_s / static_cast<double>(t.a_hat.size())) * (t.a_hat - ctx.adjacency_target);
        }
      }
    }
  }
  if (b.attribute_encoder) {
    if (b.spheres) {
      const Tensor2 za_rows = gather_rows(t.za, t.rows);
      l.sphere_a = sphere_loss(za_rows, ctx.attribute);
      if (up != nullptr && w.sphere_a != 0.0) {
        scatter_add_rows(up->d_za, w.sphere_a * sphere_loss_gradient(za_rows, ctx.attribute), t.rows);
      }
    }
  }
  if (b.attribute_decoder) {
    l.recon_a = attribute_recon_loss(t.x_hat, ctx.attribute_target);
    if (up != nullptr && w.recon_a != 0.0) {
      up->d_x_hat = (2.0 * w.recon_a / static_cast<double>(t.x_hat.size())) * (t.x_hat - ctx.attribute_target);
    }
  }
  l.total = combine(w, l);
  return l;
}

/// Composite loss of a full forward pass over graph `g` (every node is a loss node).
inline double total_loss(const ForwardOutputs& fwd, const Hypersphere& structure, const Hypersphere& attribute,
                         const Graph& g, Variant variant, double beta) {
  const Branches b = branches(variant);
  const LossWeights w = loss_weights(variant, beta);
  LossBreakdown l;
  if (b.structure_encoder && b.spheres) l.sphere_s = sphere_loss(fwd.structure_embedding(), structure);
  if (b.attribute_encoder && b.spheres) l.sphere_a = sphere_loss(fwd.attribute_embedding(), attribute);
  if (b.structure_decoder) l.recon_s = structure_recon_loss(fwd.reconstructed_adjacency(), dense_adjacency(g));
  if (b.attribute_decoder) l.recon_a = attribute_recon_loss(fwd.reconstructed_attributes(), g.attributes());
  return combine(w, l);
}

// ---------------------------------------------------------------- training loop

namespace detail {

inline double mean_column_variance(const Tensor2& z) {
  if (z.rows() == 0) return 0.0;
  const RowVector mean = z.colwise().mean();
  return (z.rowwise() - mean).squaredNorm() / static_cast<double>(z.rows() * z.cols());
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Edges among `rows` plus `negatives` uniformly drawn non-edge entries.
inline SampledEntries sample_structure_entries(const Graph& g, const std::vector<std::size_t>& rows,
                                               std::size_t negatives, std::uint64_t seed) {
  std::vector<std::size_t> remap(g.n_nodes(), g.n_nodes());
  for (std::size_t i = 0; i < rows.size(); ++i) remap[rows[i]] = i;
  SampledEntries e;
  std::unordered_set<std::uint64_t> edge_keys;
  const std::uint64_t k = rows.size();
  for (const auto& [u, v] : g.edges()) {
    if (remap[u] == g.n_nodes() || remap[v] == g.n_nodes()) continue;
    e.pairs.emplace_back(remap[u], remap[v]);
    e.targets.push_back(1.0);
    edge_keys.insert(remap[u] * k + remap[v]);
    edge_keys.insert(remap[v] * k + remap[u]);
  }
  const std::uint64_t zero_entries = k * k - edge_keys.size();
  if (zero_entries == 0) return e;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
  for (std::size_t s = 0; s < negatives; ++s) {
    std::size_t i = 0;
    std::size_t j = 0;
    do {
      i = pick(rng);
      j = pick(rng);
    } while (edge_keys.count(i * k + j) != 0);
    e.pairs.emplace_back(i, j);
    e.targets.push_back(0.0);
  }
  return e;
}

}  // namespace detail

/// Training loop: centers from an untrained pass, radii start at zero; each epoch
/// runs the forward pass, the composite loss, one full-batch Adam step, and then
/// resets both radii to the (1 - mu) distance quantile of the training nodes
/// (distances taken from that epoch's forward pass).
inline TrainedModel train(const Graph& g, const std::vector<std::size_t>& train_idx, const TrainConfig& cfg,
                          const TrainHooks& hooks = {}) {
  cfg.validate();
  require(!train_idx.empty(), "train: empty training set");
  require(g.n_attrs() == cfg.model.n_attrs, "train: model n_attrs (" + std::to_string(cfg.model.n_attrs) +
                                                ") != graph attributes (" + std::to_string(g.n_attrs()) + ")");
  for (std::size_t i : train_idx) {
    require(i < g.n_nodes(), "train: training index out of range");
    require(g.labels()[i] == g.labels()[train_idx.front()], "train: training nodes must share one class");
  }
  const Branches b = branches(cfg.model.variant);

  // encoding graph and loss rows
  Graph local;
  std::vector<std::size_t> rows;
  const Graph* enc = &g;
  if (cfg.graph_mode == GraphMode::TrainInduced) {
    local = induced_subgraph(g, train_idx);
    enc = &local;
    rows.resize(train_idx.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  } else {
    rows = train_idx;
  }
  const SparseMatrix adj = normalized_adjacency(*enc, cfg.model.self_loops);
  const Tensor2& x = enc->attributes();

  LossContext ctx;
  ctx.beta = cfg.beta;
  ctx.attribute_target = gather_rows(x, rows);
  const bool sampled = cfg.structure_loss == StructureLossPolicy::Sampled && b.structure_decoder;
  std::size_t row_edges = 0;
  if (sampled) {
    row_edges = detail::sample_structure_entries(*enc, rows, 0, 0).pairs.size();
    const std::size_t k = cfg.sampled_negatives == 0 ? 10 * row_edges : cfg.sampled_negatives;
    require(k >= row_edges, "train: sampled policy needs at least |E| negatives");
  } else if (b.structure_decoder) {
    ctx.adjacency_target = dense_adjacency(*enc, rows);
  }
  const std::size_t negatives = cfg.sampled_negatives == 0 ? 10 * row_edges : cfg.sampled_negatives;

  TrainedModel model;
  model.config = cfg;
  model.params = init_parameters(cfg.model, cfg.seed);
  model.structure.mu = cfg.mu_s;
  model.attribute.mu = cfg.mu_a;
  {
    const ForwardTrace t0 = forward_trace(adj, x, model.params, cfg.model, rows, false);
    if (b.structure_encoder) model.structure.center = init_center(t0.zs_rows);
    if (b.attribute_encoder) model.attribute.center = init_center(gather_rows(t0.za, rows));
  }
  model.structure.radius = 0.0;
  model.attribute.radius = 0.0;

  std::optional<TrainedModel> best;
  double best_score = -1.0;
  UpstreamGradients up;
  model.history.reserve(cfg.epochs);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (sampled) ctx.sampled = detail::sample_structure_entries(*enc, rows, negatives, detail::mix_seed(cfg.seed, epoch));
    ctx.structure = model.structure;
    ctx.attribute = model.attribute;

    const ForwardTrace t = forward_trace(adj, x, model.params, cfg.model, rows, !sampled);
    const LossBreakdown l = evaluate_loss(t, ctx, &up);
    if (!std::isfinite(l.total)) {
      throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch));
    }
    backward(t, up, model.params);
    adam_step(model.params, cfg.adam);

    LossRecord rec{epoch, l.total, l.sphere_s, l.sphere_a, l.recon_s, l.recon_a, 0.0, 0.0};
    if (b.structure_encoder) {
      model.structure.radius = quantile_radius(t.zs_rows, model.structure);
      rec.variance_s = detail::mean_column_variance(t.zs_rows);
    }
    if (b.attribute_encoder) {
      const Tensor2 za_rows = gather_rows(t.za, rows);
      model.attribute.radius = quantile_radius(za_rows, model.attribute);
      rec.variance_a = detail::mean_column_variance(za_rows);
    }
    model.history.push_back(rec);
    model.epochs_run = epoch;
    model.selected_epoch = epoch;
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) hooks.on_checkpoint(model);
    if (cfg.select_best_validation && hooks.validation_score &&
        (epoch % cfg.validation_every == 0 || epoch == cfg.epochs)) {
      const double score = hooks.validation_score(model);
      if (!best || score > best_score) {
        best_score = score;
        best = model;
      }
    }
  }
  if (best) {
    best->history = std::move(model.history);
    best->epochs_run = cfg.epochs;
    return std::move(*best);
  }
  return model;
}

/// Forward pass of a trained model over every node of `g`.
inline ForwardOutputs embed(const TrainedModel& m, const Graph& g) { return forward(g, m.params, m.config.model); }

}  // namespace dsvdae
