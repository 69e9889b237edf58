#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dsvdae/activation.hpp"
#include "dsvdae/graph.hpp"
#include "dsvdae/parameters.hpp"
#include "dsvdae/sparse.hpp"
#include "dsvdae/tensor.hpp"

namespace dsvdae {

/// The full model and its six ablations.
enum class Variant { Full, WoOC, WoAEs, WoAEa, WoDea, WoDes, WoDeBoth };

inline constexpr Variant kAllVariants[] = {Variant::Full,  Variant::WoOC,  Variant::WoAEs,   Variant::WoAEa,
                                           Variant::WoDea, Variant::WoDes, Variant::WoDeBoth};

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::WoOC: return "wo-oc";
    case Variant::WoAEs: return "wo-aes";
    case Variant::WoAEa: return "wo-aea";
    case Variant::WoDea: return "wo-dea";
    case Variant::WoDes: return "wo-des";
    case Variant::WoDeBoth: return "wo-deboth";
  }
  return "?";
}

inline Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw InvalidArgument("unknown variant '" + std::string(name) +
                        "' (expected full, wo-oc, wo-aes, wo-aea, wo-dea, wo-des, wo-deboth)");
}

/// Which parts of the network a variant evaluates and trains.
struct Branches {
  bool structure_encoder = true;
  bool attribute_encoder = true;
  bool structure_decoder = true;
  bool attribute_decoder = true;
  bool spheres = true;
};

inline Branches branches(Variant v) {
  Branches b;
  switch (v) {
    case Variant::Full: break;
    case Variant::WoOC: b.spheres = false; break;
    case Variant::WoAEs:
      b.structure_encoder = false;
      b.structure_decoder = false;
      break;
    case Variant::WoAEa:
      b.attribute_encoder = false;
      b.attribute_decoder = false;
      break;
    case Variant::WoDea: b.attribute_decoder = false; break;
    case Variant::WoDes: b.structure_decoder = false; break;
    case Variant::WoDeBoth:
      b.structure_decoder = false;
      b.attribute_decoder = false;
      break;
  }
  return b;
}

/// Layer widths are output widths. The encoders must end at `embed_dim` and the
/// attribute decoder at `n_attrs`.
struct ModelConfig {
  std::size_t n_attrs = 0;
  std::size_t embed_dim = 32;
  std::vector<std::size_t> structure_layers{64, 32};
  std::vector<std::size_t> attribute_encoder_layers{64, 32};
  std::vector<std::size_t> attribute_decoder_layers{64, 0};
  Activation hidden_activation = Activation::ReLU;
  Activation output_activation = Activation::Sigmoid;
  bool self_loops = true;
  Variant variant = Variant::Full;

  /// Two-layer encoders/decoder with the given hidden width.
  static ModelConfig standard(std::size_t n_attrs, std::size_t embed_dim = 32, std::size_t hidden = 64) {
    ModelConfig c;
    c.n_attrs = n_attrs;
    c.embed_dim = embed_dim;
    c.structure_layers = {hidden, embed_dim};
    c.attribute_encoder_layers = {hidden, embed_dim};
    c.attribute_decoder_layers = {hidden, n_attrs};
    return c;
  }

  void validate() const {
    require(n_attrs > 0, "ModelConfig: n_attrs must be positive");
    require(embed_dim > 0, "ModelConfig: embed_dim must be positive");
    require(!structure_layers.empty() && structure_layers.back() == embed_dim,
            "ModelConfig: structure encoder must end at embed_dim");
    require(!attribute_encoder_layers.empty() && attribute_encoder_layers.back() == embed_dim,
            "ModelConfig: attribute encoder must end at embed_dim");
    require(!attribute_decoder_layers.empty() && attribute_decoder_layers.back() == n_attrs,
            "ModelConfig: attribute decoder must end at n_attrs");
    for (auto w : structure_layers) require(w > 0, "ModelConfig: zero layer width");
    for (auto w : attribute_encoder_layers) require(w > 0, "ModelConfig: zero layer width");
    for (auto w : attribute_decoder_layers) require(w > 0, "ModelConfig: zero layer width");
  }
};

namespace detail {

inline std::string layer_name(std::string_view block, char kind, std::size_t layer) {
  return std::string(block) + "." + kind + std::to_string(layer + 1);
}

}  // namespace detail

inline constexpr std::string_view kStructureEncoder = "structure_encoder";
inline constexpr std::string_view kAttributeEncoder = "attribute_encoder";
inline constexpr std::string_view kAttributeDecoder = "attribute_decoder";

/// Glorot-uniform weights, zero biases. Every variant draws the same random
/// sequence, so shared seeds give identical starting weights across ablations;
/// parameters of removed branches are created but marked inactive.
inline ParameterStore init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Branches b = branches(cfg.variant);
  std::mt19937_64 rng(seed);
  ParameterStore store;

  std::size_t in = cfg.n_attrs;
  for (std::size_t l = 0; l < cfg.structure_layers.size(); ++l) {
    store.add(detail::layer_name(kStructureEncoder, 'W', l), glorot_uniform(in, cfg.structure_layers[l], rng),
              b.structure_encoder);
    in = cfg.structure_layers[l];
  }
  in = cfg.n_attrs;
  for (std::size_t l = 0; l < cfg.attribute_encoder_layers.size(); ++l) {
    const auto out = cfg.attribute_encoder_layers[l];
    store.add(detail::layer_name(kAttributeEncoder, 'W', l), glorot_uniform(in, out, rng), b.attribute_encoder);
    store.add(detail::layer_name(kAttributeEncoder, 'b', l), Tensor2::Zero(1, static_cast<Eigen::Index>(out)),
              b.attribute_encoder);
    in = out;
  }
  in = cfg.embed_dim;
  for (std::size_t l = 0; l < cfg.attribute_decoder_layers.size(); ++l) {
    const auto out = cfg.attribute_decoder_layers[l];
    store.add(detail::layer_name(kAttributeDecoder, 'W', l), glorot_uniform(in, out, rng), b.attribute_decoder);
    store.add(detail::layer_name(kAttributeDecoder, 'b', l), Tensor2::Zero(1, static_cast<Eigen::Index>(out)),
              b.attribute_decoder);
    in = out;
  }
  return store;
}

struct LayerCache {
  Tensor2 input;  // empty when the layer read `sparse_input` instead
  Tensor2 pre;
  Tensor2 out;
  std::shared_ptr<const SparseMatrix> sparse_input;
};

/// Attribute matrices at most this dense feed the first encoder layers through
/// CSR products.
inline constexpr double kSparseInputDensity = 0.1;

inline std::shared_ptr<const SparseMatrix> sparse_input(const Tensor2& x) {
  if (density(x) > kSparseInputDensity) return nullptr;
  return std::make_shared<const SparseMatrix>(SparseMatrix::from_dense(x));
}

namespace detail {

inline Activation layer_activation(const ModelConfig& cfg, std::size_t layer, std::size_t count, Activation last) {
  return layer + 1 == count ? last : cfg.hidden_activation;
}

inline Tensor2 gcn_stack(const SparseMatrix& adj, const Tensor2& x, const ParameterStore& params,
                         const ModelConfig& cfg, std::vector<LayerCache>* cache,
                         std::shared_ptr<const SparseMatrix> xs = nullptr) {
  require(adj.rows == static_cast<std::size_t>(x.rows()) && adj.cols == adj.rows,
          "structure_encode: adjacency does not match attribute rows");
  Tensor2 h = x;
  const std::size_t n_layers = cfg.structure_layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Tensor2& w = params.at(layer_name(kStructureEncoder, 'W', l)).value;
    require(w.rows() == h.cols(), "structure_encode: layer " + std::to_string(l + 1) + " expects input width " +
                                      std::to_string(w.rows()) + ", got " + std::to_string(h.cols()));
    const bool sparse = l == 0 && xs != nullptr;
    Tensor2 hw = sparse ? spmm(*xs, w) : Tensor2(h * w);
    Tensor2 pre = spmm(adj, hw);
    Tensor2 out = activate(layer_activation(cfg, l, n_layers, Activation::Identity), pre);
    if (cache != nullptr) {
      cache->push_back({sparse ? Tensor2() : std::move(h), std::move(pre), out, sparse ? xs : nullptr});
    }
    h = std::move(out);
  }
  return h;
}

inline Tensor2 mlp_stack(std::string_view block, const std::vector<std::size_t>& widths, Activation last,
                         const Tensor2& x, const ParameterStore& params, const ModelConfig& cfg,
                         std::vector<LayerCache>* cache, std::shared_ptr<const SparseMatrix> xs = nullptr) {
  Tensor2 h = x;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const Tensor2& w = params.at(layer_name(block, 'W', l)).value;
    const Tensor2& bias = params.at(layer_name(block, 'b', l)).value;
    require(w.rows() == h.cols(), std::string(block) + ": layer " + std::to_string(l + 1) + " expects input width " +
                                      std::to_string(w.rows()) + ", got " + std::to_string(h.cols()));
    require(bias.cols() == w.cols(), std::string(block) + ": bias width mismatch");
    const Activation act = layer_activation(cfg, l, widths.size(), last);
    const bool sparse = l == 0 && xs != nullptr;
    Tensor2 pre;
    Tensor2 out;
    if (sparse) {
      pre = spmm(*xs, w);
      pre.rowwise() += bias.row(0);
      out = activate(act, pre);
    } else {
      out = dense_affine(h, w, bias.row(0), act, &pre);
    }
    if (cache != nullptr) {
      cache->push_back({sparse ? Tensor2() : std::move(h), std::move(pre), out, sparse ? xs : nullptr});
    }
    h = std::move(out);
  }
  return h;
}

}  // namespace detail

/// Stacked GCN layers over a normalized adjacency; hidden layers use the configured
/// activation, the last layer is linear. No biases.
inline Tensor2 structure_encode(const SparseMatrix& normalized_adj, const Tensor2& x, const ParameterStore& params,
                                const ModelConfig& cfg) {
  return detail::gcn_stack(normalized_adj, x, params, cfg, nullptr);
}

/// Inner-product decoder sigmoid(Z Z^T). The result is exactly symmetric.
inline Tensor2 structure_decode(const Tensor2& zs) {
  Tensor2 logits = zs * zs.transpose();
  const Eigen::Index n = logits.rows();
  Tensor2 a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = sigmoid(logits(i, j));
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

/// Per-row MLP over the raw attributes; uses no adjacency.
inline Tensor2 attribute_encode(const Tensor2& x, const ParameterStore& params, const ModelConfig& cfg) {
  require(static_cast<std::size_t>(x.cols()) == cfg.n_attrs, "attribute_encode: attribute width mismatch");
  return detail::mlp_stack(kAttributeEncoder, cfg.attribute_encoder_layers, Activation::Identity, x, params, cfg,
                           nullptr);
}

inline Tensor2 fuse(const Tensor2& zs, const Tensor2& za) {
  require(zs.rows() == za.rows() && zs.cols() == za.cols(),
          "fuse: shape mismatch " + shape_string(zs) + " vs " + shape_string(za));
  return zs + za;
}

inline Tensor2 attribute_decode(const Tensor2& zf, const ParameterStore& params, const ModelConfig& cfg) {
  require(static_cast<std::size_t>(zf.cols()) == cfg.embed_dim, "attribute_decode: embedding width mismatch");
  return detail::mlp_stack(kAttributeDecoder, cfg.attribute_decoder_layers, cfg.output_activation, zf, params, cfg,
                           nullptr);
}

/// Branch outputs of one forward pass; outputs of removed branches are absent.
class ForwardOutputs {
 public:
  std::optional<Tensor2> zs, za, zf, a_hat, x_hat;

  const Tensor2& structure_embedding() const { return get(zs, "Z^s"); }
  const Tensor2& attribute_embedding() const { return get(za, "Z^a"); }
  const Tensor2& fused_embedding() const { return get(zf, "Z^f"); }
  const Tensor2& reconstructed_adjacency() const { return get(a_hat, "A_hat"); }
  const Tensor2& reconstructed_attributes() const { return get(x_hat, "X_hat"); }

 private:
  static const Tensor2& get(const std::optional<Tensor2>& t, const char* what) {
    if (!t) throw InvalidArgument(std::string("output ") + what + " is not produced by this variant");
    return *t;
  }
};

/// Everything the reverse pass needs from one forward evaluation. Embeddings
/// cover every node of the encoding graph; decoders only run on `rows`.
struct ForwardTrace {
  bool completed = false;
  ModelConfig cfg;
  const SparseMatrix* adjacency = nullptr;
  std::vector<std::size_t> rows;
  std::vector<LayerCache> structure_layers;
  std::vector<LayerCache> attribute_encoder_layers;
  std::vector<LayerCache> attribute_decoder_layers;
  Tensor2 zs;       // N x D
  Tensor2 za;       // N x D
  Tensor2 zs_rows;  // |rows| x D
  Tensor2 zf;       // |rows| x D
  Tensor2 a_hat;    // |rows| x |rows|, empty when not decoded
  Tensor2 x_hat;    // |rows| x M
};

/// Forward pass that records layer caches. `rows` selects the nodes fed to the
/// decoders (all nodes when empty). With `decode_structure` false the dense
/// reconstruction is skipped even when the variant has a structure decoder
/// (used by sampled structure losses).
inline ForwardTrace forward_trace(const SparseMatrix& normalized_adj, const Tensor2& x, const ParameterStore& params,
                                  const ModelConfig& cfg, const std::vector<std::size_t>& rows = {},
                                  bool decode_structure = true) {
  cfg.validate();
  require(static_cast<std::size_t>(x.cols()) == cfg.n_attrs, "forward: attribute width mismatch");
  const Branches b = branches(cfg.variant);
  ForwardTrace t;
  t.cfg = cfg;
  t.adjacency = &normalized_adj;
  if (rows.empty()) {
    t.rows.resize(static_cast<std::size_t>(x.rows()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) t.rows[i] = i;
  } else {
    t.rows = rows;
  }

  const auto xs = b.structure_encoder || b.attribute_encoder ? sparse_input(x) : nullptr;
  if (b.structure_encoder) {
    t.zs = detail::gcn_stack(normalized_adj, x, params, cfg, &t.structure_layers, xs);
    t.zs_rows = gather_rows(t.zs, t.rows);
    if (b.structure_decoder && decode_structure) t.a_hat = structure_decode(t.zs_rows);
  }
  if (b.attribute_encoder) {
    t.za = detail::mlp_stack(kAttributeEncoder, cfg.attribute_encoder_layers, Activation::Identity, x, params, cfg,
                             &t.attribute_encoder_layers, xs);
  }
  if (b.attribute_decoder) {
    Tensor2 za_rows = gather_rows(t.za, t.rows);
    t.zf = b.structure_encoder ? fuse(t.zs_rows, za_rows) : za_rows;
    t.x_hat = detail::mlp_stack(kAttributeDecoder, cfg.attribute_decoder_layers, cfg.output_activation, t.zf, params,
                                cfg, &t.attribute_decoder_layers);
  } else if (b.structure_encoder && b.attribute_encoder) {
    t.zf = fuse(t.zs_rows, gather_rows(t.za, t.rows));
  }
  t.completed = true;
  return t;
}

inline ForwardOutputs outputs_of(const ForwardTrace& t) {
  const Branches b = branches(t.cfg.variant);
  ForwardOutputs out;
  if (b.structure_encoder) out.zs = t.zs;
  if (b.attribute_encoder) out.za = t.za;
  if (t.zf.size() > 0) out.zf = t.zf;
  if (t.a_hat.size() > 0) out.a_hat = t.a_hat;
  if (b.attribute_decoder) out.x_hat = t.x_hat;
  return out;
}

/// Full forward pass over every node of `g`.
inline ForwardOutputs forward(const Graph& g, const ParameterStore& params, const ModelConfig& cfg) {
  const SparseMatrix adj = normalized_adjacency(g, cfg.self_loops);
  return outputs_of(forward_trace(adj, g.attributes(), params, cfg));
}

/// Loss gradients arriving at the trace outputs. Empty tensors mean "no gradient".
struct UpstreamGradients {
  Tensor2 d_zs;     // N x D, added directly to the structure embedding
  Tensor2 d_za;     // N x D
  Tensor2 d_a_hat;  // |rows| x |rows|
  Tensor2 d_x_hat;  // |rows| x M
};

namespace detail {

inline void backprop_mlp(std::string_view block, const std::vector<LayerCache>& caches, const ModelConfig& cfg,
                         Activation last, Tensor2 grad, ParameterStore& params, Tensor2* d_input) {
  for (std::size_t l = caches.size(); l-- > 0;) {
    const LayerCache& c = caches[l];
    const Tensor2 d_pre = activation_backward(layer_activation(cfg, l, caches.size(), last), c.pre, c.out, grad);
    Parameter& w = params.at(layer_name(block, 'W', l));
    Parameter& b = params.at(layer_name(block, 'b', l));
    if (c.sparse_input) {
      w.grad = spmm_transposed(*c.sparse_input, d_pre);
    } else {
      w.grad.noalias() = c.input.transpose() * d_pre;
    }
    b.grad = d_pre.colwise().sum();
    if (l > 0 || d_input != nullptr) {
      Tensor2 d_in = d_pre * w.value.transpose();
      if (l > 0) {
        grad = std::move(d_in);
      } else {
        *d_input = std::move(d_in);
      }
    }
  }
}

inline void backprop_gcn(const std::vector<LayerCache>& caches, const SparseMatrix& adj, const ModelConfig& cfg,
                         Tensor2 grad, ParameterStore& params) {
  for (std::size_t l = caches.size(); l-- > 0;) {
    const LayerCache& c = caches[l];
    const Tensor2 d_pre =
        activation_backward(layer_activation(cfg, l, caches.size(), Activation::Identity), c.pre, c.out, grad);
    // the normalized adjacency is symmetric, so it is its own transpose
    const Tensor2 d_hw = spmm(adj, d_pre);
    Parameter& w = params.at(layer_name(kStructureEncoder, 'W', l));
    if (c.sparse_input) {
      w.grad = spmm_transposed(*c.sparse_input, d_hw);
    } else {
      w.grad.noalias() = c.input.transpose() * d_hw;
    }
    if (l > 0) grad = d_hw * w.value.transpose();
  }
}

}  // namespace detail

/// Reverse pass through the traced network. Overwrites every gradient buffer in
/// `params` (parameters off the active path end with zero gradient).
inline void backward(const ForwardTrace& t, const UpstreamGradients& up, ParameterStore& params) {
  if (!t.completed) throw std::logic_error("backward: no completed forward trace");
  const Branches b = branches(t.cfg.variant);
  params.zero_grad();
  const auto n = static_cast<Eigen::Index>(b.structure_encoder ? t.zs.rows() : t.za.rows());
  const auto d = static_cast<Eigen::Index>(t.cfg.embed_dim);

  Tensor2 d_zs = b.structure_encoder ? Tensor2::Zero(n, d) : Tensor2();
  Tensor2 d_za = b.attribute_encoder ? Tensor2::Zero(n, d) : Tensor2();

  if (up.d_x_hat.size() > 0) {
    require(b.attribute_decoder, "backward: attribute reconstruction gradient for a variant without that decoder");
    require(up.d_x_hat.rows() == t.x_hat.rows() && up.d_x_hat.cols() == t.x_hat.cols(),
            "backward: d_x_hat shape mismatch");
    Tensor2 d_zf;
    detail::backprop_mlp(kAttributeDecoder, t.attribute_decoder_layers, t.cfg, t.cfg.output_activation, up.d_x_hat,
                         params, &d_zf);
    // fusion is an element-wise sum: both embeddings receive the same gradient
    if (b.structure_encoder) scatter_add_rows(d_zs, d_zf, t.rows);
    if (b.attribute_encoder) scatter_add_rows(d_za, d_zf, t.rows);
  }

  if (up.d_a_hat.size() > 0) {
    require(t.a_hat.size() > 0, "backward: adjacency gradient without a decoded adjacency");
    require(up.d_a_hat.rows() == t.a_hat.rows() && up.d_a_hat.cols() == t.a_hat.cols(),
            "backward: d_a_hat shape mismatch");
    Tensor2 d_logits = up.d_a_hat.cwiseProduct(t.a_hat.cwiseProduct((1.0 - t.a_hat.array()).matrix()));
    Tensor2 sym = d_logits + d_logits.transpose();
    Tensor2 d_rows = sym * t.zs_rows;
    scatter_add_rows(d_zs, d_rows, t.rows);
  }

  if (up.d_zs.size() > 0) {
    require(b.structure_encoder && up.d_zs.rows() == n && up.d_zs.cols() == d, "backward: d_zs shape mismatch");
    d_zs += up.d_zs;
  }
  if (up.d_za.size() > 0) {
    require(b.attribute_encoder && up.d_za.rows() == n && up.d_za.cols() == d, "backward: d_za shape mismatch");
    d_za += up.d_za;
  }

  if (b.attribute_encoder) {
    detail::backprop_mlp(kAttributeEncoder, t.attribute_encoder_layers, t.cfg, Activation::Identity, std::move(d_za),
                         params, nullptr);
  }
  if (b.structure_encoder) detail::backprop_gcn(t.structure_layers, *t.adjacency, t.cfg, std::move(d_zs), params);

  for (const auto& p : params) debug_check_finite(p.grad, p.name.c_str());
}

}  // namespace dsvdae
