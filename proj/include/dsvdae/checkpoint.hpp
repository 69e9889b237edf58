#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "dsvdae/dataset.hpp"
#include "dsvdae/training.hpp"

namespace dsvdae {

inline constexpr const char* kCheckpointFormat = "dsvdae-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline StructureLossPolicy parse_structure_loss(std::string_view s) {
  if (s == "full") return StructureLossPolicy::Full;
  if (s == "sampled") return StructureLossPolicy::Sampled;
  throw InvalidArgument("unknown structure loss policy '" + std::string(s) + "' (expected full or sampled)");
}

// ---------------------------------------------------------------- config <-> json

inline nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["n_attrs"] = c.n_attrs;
  j["embed_dim"] = c.embed_dim;
  j["structure_layers"] = c.structure_layers;
  j["attribute_encoder_layers"] = c.attribute_encoder_layers;
  j["attribute_decoder_layers"] = c.attribute_decoder_layers;
  j["hidden_activation"] = to_string(c.hidden_activation);
  j["output_activation"] = to_string(c.output_activation);
  j["self_loops"] = c.self_loops;
  j["variant"] = to_string(c.variant);
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::ordered_json& j) {
  ModelConfig c;
  c.n_attrs = j.at("n_attrs").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.structure_layers = j.at("structure_layers").get<std::vector<std::size_t>>();
  c.attribute_encoder_layers = j.at("attribute_encoder_layers").get<std::vector<std::size_t>>();
  c.attribute_decoder_layers = j.at("attribute_decoder_layers").get<std::vector<std::size_t>>();
  c.hidden_activation = parse_activation(j.at("hidden_activation").get<std::string>());
  c.output_activation = parse_activation(j.at("output_activation").get<std::string>());
  c.self_loops = j.at("self_loops").get<bool>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.validate();
  return c;
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = to_json(c.model);
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.adam.learning_rate;
  j["adam_beta1"] = c.adam.beta1;
  j["adam_beta2"] = c.adam.beta2;
  j["adam_epsilon"] = c.adam.epsilon;
  j["beta"] = c.beta;
  j["mu_s"] = c.mu_s;
  j["mu_a"] = c.mu_a;
  j["seed"] = c.seed;
  j["structure_loss"] = to_string(c.structure_loss);
  j["sampled_negatives"] = c.sampled_negatives;
  j["graph_mode"] = to_string(c.graph_mode);
  j["checkpoint_every"] = c.checkpoint_every;
  j["select_best_validation"] = c.select_best_validation;
  j["validation_every"] = c.validation_every;
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::ordered_json& j) {
  TrainConfig c;
  c.model = model_config_from_json(j.at("model"));
  c.epochs = j.at("epochs").get<std::size_t>();
  c.adam.learning_rate = j.at("learning_rate").get<double>();
  c.adam.beta1 = j.at("adam_beta1").get<double>();
  c.adam.beta2 = j.at("adam_beta2").get<double>();
  c.adam.epsilon = j.at("adam_epsilon").get<double>();
  c.beta = j.at("beta").get<double>();
  c.mu_s = j.at("mu_s").get<double>();
  c.mu_a = j.at("mu_a").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.structure_loss = parse_structure_loss(j.at("structure_loss").get<std::string>());
  c.sampled_negatives = j.at("sampled_negatives").get<std::size_t>();
  c.graph_mode = parse_graph_mode(j.at("graph_mode").get<std::string>());
  c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  c.select_best_validation = j.at("select_best_validation").get<bool>();
  c.validation_every = j.at("validation_every").get<std::size_t>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------- checkpoint

/// Everything needed to score with a trained model plus the run it came from.
struct Checkpoint {
  TrainedModel model;
  int normal_class = 0;
  std::string dataset_checksum;
};

namespace detail {

inline nlohmann::ordered_json matrix_json(const Tensor2& m) {
  return nlohmann::ordered_json(std::vector<double>(m.data(), m.data() + m.size()));
}

inline Tensor2 matrix_from_json(const nlohmann::ordered_json& j, Eigen::Index rows, Eigen::Index cols,
                                const std::string& what) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
    throw DataError("checkpoint: " + what + " holds " + std::to_string(v.size()) + " values, expected " +
                    std::to_string(rows * cols));
  }
  Tensor2 m(rows, cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

inline nlohmann::ordered_json sphere_json(const Hypersphere& s) {
  nlohmann::ordered_json j;
  j["center"] = std::vector<double>(s.center.data(), s.center.data() + s.center.size());
  j["radius"] = s.radius;
  j["mu"] = s.mu;
  return j;
}

inline Hypersphere sphere_from_json(const nlohmann::ordered_json& j) {
  Hypersphere s;
  const auto c = j.at("center").get<std::vector<double>>();
  s.center = RowVector(static_cast<Eigen::Index>(c.size()));
  std::copy(c.begin(), c.end(), s.center.data());
  s.radius = j.at("radius").get<double>();
  s.mu = j.at("mu").get<double>();
  return s;
}

}  // namespace detail

/// JSON document; parameter values are row-major and survive a round trip exactly.
inline nlohmann::ordered_json checkpoint_json(const Checkpoint& ck, bool with_optimizer_state = false) {
  const TrainedModel& m = ck.model;
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["train_config"] = to_json(m.config);
  j["seed"] = m.config.seed;
  j["epochs_run"] = m.epochs_run;
  j["selected_epoch"] = m.selected_epoch;
  j["normal_class"] = ck.normal_class;
  j["dataset_checksum"] = ck.dataset_checksum;
  j["adam_step"] = m.params.step();
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const auto& p : m.params) {
    nlohmann::ordered_json e;
    e["name"] = p.name;
    e["rows"] = p.value.rows();
    e["cols"] = p.value.cols();
    e["active"] = p.active;
    e["values"] = detail::matrix_json(p.value);
    if (with_optimizer_state) {
      e["first_moment"] = detail::matrix_json(p.first_moment);
      e["second_moment"] = detail::matrix_json(p.second_moment);
    }
    params.push_back(std::move(e));
  }
  j["parameters"] = std::move(params);
  j["structure_sphere"] = detail::sphere_json(m.structure);
  j["attribute_sphere"] = detail::sphere_json(m.attribute);
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat) {
    throw DataError("checkpoint: not a dsvdae checkpoint");
  }
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + j.at("version").dump());
  }
  Checkpoint ck;
  TrainedModel& m = ck.model;
  m.config = train_config_from_json(j.at("train_config"));
  m.epochs_run = j.at("epochs_run").get<std::size_t>();
  m.selected_epoch = j.at("selected_epoch").get<std::size_t>();
  ck.normal_class = j.at("normal_class").get<int>();
  ck.dataset_checksum = j.at("dataset_checksum").get<std::string>();

  // rebuild the expected layout, then fill in stored values
  m.params = init_parameters(m.config.model, m.config.seed);
  const auto& stored = j.at("parameters");
  if (stored.size() != m.params.size()) {
    throw DataError("checkpoint: holds " + std::to_string(stored.size()) + " parameters, model config expects " +
                    std::to_string(m.params.size()));
  }
  for (const auto& e : stored) {
    const auto name = e.at("name").get<std::string>();
    Parameter* p = m.params.find(name);
    if (p == nullptr) throw DataError("checkpoint: unexpected parameter '" + name + "'");
    const auto rows = e.at("rows").get<Eigen::Index>();
    const auto cols = e.at("cols").get<Eigen::Index>();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw DataError("checkpoint: parameter '" + name + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                      ", model config expects " + shape_string(p->value));
    }
    p->value = detail::matrix_from_json(e.at("values"), rows, cols, name);
    p->active = e.at("active").get<bool>();
    if (e.contains("first_moment")) {
      p->first_moment = detail::matrix_from_json(e.at("first_moment"), rows, cols, name + " first moment");
      p->second_moment = detail::matrix_from_json(e.at("second_moment"), rows, cols, name + " second moment");
    }
  }
  m.params.set_step(j.value("adam_step", std::uint64_t{0}));
  m.structure = detail::sphere_from_json(j.at("structure_sphere"));
  m.attribute = detail::sphere_from_json(j.at("attribute_sphere"));
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path, bool with_optimizer_state = false) {
  detail::write_file(path, checkpoint_json(ck, with_optimizer_state).dump(1) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- loss history

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string loss_history_csv(const std::vector<LossRecord>& history) {
  std::string out = "epoch,total,sphere_s,sphere_a,recon_s,recon_a\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.total) + "," + format_double(r.sphere_s) + "," +
           format_double(r.sphere_a) + "," + format_double(r.recon_s) + "," + format_double(r.recon_a) + "\n";
  }
  return out;
}

}  // namespace dsvdae
