#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "dsvdae/graph.hpp"

namespace dsvdae {

/// Kind of a planted anomaly; `None` marks a normal node.
enum class AnomalyKind : int { None = 0, Structure = 1, Attribute = 2, Combined = 3 };

inline std::string_view to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::None: return "none";
    case AnomalyKind::Structure: return "structure";
    case AnomalyKind::Attribute: return "attribute";
    case AnomalyKind::Combined: return "combined";
  }
  return "?";
}

/// Malformed or inconsistent dataset files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Provenance {
  std::string source;
  // remaining provenance fields of meta.json (e.g. raw vs deduplicated edge counts)
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
  std::string checksum_features;
  std::string checksum_edges;
};

struct DatasetBundle {
  std::string name;
  Graph graph;
  std::vector<std::string> class_names;
  Provenance provenance;
  // present only for generated graphs with planted anomalies
  std::optional<std::vector<AnomalyKind>> anomalies;
};

// ---------------------------------------------------------------- checksums

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

// ---------------------------------------------------------------- serialization

inline std::string encode_edges(const Graph& g) {
  std::string s;
  for (const auto& [u, v] : g.edges()) {
    s += std::to_string(u);
    s += '\t';
    s += std::to_string(v);
    s += '\n';
  }
  return s;
}

/// n_nodes x n_attrs little-endian f64, row-major.
inline std::string encode_features(const Tensor2& x) {
  std::string s(static_cast<std::size_t>(x.size()) * sizeof(double), '\0');
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(x.data()[i]);
    for (int b = 0; b < 8; ++b) s[static_cast<std::size_t>(i) * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return s;
}

inline std::string encode_labels(const std::vector<int>& labels) {
  std::string s;
  for (int l : labels) {
    s += std::to_string(l);
    s += '\n';
  }
  return s;
}

inline std::string combined_checksum(const Provenance& p) {
  return sha256_hex(p.checksum_features + ":" + p.checksum_edges);
}

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + p.string());
}

inline std::size_t parse_index(const std::string& tok, const std::string& file, std::size_t line) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw DataError(file + ":" + std::to_string(line) + ": expected a non-negative integer, got '" + tok + "'");
  }
  try {
    return static_cast<std::size_t>(std::stoull(tok));
  } catch (const std::exception&) {
    throw DataError(file + ":" + std::to_string(line) + ": integer out of range '" + tok + "'");
  }
}

/// Splits into lines; every line (including the last) must end with '\n'.
inline std::vector<std::string> split_lines(const std::string& text, const std::string& file) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      throw DataError(file + ":" + std::to_string(lines.size() + 1) + ": missing trailing newline");
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace detail

/// Writes meta.json, edges.tsv, features.bin, labels.txt (and anomalies.txt for
/// planted datasets). Checksums in `bundle.provenance` are recomputed.
inline void write_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Graph& g = bundle.graph;
  const std::string edges = encode_edges(g);
  const std::string features = encode_features(g.attributes());
  nlohmann::ordered_json meta;
  if (!bundle.name.empty()) meta["name"] = bundle.name;
  meta["n_nodes"] = g.n_nodes();
  meta["n_attrs"] = g.n_attrs();
  meta["n_classes"] = bundle.class_names.size();
  meta["class_names"] = bundle.class_names;
  meta["feature_dtype"] = "f64";
  meta["checksum_features"] = sha256_hex(features);
  meta["checksum_edges"] = sha256_hex(edges);
  if (!bundle.provenance.source.empty() || !bundle.provenance.details.empty()) {
    nlohmann::ordered_json prov = bundle.provenance.details;
    if (!bundle.provenance.source.empty()) prov["source"] = bundle.provenance.source;
    meta["provenance"] = prov;
  }
  detail::write_file(dir / "meta.json", meta.dump(2) + "\n");
  detail::write_file(dir / "edges.tsv", edges);
  detail::write_file(dir / "features.bin", features);
  detail::write_file(dir / "labels.txt", encode_labels(g.labels()));
  if (bundle.anomalies) {
    std::string s;
    for (AnomalyKind k : *bundle.anomalies) s += std::to_string(static_cast<int>(k)) + "\n";
    detail::write_file(dir / "anomalies.txt", s);
  }
}

/// Reads and validates a dataset directory; counts are cross-checked against
/// meta.json and both checksums must match.
inline DatasetBundle load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  nlohmann::ordered_json meta;
  try {
    meta = nlohmann::ordered_json::parse(detail::read_file(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("meta.json: " + std::string(e.what()));
  }
  std::size_t n = 0, m = 0, n_classes = 0;
  std::vector<std::string> class_names;
  std::string dtype, ck_features, ck_edges;
  try {
    n = meta.at("n_nodes").get<std::size_t>();
    m = meta.at("n_attrs").get<std::size_t>();
    n_classes = meta.at("n_classes").get<std::size_t>();
    class_names = meta.at("class_names").get<std::vector<std::string>>();
    dtype = meta.at("feature_dtype").get<std::string>();
    ck_features = meta.at("checksum_features").get<std::string>();
    ck_edges = meta.at("checksum_edges").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("meta.json: " + std::string(e.what()));
  }
  if (dtype != "f64") throw DataError("meta.json: unsupported feature_dtype '" + dtype + "'");
  if (class_names.size() != n_classes) throw DataError("meta.json: class_names size != n_classes");

  DatasetBundle b;
  b.name = meta.value("name", std::string());
  b.class_names = class_names;
  if (meta.contains("provenance") && meta["provenance"].is_object()) {
    b.provenance.details = meta["provenance"];
    b.provenance.source = b.provenance.details.value("source", std::string());
    b.provenance.details.erase("source");
  }

  const std::string edges_text = detail::read_file(dir / "edges.tsv");
  if (sha256_hex(edges_text) != ck_edges) throw DataError("edges.tsv: checksum mismatch");
  const std::string features = detail::read_file(dir / "features.bin");
  if (sha256_hex(features) != ck_features) throw DataError("features.bin: checksum mismatch");
  b.provenance.checksum_edges = ck_edges;
  b.provenance.checksum_features = ck_features;

  std::vector<Edge> edges;
  const auto edge_lines = detail::split_lines(edges_text, "edges.tsv");
  edges.reserve(edge_lines.size());
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    const std::string& line = edge_lines[i];
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw DataError("edges.tsv:" + std::to_string(i + 1) + ": expected 'u<TAB>v'");
    }
    const std::size_t u = detail::parse_index(line.substr(0, tab), "edges.tsv", i + 1);
    const std::size_t v = detail::parse_index(line.substr(tab + 1), "edges.tsv", i + 1);
    if (u >= v) throw DataError("edges.tsv:" + std::to_string(i + 1) + ": pairs must satisfy u < v");
    if (v >= n) throw DataError("edges.tsv:" + std::to_string(i + 1) + ": endpoint out of range");
    if (!edges.empty() && !(edges.back() < Edge{u, v})) {
      throw DataError("edges.tsv:" + std::to_string(i + 1) + ": pairs must be strictly ascending");
    }
    edges.emplace_back(u, v);
  }

  if (features.size() != n * m * sizeof(double)) {
    throw DataError("features.bin: expected " + std::to_string(n * m * sizeof(double)) + " bytes, found " +
                    std::to_string(features.size()));
  }
  Tensor2 x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(features[static_cast<std::size_t>(i) * 8 + k]))
              << (8 * k);
    }
    x.data()[i] = std::bit_cast<double>(bits);
  }
  if (!x.allFinite()) throw DataError("features.bin: non-finite value");

  const auto label_lines = detail::split_lines(detail::read_file(dir / "labels.txt"), "labels.txt");
  if (label_lines.size() != n) {
    throw DataError("labels.txt: expected " + std::to_string(n) + " lines, found " + std::to_string(label_lines.size()));
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = detail::parse_index(label_lines[i], "labels.txt", i + 1);
    if (c >= n_classes) throw DataError("labels.txt:" + std::to_string(i + 1) + ": class id out of range");
    labels[i] = static_cast<int>(c);
  }

  if (fs::exists(dir / "anomalies.txt")) {
    const auto lines = detail::split_lines(detail::read_file(dir / "anomalies.txt"), "anomalies.txt");
    if (lines.size() != n) throw DataError("anomalies.txt: line count != n_nodes");
    std::vector<AnomalyKind> kinds(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = detail::parse_index(lines[i], "anomalies.txt", i + 1);
      if (k > 3) throw DataError("anomalies.txt:" + std::to_string(i + 1) + ": kind must be 0..3");
      kinds[i] = static_cast<AnomalyKind>(k);
    }
    b.anomalies = std::move(kinds);
  }

  b.graph = build_graph(n, edges, std::move(x), std::move(labels));
  return b;
}

// ---------------------------------------------------------------- splits

/// Node indices of one experiment. Validation and test lists are sorted by node
/// id with their truth (1 = anomaly) aligned.
struct SplitSpec {
  int normal_class = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<int> val_truth;
  std::vector<std::size_t> test;
  std::vector<int> test_truth;
};

namespace detail {

inline void sort_with_truth(std::vector<std::size_t>& idx, std::vector<int>& truth) {
  std::vector<std::size_t> order(idx.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return idx[a] < idx[b]; });
  std::vector<std::size_t> i2;
  std::vector<int> t2;
  for (std::size_t o : order) {
    i2.push_back(idx[o]);
    t2.push_back(truth[o]);
  }
  idx = std::move(i2);
  truth = std::move(t2);
}

/// Takes `count` items spread over groups proportionally to group sizes
/// (largest remainder), sampling within each group without replacement.
inline std::vector<std::size_t> stratified_take(std::vector<std::vector<std::size_t>>& groups, std::size_t count) {
  std::size_t total = 0;
  for (const auto& g : groups) total += g.size();
  std::vector<std::size_t> quota(groups.size());
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder numerator, group)
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    quota[i] = total == 0 ? 0 : groups[i].size() * count / total;
    remainders.emplace_back(total == 0 ? 0 : groups[i].size() * count % total, i);
    assigned += quota[i];
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < count && k < remainders.size(); ++k) {
    const std::size_t g = remainders[k].second;
    if (quota[g] < groups[g].size()) {
      ++quota[g];
      ++assigned;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    out.insert(out.end(), groups[i].end() - static_cast<std::ptrdiff_t>(quota[i]), groups[i].end());
    groups[i].resize(groups[i].size() - quota[i]);
  }
  return out;
}

}  // namespace detail

/// One class is normal. Its nodes are shuffled and split 60/15/25 (floor for
/// validation and test, remainder to training). Validation and test are padded
/// with an equal number of anomalies drawn without replacement from all other
/// classes pooled (or per class proportionally with `stratify`).
inline SplitSpec make_splits(const DatasetBundle& bundle, int normal_class, std::uint64_t seed, bool stratify = false) {
  const Graph& g = bundle.graph;
  std::vector<std::size_t> normals, anomalies;
  for (std::size_t i = 0; i < g.n_nodes(); ++i) {
    (g.labels()[i] == normal_class ? normals : anomalies).push_back(i);
  }
  require(normals.size() >= 10, "make_splits: normal class " + std::to_string(normal_class) + " has " +
                                    std::to_string(normals.size()) + " nodes, need at least 10");
  std::mt19937_64 rng(seed);
  std::shuffle(normals.begin(), normals.end(), rng);
  const std::size_t n = normals.size();
  const std::size_t n_val = 15 * n / 100;
  const std::size_t n_test = 25 * n / 100;
  const std::size_t n_train = n - n_val - n_test;
  if (anomalies.size() < n_val + n_test) {
    throw InvalidArgument("make_splits: need " + std::to_string(n_val + n_test) + " anomalies for validation+test, only " +
                          std::to_string(anomalies.size()) + " available");
  }

  SplitSpec s;
  s.normal_class = normal_class;
  s.seed = seed;
  s.train.assign(normals.begin(), normals.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(s.train.begin(), s.train.end());

  std::vector<std::size_t> val_anom, test_anom;
  if (stratify) {
    std::vector<std::vector<std::size_t>> groups(bundle.class_names.size());
    for (std::size_t a : anomalies) groups[static_cast<std::size_t>(g.labels()[a])].push_back(a);
    for (auto& grp : groups) std::shuffle(grp.begin(), grp.end(), rng);
    val_anom = detail::stratified_take(groups, n_val);
    test_anom = detail::stratified_take(groups, n_test);
  } else {
    std::shuffle(anomalies.begin(), anomalies.end(), rng);
    val_anom.assign(anomalies.begin(), anomalies.begin() + static_cast<std::ptrdiff_t>(n_val));
    test_anom.assign(anomalies.begin() + static_cast<std::ptrdiff_t>(n_val),
                     anomalies.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  }
  for (std::size_t i = 0; i < n_val; ++i) {
    s.val.push_back(normals[n_train + i]);
    s.val_truth.push_back(0);
  }
  for (std::size_t a : val_anom) {
    s.val.push_back(a);
    s.val_truth.push_back(1);
  }
  for (std::size_t i = 0; i < n_test; ++i) {
    s.test.push_back(normals[n_train + n_val + i]);
    s.test_truth.push_back(0);
  }
  for (std::size_t a : test_anom) {
    s.test.push_back(a);
    s.test_truth.push_back(1);
  }
  detail::sort_with_truth(s.val, s.val_truth);
  detail::sort_with_truth(s.test, s.test_truth);
  return s;
}

}  // namespace dsvdae
