#include "lyapnet/io/weights.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "lyapnet/errors.hpp"

namespace lyapnet::io {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw ConfigError("expected a JSON array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number()) throw ConfigError("expected a number in array");
    v[static_cast<Eigen::Index>(i)] = doc[i].get<double>();
  }
  return v;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& doc) {
  if (!doc.is_array() || doc.empty()) throw ConfigError("expected a non-empty array of rows");
  Eigen::Index rows = static_cast<Eigen::Index>(doc.size());
  Eigen::Index cols = static_cast<Eigen::Index>(doc[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::VectorXd row = vector_from_json(doc[static_cast<std::size_t>(r)]);
    if (row.size() != cols) throw ConfigError("ragged matrix rows");
    m.row(r) = row.transpose();
  }
  return m;
}

nlohmann::json network_to_json(const FeedforwardNetwork& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseLayer& l : net.layers()) {
    layers.push_back({{"weight", matrix_to_json(l.weight)}, {"bias", vector_to_json(l.bias)}});
  }
  return {{"leak_slope", net.leak_slope()}, {"layers", layers}};
}

FeedforwardNetwork network_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("leak_slope") || !doc.contains("layers")) {
    throw ConfigError("weight document needs \"leak_slope\" and \"layers\"");
  }
  std::vector<DenseLayer> layers;
  for (const auto& l : doc.at("layers")) {
    if (!l.contains("weight") || !l.contains("bias")) {
      throw ConfigError("each layer needs \"weight\" and \"bias\"");
    }
    layers.push_back({matrix_from_json(l.at("weight")), vector_from_json(l.at("bias"))});
  }
  try {
    return FeedforwardNetwork(std::move(layers), doc.at("leak_slope").get<double>());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("invalid weight document: ") + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_network(const std::filesystem::path& path, const FeedforwardNetwork& net) {
  write_json(path, network_to_json(net));
}

FeedforwardNetwork read_network(const std::filesystem::path& path) {
  return network_from_json(read_json(path));
}

std::string git_blob_hash(const std::string& content) {
  std::string header = "blob " + std::to_string(content.size());
  header.push_back('\0');
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xf]);
  }
  return hex;
}

}  // namespace lyapnet::io
