#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "lyapnet/network.hpp"

namespace lyapnet::io {

// Weight document:
//   {"leak_slope": c, "layers": [{"weight": [[row], ...], "bias": [...]}, ...]}
// Weights are row-major (one inner array per output neuron); the last layer is linear.
nlohmann::json network_to_json(const FeedforwardNetwork& net);
FeedforwardNetwork network_from_json(const nlohmann::json& doc);

void write_network(const std::filesystem::path& path, const FeedforwardNetwork& net);
FeedforwardNetwork read_network(const std::filesystem::path& path);

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& doc);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& doc);

/// Pretty-printed JSON with a trailing newline; the same document always yields the same bytes.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Git blob hash (SHA-1 over "blob <size>\0<content>") as lowercase hex.
std::string git_blob_hash(const std::string& content);

}  // namespace lyapnet::io
