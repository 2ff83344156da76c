#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace dualdiff {

// On-disk tensor: one line of JSON ({shape, dtype, seed, config_hash, ...})
// terminated by '\n', then the raw little-endian 32-bit float payload of
// exactly product(shape) * 4 bytes.
struct TensorFile {
  std::vector<std::size_t> shape;
  std::string dtype = "f32le";
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json extra;  // config echo and other annotations
  std::vector<float> data;
};

void write_tensor_file(const std::string& path, const TensorFile& tf);
TensorFile read_tensor_file(const std::string& path);

// Shared low-level format (tensor files and checkpoints use the same one).
void write_header_payload(const std::string& path, const nlohmann::json& header,
                          std::span<const float> payload);
std::pair<nlohmann::json, std::vector<float>> read_header_payload(const std::string& path);

}  // namespace dualdiff
