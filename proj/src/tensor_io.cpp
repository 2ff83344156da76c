#include "dualdiff/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dualdiff {

namespace {

static_assert(sizeof(float) == 4);

void to_le_bytes(std::span<const float> src, std::vector<char>& out) {
  out.resize(src.size() * 4);
  std::memcpy(out.data(), src.data(), out.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < out.size(); i += 4) {
      std::swap(out[i], out[i + 3]);
      std::swap(out[i + 1], out[i + 2]);
    }
  }
}

void from_le_bytes(std::vector<char>& bytes, std::vector<float>& out) {
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += 4) {
      std::swap(bytes[i], bytes[i + 3]);
      std::swap(bytes[i + 1], bytes[i + 2]);
    }
  }
  out.resize(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), bytes.size());
}

}  // namespace

void write_header_payload(const std::string& path, const nlohmann::json& header,
                          std::span<const float> payload) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << header.dump() << '\n';
  std::vector<char> bytes;
  to_le_bytes(payload, bytes);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::pair<nlohmann::json, std::vector<float>> read_header_payload(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("missing header line: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed header in " + path + ": " + e.what());
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0)
    throw std::runtime_error("payload of " + path + " is not a whole number of floats");
  std::vector<float> payload;
  from_le_bytes(bytes, payload);
  return {std::move(header), std::move(payload)};
}

void write_tensor_file(const std::string& path, const TensorFile& tf) {
  std::size_t count = 1;
  for (std::size_t d : tf.shape) count *= d;
  if (count != tf.data.size())
    throw std::invalid_argument("tensor file: shape does not match data size");
  nlohmann::json header;
  header["shape"] = tf.shape;
  header["dtype"] = tf.dtype;
  header["seed"] = tf.seed;
  header["config_hash"] = tf.config_hash;
  if (!tf.extra.is_null()) header["extra"] = tf.extra;
  write_header_payload(path, header, tf.data);
}

TensorFile read_tensor_file(const std::string& path) {
  auto [header, payload] = read_header_payload(path);
  TensorFile tf;
  try {
    tf.shape = header.at("shape").get<std::vector<std::size_t>>();
    tf.dtype = header.at("dtype").get<std::string>();
    tf.seed = header.at("seed").get<std::uint64_t>();
    tf.config_hash = header.at("config_hash").get<std::string>();
    if (header.contains("extra")) tf.extra = header["extra"];
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid tensor header in " + path + ": " + e.what());
  }
  if (tf.dtype != "f32le")
    throw std::runtime_error("unsupported dtype '" + tf.dtype + "' in " + path);
  std::size_t count = 1;
  for (std::size_t d : tf.shape) count *= d;
  if (count != payload.size())
    throw std::runtime_error("payload length mismatch in " + path + ": header says " +
                             std::to_string(count) + " floats, file holds " +
                             std::to_string(payload.size()));
  tf.data = std::move(payload);
  return tf;
}

}  // namespace dualdiff
