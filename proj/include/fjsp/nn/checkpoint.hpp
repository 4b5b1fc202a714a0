#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fjsp/nn/param_store.hpp"

namespace fjsp::nn {

// Layout:
//   8 bytes   magic "MCAFJSP1"
//   8 bytes   manifest length N (uint64, little-endian)
//   N bytes   JSON manifest {"tensors": [{name, shape, dtype}], "config": {...}}
//   ...       raw little-endian arrays, in manifest order
inline constexpr char kCheckpointMagic[8] = {'M', 'C', 'A', 'F', 'J', 'S', 'P', '1'};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw CheckpointError("truncated checkpoint header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const ParamStore<T>& store, const nlohmann::json& config) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : store)
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", detail::dtype_name<T>()}});
  const std::string manifest = nlohmann::json{{"tensors", tensors}, {"config", config}}.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(kCheckpointMagic, 8);
  detail::write_u64(out, manifest.size());
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  for (const auto& [name, t] : store)
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
  if (!out) throw CheckpointError("write failed for '" + path + "'");
}

struct CheckpointEntry {
  std::string name;
  std::vector<int> shape;
  std::string dtype;
  std::vector<double> values;
};

struct CheckpointData {
  nlohmann::json config;
  std::vector<CheckpointEntry> tensors;
};

inline CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw CheckpointError("'" + path + "' is not a checkpoint");
  const auto len = detail::read_u64(in);
  if (len > (1ULL << 30)) throw CheckpointError("implausible manifest length");
  std::string manifest(len, '\0');
  in.read(manifest.data(), static_cast<std::streamsize>(len));
  if (!in) throw CheckpointError("truncated manifest");
  CheckpointData data;
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(manifest);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad manifest: ") + e.what());
  }
  data.config = m.value("config", nlohmann::json::object());
  for (const auto& e : m.at("tensors")) {
    CheckpointEntry entry;
    entry.name = e.at("name").get<std::string>();
    entry.shape = e.at("shape").get<std::vector<int>>();
    entry.dtype = e.at("dtype").get<std::string>();
    std::size_t n = 1;
    for (int s : entry.shape) n *= static_cast<std::size_t>(s);
    entry.values.resize(n);
    if (entry.dtype == "f32") {
      std::vector<float> buf(n);
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4));
      for (std::size_t i = 0; i < n; ++i) entry.values[i] = buf[i];
    } else if (entry.dtype == "f64") {
      in.read(reinterpret_cast<char*>(entry.values.data()), static_cast<std::streamsize>(n * 8));
    } else {
      throw CheckpointError("unsupported dtype '" + entry.dtype + "'");
    }
    if (!in) throw CheckpointError("truncated data for '" + entry.name + "'");
    data.tensors.push_back(std::move(entry));
  }
  return data;
}

/// Loads values into an existing store; names and shapes must match exactly.
template <class T>
void load_into(ParamStore<T>& store, const CheckpointData& data) {
  if (data.tensors.size() != store.size())
    throw CheckpointError("checkpoint has " + std::to_string(data.tensors.size()) + " tensors, model has " +
                          std::to_string(store.size()));
  for (const auto& e : data.tensors) {
    if (!store.contains(e.name)) throw CheckpointError("unexpected tensor '" + e.name + "'");
    auto& t = store.get(e.name);
    if (t.shape() != e.shape) throw CheckpointError("shape mismatch for '" + e.name + "'");
    for (std::size_t i = 0; i < e.values.size(); ++i) t.data()[i] = static_cast<T>(e.values[i]);
  }
}

}  // namespace fjsp::nn
