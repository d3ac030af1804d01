#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "preempt/nn/graph.hpp"

namespace preempt::nn {

// Checkpoint layout (all integers and floats little-endian):
//
//   magic    8 bytes  "PRMPTCK1"
//   version  u32      1
//   count    u32      number of tensors
//   repeated count times:
//     name_len u32, name bytes (UTF-8, no terminator)
//     rank     u32, dims u64[rank]
//     data     f64[prod(dims)], row-major
//
// Tensors appear in ParameterSet order.

inline constexpr char kCheckpointMagic[8] = {'P', 'R', 'M', 'P', 'T', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct NamedTensor {
  std::string name;
  Tensor tensor;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

namespace detail {
template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("checkpoint truncated");
  return v;
}
}  // namespace detail

inline void write_checkpoint(std::ostream& os, const std::vector<NamedTensor>& tensors) {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(os, kCheckpointVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(nt.name.size()));
    os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(nt.tensor.rank()));
    for (auto d : nt.tensor.shape()) detail::put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(nt.tensor.ptr()),
             static_cast<std::streamsize>(nt.tensor.size() * sizeof(double)));
  }
  if (!os) throw DataError("failed writing checkpoint");
}

inline std::vector<NamedTensor> read_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw DataError("not a checkpoint file (bad magic)");
  const auto version = detail::get<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto count = detail::get<std::uint32_t>(is);
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::get<std::uint32_t>(is);
    if (len > 4096) throw DataError("checkpoint tensor name too long");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw DataError("checkpoint truncated");
    const auto rank = detail::get<std::uint32_t>(is);
    if (rank > 8) throw DataError("checkpoint tensor rank too large");
    Shape shape(rank);
    for (auto& d : shape) d = detail::get<std::uint64_t>(is);
    Tensor t(shape);
    if (!is.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(double))))
      throw DataError("checkpoint truncated");
    out.push_back({std::move(name), std::move(t)});
  }
  return out;
}

inline std::vector<NamedTensor> snapshot(const ParameterSet& params) {
  std::vector<NamedTensor> out;
  for (const auto& p : params.all()) out.push_back({p.name, p.value});
  return out;
}

/// Loads values into an existing parameter set; names and shapes must match exactly.
inline void restore(ParameterSet& params, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != params.all().size())
    throw DataError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                    std::to_string(params.all().size()));
  for (const auto& nt : tensors) {
    if (!params.contains(nt.name)) throw DataError("checkpoint tensor " + nt.name + " not in model");
    auto& p = params[nt.name];
    if (p.value.shape() != nt.tensor.shape())
      throw DataError("checkpoint tensor " + nt.name + " has shape " + shape_str(nt.tensor.shape()) +
                      ", model expects " + shape_str(p.value.shape()));
    p.value = nt.tensor;
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, snapshot(params));
}

inline void load_checkpoint(const std::filesystem::path& path, ParameterSet& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  restore(params, read_checkpoint(is));
}

}  // namespace preempt::nn
