#pragma once

// Binary parameter checkpoints.
//
// Layout: the 8-byte magic "S2WTMCKP", one version byte, then one record per
// tensor until end of file:
//   u32 name length, UTF-8 name bytes, u32 rank, rank x u64 extents,
//   product(extents) x f64 values in row-major order.
// All integers and floats are little-endian.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "s2wtm/tensor.hpp"

namespace s2wtm {

inline constexpr char kCheckpointMagic[8] = {'S', '2', 'W', 'T', 'M', 'C', 'K', 'P'};
inline constexpr unsigned char kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace s2wtm
