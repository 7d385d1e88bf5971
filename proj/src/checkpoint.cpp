#include "s2wtm/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace s2wtm {

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool get_le(std::istream& is, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&value, bytes, sizeof(T));
  return true;
}

[[noreturn]] void corrupt(const std::filesystem::path& path, const std::string& what) {
  throw DataError("checkpoint " + path.string() + ": " + what);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  os.put(static_cast<char>(kCheckpointVersion));
  for (const auto& [name, t] : tensors) {
    if (t.size() != static_cast<std::uint64_t>(t.values.size()))
      throw DataError("checkpoint: tensor '" + name + "' shape does not match its values");
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::uint64_t e : t.shape) put_le<std::uint64_t>(os, e);
    for (Eigen::Index r = 0; r < t.values.rows(); ++r)
      for (Eigen::Index c = 0; c < t.values.cols(); ++c) put_le<double>(os, t.values(r, c));
  }
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    corrupt(path, "bad magic header");
  const int version = is.get();
  if (version != kCheckpointVersion) corrupt(path, "unsupported version " + std::to_string(version));

  NamedTensors out;
  std::uint32_t name_len = 0;
  while (get_le(is, name_len)) {
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) corrupt(path, "truncated name");
    std::uint32_t rank = 0;
    if (!get_le(is, rank) || rank > 2) corrupt(path, "bad rank for '" + name + "'");
    Tensor t;
    t.shape.resize(rank);
    for (auto& e : t.shape)
      if (!get_le(is, e)) corrupt(path, "truncated extents for '" + name + "'");
    const auto rows = static_cast<Eigen::Index>(rank == 2 ? t.shape[0] : 1);
    const auto cols = static_cast<Eigen::Index>(rank == 2 ? t.shape[1] : rank == 1 ? t.shape[0] : 1);
    t.values.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!get_le(is, t.values(r, c))) corrupt(path, "truncated values for '" + name + "'");
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace s2wtm
