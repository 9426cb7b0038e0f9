#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "nirvis/errors.hpp"
#include "nirvis/tensor.hpp"

// Flat binary weight snapshot:
//   magic "ADFL" | u32 version | u32 entry_count |
//   per entry: u32 name_len | name bytes | u32 rank | u32 dims[rank] | f32 data
// All integers and floats little-endian. Entry order is preserved, so
// save(load(f)) reproduces f byte for byte.
namespace nirvis {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline constexpr std::uint32_t kCheckpointVersion = 1;

class Checkpoint {
 public:
  void add(std::string name, Tensor<float> t) {
    if (find(name))
      throw CheckpointError(CheckpointError::Kind::DuplicateName,
                            "duplicate entry '" + name + "'");
    entries_.emplace_back(std::move(name), std::move(t));
  }

  const Tensor<float>* find(const std::string& name) const {
    for (const auto& [n, t] : entries_)
      if (n == name) return &t;
    return nullptr;
  }

  const Tensor<float>& require(const std::string& name) const {
    const Tensor<float>* t = find(name);
    if (!t)
      throw CheckpointError(CheckpointError::Kind::BadData, "missing entry '" + name + "'");
    return *t;
  }

  const std::vector<std::pair<std::string, Tensor<float>>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, Tensor<float>>> entries_;
};

namespace detail {

inline void ckpt_write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t ckpt_read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (in.gcount() != 4)
    throw CheckpointError(CheckpointError::Kind::Truncated, "file ends inside a header field");
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write("ADFL", 4);
  detail::ckpt_write_u32(out, kCheckpointVersion);
  detail::ckpt_write_u32(out, static_cast<std::uint32_t>(ckpt.size()));
  for (const auto& [name, t] : ckpt.entries()) {
    detail::ckpt_write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::ckpt_write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i)
      detail::ckpt_write_u32(out, static_cast<std::uint32_t>(t.dim(i)));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * 4));
  }
  if (!out) throw IoError(path + ": write failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "ADFL", 4) != 0)
    throw CheckpointError(CheckpointError::Kind::BadHeader, "bad magic in " + path);
  const std::uint32_t version = detail::ckpt_read_u32(in);
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::BadHeader,
                          "unsupported version " + std::to_string(version));
  const std::uint32_t count = detail::ckpt_read_u32(in);
  Checkpoint ckpt;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = detail::ckpt_read_u32(in);
    if (name_len == 0 || name_len > 4096)
      throw CheckpointError(CheckpointError::Kind::BadData,
                            "implausible name length " + std::to_string(name_len));
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len))
      throw CheckpointError(CheckpointError::Kind::Truncated, "file ends inside entry name");
    const std::uint32_t rank = detail::ckpt_read_u32(in);
    if (rank > 8)
      throw CheckpointError(CheckpointError::Kind::BadData,
                            "implausible rank " + std::to_string(rank) + " for '" + name + "'");
    Shape shape;
    std::int64_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t d = detail::ckpt_read_u32(in);
      if (d == 0 || d > (1u << 24))
        throw CheckpointError(CheckpointError::Kind::BadData,
                              "implausible dimension " + std::to_string(d) + " for '" + name + "'");
      shape.push_back(static_cast<int>(d));
      numel *= d;
    }
    if (numel > (std::int64_t(1) << 30))
      throw CheckpointError(CheckpointError::Kind::BadData, "entry '" + name + "' too large");
    Tensor<float> t(shape);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(numel * 4));
    if (in.gcount() != static_cast<std::streamsize>(numel * 4))
      throw CheckpointError(CheckpointError::Kind::Truncated, "file ends inside data of '" + name + "'");
    if (!t.all_finite())
      throw CheckpointError(CheckpointError::Kind::BadData, "non-finite values in '" + name + "'");
    ckpt.add(std::move(name), std::move(t));  // rethrows DuplicateName
  }
  return ckpt;
}

}  // namespace nirvis
