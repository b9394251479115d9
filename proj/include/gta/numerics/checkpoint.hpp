#pragma once

// GTA1 checkpoint container. All integers and floats are little-endian.
//
//   offset  size        field
//   0       4           magic "GTA1"
//   4       4 (u32)     record count N
//   then N records:
//           4 (u32)     name length B
//           B           name bytes (UTF-8, no terminator)
//           4 (u32)     rank R
//           8·R (u64)   extents, outermost first
//           8·Π(ext)    float64 values, row-major

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gta/error.hpp"
#include "gta/numerics/tensor.hpp"

namespace gta {

/// Named tensors in insertion order.
using TensorList = std::vector<std::pair<std::string, Tensor>>;

namespace detail {

template <class UInt>
void put_le(std::vector<char>& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class UInt>
UInt get_le(const std::vector<char>& in, std::size_t& pos) {
  if (pos + sizeof(UInt) > in.size()) throw DataError("checkpoint truncated");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i)
    v |= static_cast<UInt>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(UInt);
  return v;
}

}  // namespace detail

inline constexpr std::array<char, 4> kCheckpointMagic{'G', 'T', 'A', '1'};

inline std::vector<char> encode_checkpoint(const TensorList& tensors) {
  std::vector<char> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    for (double v : t.data()) {
      if (!std::isfinite(v)) throw NumericError("refusing to checkpoint non-finite tensor '" + name + "'");
    }
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) detail::put_le<std::uint64_t>(out, e);
    for (double v : t.data()) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline TensorList decode_checkpoint(const std::vector<char>& bytes) {
  if (bytes.size() < 8 || !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin())) {
    throw DataError("not a GTA1 checkpoint (bad magic)");
  }
  std::size_t pos = 4;
  const auto count = detail::get_le<std::uint32_t>(bytes, pos);
  TensorList tensors;
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto name_len = detail::get_le<std::uint32_t>(bytes, pos);
    if (pos + name_len > bytes.size()) throw DataError("checkpoint truncated in tensor name");
    std::string name(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos + name_len));
    pos += name_len;
    const auto rank = detail::get_le<std::uint32_t>(bytes, pos);
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(detail::get_le<std::uint64_t>(bytes, pos));
    const std::size_t n = shape_numel(shape);
    if (pos + 8 * n > bytes.size()) throw DataError("checkpoint truncated in tensor '" + name + "'");
    std::vector<double> values(n);
    for (auto& v : values) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, pos));
    tensors.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
  }
  if (pos != bytes.size()) throw DataError("trailing bytes after checkpoint records");
  return tensors;
}

inline void save_checkpoint(const std::string& path, const TensorList& tensors) {
  const auto bytes = encode_checkpoint(tensors);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing checkpoint: " + path);
}

inline TensorList load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

inline const Tensor* find_tensor(const TensorList& tensors, const std::string& name) {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

}  // namespace gta
