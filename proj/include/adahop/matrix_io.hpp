#pragma once

// AHT1 tensor files:
//   bytes 0-3    magic "AHT1"
//   bytes 4-7    format version (u32 LE, = 1)
//   bytes 8-11   rows (u32 LE)
//   bytes 12-15  cols (u32 LE)
//   then rows*cols IEEE-754 binary32 values, little-endian, row-major.
// No padding, no checksum.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "adahop/error.hpp"
#include "adahop/matrix.hpp"

namespace adahop {

inline constexpr std::array<char, 4> kAht1Magic{'A', 'H', 'T', '1'};
inline constexpr std::uint32_t kAht1Version = 1;
inline constexpr std::size_t kAht1HeaderSize = 16;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_matrix(const DenseMatrix& a) {
  if (a.rows() > std::numeric_limits<std::uint32_t>::max() ||
      a.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError("matrix too large for AHT1: " + shape_str(a));
  }
  std::vector<std::uint8_t> out;
  out.reserve(kAht1HeaderSize + 4 * a.size());
  out.insert(out.end(), kAht1Magic.begin(), kAht1Magic.end());
  detail::put_u32(out, kAht1Version);
  detail::put_u32(out, static_cast<std::uint32_t>(a.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(a.cols()));
  for (float v : a.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline DenseMatrix decode_matrix(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("truncated magic", bytes.size());
  if (std::memcmp(bytes.data(), kAht1Magic.data(), 4) != 0) throw FormatError("magic mismatch", 0);
  if (bytes.size() < kAht1HeaderSize) throw FormatError("truncated header", bytes.size());
  const std::uint32_t version = detail::get_u32(bytes.data() + 4);
  if (version != kAht1Version) {
    throw FormatError("unsupported version " + std::to_string(version), 4);
  }
  const std::uint64_t rows = detail::get_u32(bytes.data() + 8);
  const std::uint64_t cols = detail::get_u32(bytes.data() + 12);
  if (rows == 0) throw FormatError("zero rows", 8);
  if (cols == 0) throw FormatError("zero cols", 12);
  const std::uint64_t count = rows * cols;  // < 2^64 since both < 2^32
  if (count > (std::numeric_limits<std::uint64_t>::max() - kAht1HeaderSize) / 4 ||
      count > std::numeric_limits<std::size_t>::max() / 4) {
    throw FormatError("dimension overflow", 8);
  }
  const std::uint64_t expected = kAht1HeaderSize + 4 * count;
  if (bytes.size() < expected) throw FormatError("truncated payload", bytes.size());
  if (bytes.size() > expected) throw FormatError("trailing bytes after payload", expected);

  std::vector<float> data(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t off = kAht1HeaderSize + 4 * i;
    data[i] = std::bit_cast<float>(detail::get_u32(bytes.data() + off));
    if (!std::isfinite(data[i])) throw FormatError("non-finite value", off);
  }
  return DenseMatrix(rows, cols, std::move(data));
}

inline DenseMatrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading", path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed", path.string());
  return decode_matrix(bytes);
}

/// Writes to a sibling temp file, then renames over `path`.
inline void write_bytes_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing", tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed", tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed (" + ec.message() + ")", path.string());
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_bytes_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

inline void write_matrix(const std::filesystem::path& path, const DenseMatrix& a) {
  write_bytes_atomic(path, encode_matrix(a));
}

}  // namespace adahop
