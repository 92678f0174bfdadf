#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spartan/tensor.hpp"

namespace spartan {

// Named-tensor archive:
//   "SPRT" | u32 version | u64 count |
//   count × {u32 name_len | name | u8 dtype | u32 rank | rank × u64 extent} |
//   payloads in manifest order.
// All integers and payloads are little-endian; payloads are row-major IEEE-754
// (or two's-complement i64).

inline constexpr std::uint32_t kArchiveVersion = 1;

enum class ArchiveDType : std::uint8_t { f32 = 0, f64 = 1, i64 = 2 };

std::string_view archive_dtype_name(ArchiveDType d);
std::size_t archive_dtype_size(ArchiveDType d);

template <class T>
constexpr ArchiveDType archive_dtype_of();
template <>
constexpr ArchiveDType archive_dtype_of<float>() { return ArchiveDType::f32; }
template <>
constexpr ArchiveDType archive_dtype_of<double>() { return ArchiveDType::f64; }
template <>
constexpr ArchiveDType archive_dtype_of<std::int64_t>() { return ArchiveDType::i64; }

struct ArchiveEntry {
  std::string name;
  ArchiveDType dtype = ArchiveDType::f32;
  Shape shape;
  std::vector<std::byte> payload;  // host byte order

  std::size_t numel() const { return shape_numel(shape); }

  template <class T>
  static ArchiveEntry from_values(std::string name, Shape shape, std::span<const T> values);

  /// Throws CheckpointError if the stored dtype is not T.
  template <class T>
  std::vector<T> values() const;
};

std::string serialize_archive(const std::vector<ArchiveEntry>& entries);
std::vector<ArchiveEntry> parse_archive(std::string_view bytes);

void write_archive(const std::filesystem::path& path, const std::vector<ArchiveEntry>& entries);
/// Throws CheckpointError on I/O failure or malformed content.
std::vector<ArchiveEntry> read_archive(const std::filesystem::path& path);

}  // namespace spartan
