#include "spartan/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace spartan {

std::string_view archive_dtype_name(ArchiveDType d) {
  switch (d) {
    case ArchiveDType::f32: return "f32";
    case ArchiveDType::f64: return "f64";
    case ArchiveDType::i64: return "i64";
  }
  return "?";
}

std::size_t archive_dtype_size(ArchiveDType d) { return d == ArchiveDType::f32 ? 4 : 8; }

template <class T>
ArchiveEntry ArchiveEntry::from_values(std::string name, Shape shape, std::span<const T> values) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("archive entry '" + name + "': shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  ArchiveEntry e;
  e.name = std::move(name);
  e.dtype = archive_dtype_of<T>();
  e.shape = std::move(shape);
  e.payload.resize(values.size_bytes());
  if (!values.empty()) std::memcpy(e.payload.data(), values.data(), values.size_bytes());
  return e;
}

template <class T>
std::vector<T> ArchiveEntry::values() const {
  if (dtype != archive_dtype_of<T>()) {
    throw CheckpointError("archive entry '" + name + "' has dtype " +
                          std::string(archive_dtype_name(dtype)) + ", expected " +
                          std::string(archive_dtype_name(archive_dtype_of<T>())));
  }
  std::vector<T> out(numel());
  if (!out.empty()) std::memcpy(out.data(), payload.data(), payload.size());
  return out;
}

template ArchiveEntry ArchiveEntry::from_values(std::string, Shape, std::span<const float>);
template ArchiveEntry ArchiveEntry::from_values(std::string, Shape, std::span<const double>);
template ArchiveEntry ArchiveEntry::from_values(std::string, Shape, std::span<const std::int64_t>);
template std::vector<float> ArchiveEntry::values() const;
template std::vector<double> ArchiveEntry::values() const;
template std::vector<std::int64_t> ArchiveEntry::values() const;

namespace {

constexpr char kMagic[4] = {'S', 'P', 'R', 'T'};
constexpr bool kLittle = std::endian::native == std::endian::little;

// Reverses each `width`-byte word in place when the host is big-endian.
void to_little(std::byte* p, std::size_t bytes, std::size_t width) {
  if constexpr (!kLittle) {
    for (std::size_t i = 0; i < bytes; i += width) std::reverse(p + i, p + i + width);
  }
}

template <class U>
void put(std::string& out, U v) {
  std::byte buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  to_little(buf, sizeof(U), sizeof(U));
  out.append(reinterpret_cast<const char*>(buf), sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class U>
  U get(const char* what) {
    std::byte buf[sizeof(U)];
    take(buf, sizeof(U), what);
    to_little(buf, sizeof(U), sizeof(U));
    U v;
    std::memcpy(&v, buf, sizeof(U));
    return v;
  }

  void take(std::byte* dst, std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("archive truncated while reading ") + what);
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_archive(const std::vector<ArchiveEntry>& entries) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kArchiveVersion);
  put<std::uint64_t>(out, entries.size());
  for (const auto& e : entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put<std::uint64_t>(out, d);
  }
  for (const auto& e : entries) {
    if (e.payload.size() != e.numel() * archive_dtype_size(e.dtype)) {
      throw CheckpointError("archive entry '" + e.name + "': payload size does not match shape");
    }
    std::vector<std::byte> buf = e.payload;
    to_little(buf.data(), buf.size(), archive_dtype_size(e.dtype));
    out.append(reinterpret_cast<const char*>(buf.data()), buf.size());
  }
  return out;
}

std::vector<ArchiveEntry> parse_archive(std::string_view bytes) {
  Reader r(bytes);
  std::byte magic[4];
  r.take(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("not an SPRT archive (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kArchiveVersion) {
    throw CheckpointError("unsupported archive version " + std::to_string(version));
  }
  const auto count = r.get<std::uint64_t>("entry count");
  // Each manifest entry needs at least 9 bytes; reject absurd counts before allocating.
  if (count > r.remaining() / 9) throw CheckpointError("archive manifest count exceeds file size");
  std::vector<ArchiveEntry> entries(count);
  for (auto& e : entries) {
    const auto len = r.get<std::uint32_t>("name length");
    if (len > r.remaining()) throw CheckpointError("archive truncated while reading name");
    e.name.resize(len);
    r.take(reinterpret_cast<std::byte*>(e.name.data()), len, "name");
    const auto tag = r.get<std::uint8_t>("dtype");
    if (tag > 2) throw CheckpointError("archive entry '" + e.name + "': unknown dtype tag " + std::to_string(tag));
    e.dtype = static_cast<ArchiveDType>(tag);
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > 8) throw CheckpointError("archive entry '" + e.name + "': rank " + std::to_string(rank) + " too large");
    e.shape.resize(rank);
    for (auto& d : e.shape) d = r.get<std::uint64_t>("extent");
  }
  for (auto& e : entries) {
    std::size_t n = 1;
    for (auto d : e.shape) {
      if (d != 0 && n > r.remaining() / d) throw CheckpointError("archive entry '" + e.name + "': payload exceeds file size");
      n *= d;
    }
    const std::size_t bytes_needed = n * archive_dtype_size(e.dtype);
    if (bytes_needed > r.remaining()) {
      throw CheckpointError("archive truncated in payload of '" + e.name + "'");
    }
    e.payload.resize(bytes_needed);
    r.take(e.payload.data(), bytes_needed, "payload");
    to_little(e.payload.data(), bytes_needed, archive_dtype_size(e.dtype));
  }
  if (r.remaining() != 0) throw CheckpointError("archive has trailing bytes");
  return entries;
}

void write_archive(const std::filesystem::path& path, const std::vector<ArchiveEntry>& entries) {
  const auto bytes = serialize_archive(entries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing '" + path.string() + "'");
}

std::vector<ArchiveEntry> read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_archive(ss.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace spartan
