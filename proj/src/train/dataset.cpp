#include "spartan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spartan/archive.hpp"

namespace spartan {

namespace fs = std::filesystem;

void Dataset::check(std::size_t num_classes) const {
  if (pixels.size() != size() * image_size()) {
    throw DataError("dataset: " + std::to_string(pixels.size()) + " pixel values for " +
                    std::to_string(size()) + " images of " + std::to_string(image_size()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw DataError("dataset: label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Augment parse_augment(std::string_view name) {
  if (name == "none") return Augment::none;
  if (name == "flip_crop") return Augment::flip_crop;
  throw ConfigError("unknown augmentation '" + std::string(name) + "' (none, flip_crop)");
}

std::string_view augment_name(Augment a) { return a == Augment::none ? "none" : "flip_crop"; }

namespace {

std::vector<ArchiveEntry> read_data_archive(const fs::path& path) {
  try {
    return read_archive(path);
  } catch (const CheckpointError& e) {
    throw DataError(std::string("dataset: ") + e.what());
  }
}

const ArchiveEntry& find_entry(const std::vector<ArchiveEntry>& entries, const std::string& name,
                               const fs::path& path) {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw DataError("dataset archive '" + path.string() + "' has no '" + name + "' entry");
}

Dataset load_packed(const fs::path& path) {
  const auto entries = read_data_archive(path);
  const auto& images = find_entry(entries, "images", path);
  const auto& labels = find_entry(entries, "labels", path);
  if (images.dtype != ArchiveDType::f32 || images.shape.size() != 4) {
    throw DataError("dataset archive '" + path.string() + "': 'images' must be a rank-4 f32 tensor");
  }
  if (labels.dtype != ArchiveDType::i64 || labels.shape.size() != 1 || labels.shape[0] != images.shape[0]) {
    throw DataError("dataset archive '" + path.string() + "': 'labels' must be an i64 vector with one entry per image");
  }
  Dataset ds;
  ds.channels = images.shape[1];
  ds.height = images.shape[2];
  ds.width = images.shape[3];
  ds.pixels = images.values<float>();
  ds.labels = labels.values<std::int64_t>();
  return ds;
}

Dataset load_directory(const fs::path& dir) {
  const auto index_path = dir / "index.tsv";
  std::ifstream index(index_path);
  if (!index) throw DataError("dataset directory '" + dir.string() + "' has no readable index.tsv");
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(index, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string where = index_path.string() + ":" + std::to_string(line_no);
    if (tab == std::string::npos) throw DataError(where + ": expected 'path<TAB>label'");
    const std::string rel = line.substr(0, tab);
    const std::string label_text = line.substr(tab + 1);
    std::int64_t label = 0;
    auto [p, ec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
    if (ec != std::errc{} || p != label_text.data() + label_text.size()) {
      throw DataError(where + ": bad label '" + label_text + "'");
    }
    const auto entries = read_data_archive(dir / rel);
    if (entries.size() != 1 || entries[0].dtype != ArchiveDType::f32 || entries[0].shape.size() != 3) {
      throw DataError(where + ": image '" + rel + "' must hold a single [C,H,W] f32 tensor");
    }
    const auto& img = entries[0];
    if (first) {
      ds.channels = img.shape[0];
      ds.height = img.shape[1];
      ds.width = img.shape[2];
      first = false;
    } else if (img.shape != Shape{ds.channels, ds.height, ds.width}) {
      throw DataError(where + ": image '" + rel + "' has shape " + shape_str(img.shape) + ", expected " +
                      shape_str({ds.channels, ds.height, ds.width}));
    }
    const auto values = img.values<float>();
    ds.pixels.insert(ds.pixels.end(), values.begin(), values.end());
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace

Dataset load_dataset(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw DataError("dataset path '" + path.string() + "' does not exist");
  return fs::is_directory(path, ec) ? load_directory(path) : load_packed(path);
}

void save_packed(const Dataset& ds, const fs::path& path) {
  std::vector<ArchiveEntry> entries;
  entries.push_back(ArchiveEntry::from_values<float>(
      "images", {ds.size(), ds.channels, ds.height, ds.width}, ds.pixels));
  entries.push_back(ArchiveEntry::from_values<std::int64_t>("labels", {ds.size()}, ds.labels));
  write_archive(path, entries);
}

void save_directory(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream index(dir / "index.tsv", std::ios::trunc);
  if (!index) throw DataError("cannot write '" + (dir / "index.tsv").string() + "'");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%06zu.sprt", i);
    write_archive(dir / name, {ArchiveEntry::from_values<float>(
                                  "image", {ds.channels, ds.height, ds.width}, ds.image(i))});
    index << name << '\t' << ds.labels[i] << '\n';
  }
}

Dataset make_quadrants(std::size_t count, std::size_t size, std::uint64_t seed, std::string split) {
  Dataset ds;
  ds.height = ds.width = size;
  ds.split = std::move(split);
  ds.pixels.resize(count * ds.image_size());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(-0.2f, 0.2f);
  constexpr float red[3] = {0.8f, 0.15f, 0.15f};
  constexpr float blue[3] = {0.15f, 0.15f, 0.8f};
  for (std::size_t i = 0; i < count; ++i) {
    const auto label = static_cast<std::int64_t>(i % 2);
    ds.labels.push_back(label);
    float* img = ds.pixels.data() + i * ds.image_size();
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < size; ++y) {
        const bool top = y < size / 2;
        const float base = (top == (label == 0)) ? red[c] : blue[c];
        for (std::size_t x = 0; x < size; ++x) {
          img[(c * size + y) * size + x] = std::clamp(base + noise(rng), 0.0f, 1.0f);
        }
      }
    }
  }
  return ds;
}

template <class T>
Tensor<T> make_batch(const Dataset& ds, std::span<const std::size_t> indices, Augment augment,
                     std::mt19937_64& rng) {
  constexpr std::ptrdiff_t kPad = 4;
  const std::size_t c = ds.channels, h = ds.height, w = ds.width;
  std::vector<T> out(indices.size() * ds.image_size(), T{0});
  std::uniform_int_distribution<int> shift(0, 2 * kPad);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= ds.size()) throw DataError("batch index " + std::to_string(indices[b]) + " out of range");
    const auto src = ds.image(indices[b]);
    T* dst = out.data() + b * ds.image_size();
    bool flip = false;
    std::ptrdiff_t dy = 0, dx = 0;
    if (augment == Augment::flip_crop) {
      flip = (rng() & 1) != 0;
      dy = shift(rng) - kPad;
      dx = shift(rng) - kPad;
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < h; ++y) {
        const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t x = 0; x < w; ++x) {
          auto sx = static_cast<std::ptrdiff_t>(x) + dx;
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
          if (flip) sx = static_cast<std::ptrdiff_t>(w) - 1 - sx;
          dst[(ch * h + y) * w + x] = static_cast<T>(src[(ch * h + sy) * w + sx]);
        }
      }
    }
  }
  return Tensor<T>({indices.size(), c, h, w}, std::move(out));
}

template Tensor<float> make_batch(const Dataset&, std::span<const std::size_t>, Augment, std::mt19937_64&);
template Tensor<double> make_batch(const Dataset&, std::span<const std::size_t>, Augment, std::mt19937_64&);

}  // namespace spartan
