#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spartan/tensor.hpp"

namespace spartan {

/// Images in [0, 1], stored contiguously as [M, C, H, W] f32.
struct Dataset {
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;
  std::vector<std::int64_t> labels;
  std::string split = "train";

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return channels * height * width; }
  std::span<const float> image(std::size_t i) const {
    return std::span<const float>(pixels).subspan(i * image_size(), image_size());
  }
  /// Throws DataError on inconsistent sizes or labels outside [0, num_classes).
  void check(std::size_t num_classes) const;
};

enum class Augment { none, flip_crop };

Augment parse_augment(std::string_view name);
std::string_view augment_name(Augment a);

/// Loads either a directory holding "index.tsv" (lines "relpath<TAB>label",
/// each image a single-entry archive with a [C,H,W] f32 tensor) or a packed
/// archive with "images" [M,C,H,W] f32 and "labels" [M] i64.
/// Throws DataError when the path is missing or malformed.
Dataset load_dataset(const std::filesystem::path& path);

void save_packed(const Dataset& ds, const std::filesystem::path& path);
void save_directory(const Dataset& ds, const std::filesystem::path& dir);

/// Two-class colour-layout set: class 0 has a red top half over a blue bottom
/// half, class 1 the reverse, with uniform noise. Balanced, flip invariant.
Dataset make_quadrants(std::size_t count, std::size_t size, std::uint64_t seed,
                       std::string split = "train");

/// Copies images `indices` into a batch tensor, optionally with a random
/// horizontal flip and a 4-pixel zero-pad random crop per image.
template <class T>
Tensor<T> make_batch(const Dataset& ds, std::span<const std::size_t> indices, Augment augment,
                     std::mt19937_64& rng);

}  // namespace spartan
