#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "elastic/layer.hpp"
#include "elastic/tensor.hpp"

namespace elastic {

/// Byte images (H, W, C row-major, one after another) and class labels.
struct Dataset {
  FeatureShape shape;
  std::size_t classes = 10;
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return std::span<const std::uint8_t>(pixels).subspan(i * shape.size(), shape.size());
  }
  /// Throws FormatError when pixel count or a label is inconsistent.
  void validate() const;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// CIFAR-10 binary batch: 3073-byte records (label, 1024 R, 1024 G, 1024 B).
Dataset load_cifar10_binary(const std::filesystem::path& path);
Dataset parse_cifar10_binary(std::span<const std::uint8_t> bytes);

/// MNIST IDX pair (magic 0x803 images, 0x801 labels, big-endian header).
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
Dataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);

/// Appends `b` to `a`; shapes and class counts must agree.
void append(Dataset& a, const Dataset& b);

/// Whole dataset as (N, H, W, C) floats v / 255.
Tensor<float> normalize(const Dataset& data);

/// Selected samples as a normalized (n, H, W, C) batch.
Tensor<float> gather_batch(const Dataset& data, std::span<const std::size_t> indices);
std::vector<int> gather_labels(const Dataset& data, std::span<const std::size_t> indices);

Dataset select(const Dataset& data, std::span<const std::size_t> indices);

/// Seeded shuffle, then the first floor(n * fraction) samples train.
std::pair<Dataset, Dataset> split_train_val(const Dataset& data, const SplitSpec& spec);

/// Seeded choice of `per_class` samples of every class (all of them when a
/// class has fewer). Chosen samples keep their original relative order.
Dataset subsample(const Dataset& data, std::size_t per_class, std::uint64_t seed);

/// Nearest-neighbour resize of every image.
Dataset resize_nearest(const Dataset& data, std::size_t height, std::size_t width);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace elastic
