#include "elastic/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

namespace elastic {
namespace {

constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarPlane = kCifarSide * kCifarSide;
constexpr std::size_t kCifarRecord = 1 + 3 * kCifarPlane;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s += digits[(v >> shift) & 0xF];
  return s;
}

}  // namespace

void Dataset::validate() const {
  if (pixels.size() != labels.size() * shape.size()) {
    throw FormatError("dataset holds " + std::to_string(pixels.size()) + " pixel bytes for " +
                      std::to_string(labels.size()) + " images");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw FormatError("sample " + std::to_string(i) + " has label " + std::to_string(labels[i]));
    }
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

Dataset parse_cifar10_binary(std::span<const std::uint8_t> bytes) {
  Dataset d;
  d.shape = {kCifarSide, kCifarSide, 3};
  d.classes = 10;
  const std::size_t records = bytes.size() / kCifarRecord;
  if (records * kCifarRecord != bytes.size()) {
    throw FormatError("truncated CIFAR-10 record at byte offset " +
                      std::to_string(records * kCifarRecord) + " (file length " +
                      std::to_string(bytes.size()) + " is not a multiple of 3073)");
  }
  d.pixels.resize(records * 3 * kCifarPlane);
  d.labels.resize(records);
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t base = r * kCifarRecord;
    if (bytes[base] > 9) {
      throw FormatError("CIFAR-10 label " + std::to_string(bytes[base]) + " at byte offset " +
                        std::to_string(base));
    }
    d.labels[r] = bytes[base];
    std::uint8_t* out = d.pixels.data() + r * 3 * kCifarPlane;
    for (std::size_t c = 0; c < 3; ++c) {
      const std::uint8_t* plane = bytes.data() + base + 1 + c * kCifarPlane;
      for (std::size_t p = 0; p < kCifarPlane; ++p) out[p * 3 + c] = plane[p];
    }
  }
  return d;
}

Dataset load_cifar10_binary(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_cifar10_binary(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Dataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  if (images.size() < 16) throw FormatError("IDX image header needs 16 bytes");
  if (labels.size() < 8) throw FormatError("IDX label header needs 8 bytes");
  const std::uint32_t image_magic = read_be32(images, 0);
  if (image_magic != 0x803) {
    throw FormatError("IDX image magic: expected 0x00000803, got " + hex(image_magic));
  }
  const std::uint32_t label_magic = read_be32(labels, 0);
  if (label_magic != 0x801) {
    throw FormatError("IDX label magic: expected 0x00000801, got " + hex(label_magic));
  }
  const std::size_t count = read_be32(images, 4);
  const std::size_t rows = read_be32(images, 8);
  const std::size_t cols = read_be32(images, 12);
  const std::size_t label_count = read_be32(labels, 4);
  if (label_count != count) {
    throw FormatError("IDX files disagree: " + std::to_string(count) + " images, " +
                      std::to_string(label_count) + " labels");
  }
  if (rows == 0 || cols == 0) throw FormatError("IDX image extents must be positive");
  const std::size_t payload = count * rows * cols;
  if (images.size() != 16 + payload) {
    throw FormatError("IDX image payload is " + std::to_string(images.size() - 16) +
                      " bytes, header implies " + std::to_string(payload));
  }
  if (labels.size() != 8 + count) {
    throw FormatError("IDX label payload is " + std::to_string(labels.size() - 8) +
                      " bytes, header implies " + std::to_string(count));
  }
  Dataset d;
  d.shape = {rows, cols, 1};
  d.classes = 10;
  d.pixels.assign(images.begin() + 16, images.end());
  d.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (labels[8 + i] > 9) {
      throw FormatError("IDX label " + std::to_string(labels[8 + i]) + " at byte offset " +
                        std::to_string(8 + i));
    }
    d.labels[i] = labels[8 + i];
  }
  return d;
}

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  return parse_mnist_idx(read_file(images), read_file(labels));
}

void append(Dataset& a, const Dataset& b) {
  if (!(a.shape == b.shape) || a.classes != b.classes) {
    throw ShapeError("cannot append datasets of different image shape or class count");
  }
  a.pixels.insert(a.pixels.end(), b.pixels.begin(), b.pixels.end());
  a.labels.insert(a.labels.end(), b.labels.begin(), b.labels.end());
}

Tensor<float> gather_batch(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractViolation("empty batch");
  const std::size_t per = data.shape.size();
  Tensor<float> t({indices.size(), data.shape.height, data.shape.width, data.shape.channels});
  float* out = t.raw();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto img = data.image(indices[k]);
    for (std::size_t p = 0; p < per; ++p) out[k * per + p] = static_cast<float>(img[p]) / 255.0f;
  }
  return t;
}

std::vector<int> gather_labels(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<int> y;
  y.reserve(indices.size());
  for (std::size_t i : indices) y.push_back(data.labels.at(i));
  return y;
}

Tensor<float> normalize(const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gather_batch(data, all);
}

Dataset select(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.shape = data.shape;
  out.classes = data.classes;
  out.pixels.reserve(indices.size() * data.shape.size());
  for (std::size_t i : indices) {
    const auto img = data.image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    out.labels.push_back(data.labels.at(i));
  }
  return out;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& data, const SplitSpec& spec) {
  if (data.size() == 0) throw ConfigError("cannot split an empty dataset");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  const auto cut = static_cast<std::size_t>(
      std::floor(static_cast<double>(data.size()) * spec.train_fraction));
  if (cut == 0 || cut == data.size()) {
    throw ConfigError("train fraction " + std::to_string(spec.train_fraction) + " of " +
                      std::to_string(data.size()) + " samples leaves one side empty");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::span<const std::size_t> all(order);
  return {select(data, all.first(cut)), select(data, all.subspan(cut))};
}

Dataset subsample(const Dataset& data, std::size_t per_class, std::uint64_t seed) {
  if (per_class < 1) throw ConfigError("per-class count must be >= 1");
  std::vector<std::vector<std::size_t>> by_class(data.classes);
  for (std::size_t i = 0; i < data.size(); ++i) by_class.at(data.labels[i]).push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const std::size_t take = std::min(per_class, members.size());
    chosen.insert(chosen.end(), members.begin(), members.begin() + take);
  }
  std::sort(chosen.begin(), chosen.end());
  return select(data, chosen);
}

Dataset resize_nearest(const Dataset& data, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ConfigError("resize target must be positive");
  Dataset out;
  out.shape = {height, width, data.shape.channels};
  out.classes = data.classes;
  out.labels = data.labels;
  out.pixels.resize(data.size() * out.shape.size());
  const std::size_t c = data.shape.channels;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto src = data.image(i);
    std::uint8_t* dst = out.pixels.data() + i * out.shape.size();
    for (std::size_t y = 0; y < height; ++y) {
      const std::size_t sy = y * data.shape.height / height;
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t sx = x * data.shape.width / width;
        for (std::size_t ch = 0; ch < c; ++ch) {
          dst[(y * width + x) * c + ch] = src[(sy * data.shape.width + sx) * c + ch];
        }
      }
    }
  }
  return out;
}

}  // namespace elastic
