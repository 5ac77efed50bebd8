#include "lwopt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "lwopt/errors.hpp"
#include "lwopt/rng.hpp"

namespace lwopt {

void Dataset::validate() const {
  if (size() < 1) throw config_error("dataset: needs at least one sample");
  if (feature_dim < 1) throw config_error("dataset: feature_dim must be >= 1");
  if (num_classes < 2) throw config_error("dataset: needs at least two classes");
  if (features.size() !=
      static_cast<std::size_t>(size()) * static_cast<std::size_t>(feature_dim)) {
    throw config_error("dataset: feature matrix shape mismatch");
  }
  for (double x : features) {
    if (!std::isfinite(x)) throw config_error("dataset: non-finite feature");
  }
  for (std::int32_t y : labels) {
    if (y < 0 || y >= num_classes) throw config_error("dataset: label out of range");
  }
}

Dataset make_synthetic_blobs(int n, int dim, int classes, double spread,
                             std::uint64_t seed) {
  if (classes < 2) throw config_error("blobs: need at least two classes");
  if (n < classes) throw config_error("blobs: need at least one sample per class");
  if (dim < 1) throw config_error("blobs: dim must be >= 1");
  if (spread < 0.0) throw config_error("blobs: spread must be >= 0");

  Rng rng(seed);
  std::vector<double> centers(static_cast<std::size_t>(classes) * dim);
  for (double& c : centers) c = rng.normal();

  Dataset data;
  data.feature_dim = dim;
  data.num_classes = classes;
  data.features.resize(static_cast<std::size_t>(n) * dim);
  data.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = i % classes;
    data.labels[static_cast<std::size_t>(i)] = label;
    const double* c = centers.data() + static_cast<std::size_t>(label) * dim;
    double* x = data.features.data() + static_cast<std::size_t>(i) * dim;
    for (int j = 0; j < dim; ++j) x[j] = c[j] + spread * rng.normal();
  }
  return data;
}

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_u32_be(const std::vector<unsigned char>& bytes,
                          std::size_t offset, const std::string& field) {
  if (offset + 4 > bytes.size()) {
    throw parse_error("truncated file: missing " + field);
  }
  return (std::uint32_t(bytes[offset]) << 24) |
         (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) |
         std::uint32_t(bytes[offset + 3]);
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path,
                       const std::string& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);

  const std::uint32_t img_magic = read_u32_be(img, 0, "images magic");
  if (img_magic != 0x00000803u) {
    throw parse_error("images magic: expected 0x00000803, got " + hex32(img_magic));
  }
  const std::uint32_t img_count = read_u32_be(img, 4, "images count");
  const std::uint32_t rows = read_u32_be(img, 8, "images rows");
  const std::uint32_t cols = read_u32_be(img, 12, "images cols");
  const std::size_t pixels =
      std::size_t(img_count) * std::size_t(rows) * std::size_t(cols);
  if (img.size() != 16 + pixels) {
    throw parse_error("images pixel data: expected " + std::to_string(16 + pixels) +
                      " bytes, file has " + std::to_string(img.size()));
  }

  const std::uint32_t lab_magic = read_u32_be(lab, 0, "labels magic");
  if (lab_magic != 0x00000801u) {
    throw parse_error("labels magic: expected 0x00000801, got " + hex32(lab_magic));
  }
  const std::uint32_t lab_count = read_u32_be(lab, 4, "labels count");
  if (lab.size() != 8 + std::size_t(lab_count)) {
    throw parse_error("labels data: expected " + std::to_string(8 + lab_count) +
                      " bytes, file has " + std::to_string(lab.size()));
  }
  if (img_count != lab_count) {
    throw parse_error("count mismatch: " + std::to_string(img_count) +
                      " images vs " + std::to_string(lab_count) + " labels");
  }
  if (img_count == 0) throw parse_error("images count: zero samples");

  Dataset data;
  data.feature_dim = static_cast<int>(rows * cols);
  data.features.resize(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    data.features[i] = static_cast<double>(img[16 + i]) / 255.0;
  }
  data.labels.resize(lab_count);
  std::int32_t max_label = 0;
  for (std::uint32_t i = 0; i < lab_count; ++i) {
    data.labels[i] = lab[8 + i];
    max_label = std::max(max_label, data.labels[i]);
  }
  data.num_classes = std::max(max_label + 1, 2);
  return data;
}

}  // namespace lwopt
