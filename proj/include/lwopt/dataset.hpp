#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lwopt {

/// Classification dataset: row-major features, integer labels in
/// [0, num_classes).
struct Dataset {
  int feature_dim = 0;
  int num_classes = 0;
  std::vector<double> features;  // n x feature_dim
  std::vector<std::int32_t> labels;

  int size() const { return static_cast<int>(labels.size()); }
  const double* row(int i) const {
    return features.data() + static_cast<std::size_t>(i) * feature_dim;
  }
  void validate() const;
};

/// Seeded Gaussian clusters, one per class, class of sample i = i mod classes
/// so counts differ by at most one.
Dataset make_synthetic_blobs(int n, int dim, int classes, double spread,
                             std::uint64_t seed);

/// IDX readers (big-endian): images magic 0x00000803 with u32 count/rows/cols
/// then count*rows*cols bytes; labels magic 0x00000801 with u32 count then
/// count bytes. Pixels are scaled to [0, 1]. Image and label counts must
/// match. Malformed input throws parse_error naming the bad field.
Dataset load_mnist_idx(const std::string& images_path,
                       const std::string& labels_path);

}  // namespace lwopt
