#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace lwopt {

/// Partition of a flat coordinate vector into K contiguous per-layer blocks.
/// Block k occupies [offset(k), offset(k) + block_dim(k)); this realizes the
/// permutation-block decomposition w = sum_k U_k w_k without materializing
/// any permutation matrix.
class BlockLayout {
 public:
  /// Throws config_error unless K >= 1 and every d_k >= 1.
  explicit BlockLayout(std::vector<int> dims);

  int blocks() const { return static_cast<int>(dims_.size()); }
  std::size_t dim() const { return offsets_.back(); }
  int block_dim(int k) const { return dims_[static_cast<std::size_t>(k)]; }
  std::size_t offset(int k) const { return offsets_[static_cast<std::size_t>(k)]; }
  const std::vector<int>& dims() const { return dims_; }

  friend bool operator==(const BlockLayout&, const BlockLayout&) = default;

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> offsets_;  // K+1 prefix sums
};

std::shared_ptr<const BlockLayout> make_layout(std::vector<int> dims);

/// Flat vector of doubles with block views defined by a shared layout.
class BlockVector {
 public:
  explicit BlockVector(std::shared_ptr<const BlockLayout> layout);

  const BlockLayout& layout() const { return *layout_; }
  const std::shared_ptr<const BlockLayout>& layout_ptr() const { return layout_; }

  std::span<double> block(int k) {
    return {data_.data() + layout_->offset(k),
            static_cast<std::size_t>(layout_->block_dim(k))};
  }
  std::span<const double> block(int k) const {
    return {data_.data() + layout_->offset(k),
            static_cast<std::size_t>(layout_->block_dim(k))};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::size_t size() const { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void fill(double value);
  bool all_finite() const;

  /// this += scale * other. Layout mismatch throws config_error.
  void add_scaled(const BlockVector& other, double scale);

 private:
  std::shared_ptr<const BlockLayout> layout_;
  std::vector<double> data_;
};

double sq_norm(std::span<const double> v);
double l2_norm(std::span<const double> v);

/// Per-block Euclidean norms; sum of their squares equals the squared norm of
/// the whole vector.
std::vector<double> block_l2_norms(const BlockVector& v);

/// Throws config_error unless both vectors share the layout.
void require_same_layout(const BlockVector& a, const BlockVector& b,
                         const char* what);

}  // namespace lwopt
