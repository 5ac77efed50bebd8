#include "lwopt/block.hpp"

#include <cmath>

#include "lwopt/errors.hpp"

namespace lwopt {

BlockLayout::BlockLayout(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) {
    throw config_error("block layout needs at least one block");
  }
  offsets_.reserve(dims_.size() + 1);
  offsets_.push_back(0);
  for (int d : dims_) {
    if (d < 1) {
      throw config_error("block layout: every block dimension must be >= 1");
    }
    offsets_.push_back(offsets_.back() + static_cast<std::size_t>(d));
  }
}

std::shared_ptr<const BlockLayout> make_layout(std::vector<int> dims) {
  return std::make_shared<const BlockLayout>(std::move(dims));
}

BlockVector::BlockVector(std::shared_ptr<const BlockLayout> layout)
    : layout_(std::move(layout)), data_(layout_->dim(), 0.0) {}

void BlockVector::fill(double value) {
  for (double& x : data_) x = value;
}

bool BlockVector::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void BlockVector::add_scaled(const BlockVector& other, double scale) {
  require_same_layout(*this, other, "add_scaled");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    data_[i] += scale * other.data_[i];
  }
}

double sq_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(sq_norm(v)); }

std::vector<double> block_l2_norms(const BlockVector& v) {
  const int k_count = v.layout().blocks();
  std::vector<double> norms(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    norms[static_cast<std::size_t>(k)] = l2_norm(v.block(k));
  }
  return norms;
}

void require_same_layout(const BlockVector& a, const BlockVector& b,
                         const char* what) {
  if (!(a.layout() == b.layout())) {
    throw config_error(std::string(what) + ": block layouts differ");
  }
}

}  // namespace lwopt
