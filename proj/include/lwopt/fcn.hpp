#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "lwopt/dataset.hpp"
#include "lwopt/problem.hpp"

namespace lwopt {

/// Five-weight-layer fully connected classifier: layer_dims holds the input
/// width, four hidden widths and the class count. Each parameter block k
/// packs W_k (row-major, out x in) followed by the bias b_k, so a layer's
/// weights and bias move under one per-layer rate.
struct FcnSpec {
  std::vector<int> layer_dims;  // 6 entries, 5 weight layers
  enum class Activation { sigmoid, relu };
  Activation activation = Activation::sigmoid;
  std::uint64_t init_seed = 0;

  static constexpr int kWeightLayers = 5;
  void validate() const;
};

/// Softmax cross-entropy FCN over a fixed dataset with manual
/// backpropagation for per-sample gradients.
class Fcn final : public Problem {
 public:
  Fcn(FcnSpec spec, std::shared_ptr<const Dataset> data);

  int num_samples() const override { return data_->size(); }
  double sample_loss(const BlockVector& w, int sample) const override;
  void sample_grad(const BlockVector& w, int sample,
                   BlockVector& grad) const override;
  double sample_loss_and_grad(const BlockVector& w, int sample,
                              BlockVector& grad) const override;

  /// Seeded init: every weight and bias of layer k uniform in
  /// [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  BlockVector initial_point() const;

  const FcnSpec& spec() const { return spec_; }

 private:
  double forward(const BlockVector& w, int sample,
                 std::vector<double>& acts) const;

  FcnSpec spec_;
  std::shared_ptr<const Dataset> data_;
  std::vector<std::size_t> act_offset_;  // activation buffer offsets per stage
  std::size_t act_size_ = 0;
};

std::shared_ptr<Fcn> make_fcn(FcnSpec spec, std::shared_ptr<const Dataset> data);

}  // namespace lwopt
