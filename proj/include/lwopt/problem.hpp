#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "lwopt/block.hpp"

namespace lwopt {

/// Indices of the samples in one mini-batch, drawn without replacement.
struct MiniBatch {
  std::vector<std::int32_t> indices;

  int size() const { return static_cast<int>(indices.size()); }
  static MiniBatch all(int n);
  static MiniBatch single(int i) { return MiniBatch{{static_cast<std::int32_t>(i)}}; }
};

/// Per-layer statistics of one batch evaluation, everything the rate rules
/// need:
///   weight_norm          ||(w)_k||
///   batch_grad_norm      ||(1/B) sum_i grad_k f_i||
///   mean_sample_sq_norm  (1/B) sum_i ||grad_k f_i||^2
///   mean_sample_norm     (1/B) sum_i ||grad_k f_i||
/// Triangle inequality gives batch_grad_norm <= mean_sample_norm, Jensen
/// gives mean_sample_norm^2 <= mean_sample_sq_norm.
struct LayerStats {
  std::vector<double> weight_norm;
  std::vector<double> batch_grad_norm;
  std::vector<double> mean_sample_sq_norm;
  std::vector<double> mean_sample_norm;
  int batch_size = 0;

  int layers() const { return static_cast<int>(weight_norm.size()); }
};

/// A finite-sum objective f(w) = (1/n) sum_i f_i(w) with per-layer block
/// structure. Instances are immutable after construction and safe to share
/// across threads; per-sample evaluation has no shared mutable state.
class Problem {
 public:
  virtual ~Problem() = default;

  const BlockLayout& layout() const { return *layout_; }
  const std::shared_ptr<const BlockLayout>& layout_ptr() const { return layout_; }

  virtual int num_samples() const = 0;
  virtual double sample_loss(const BlockVector& w, int sample) const = 0;
  virtual void sample_grad(const BlockVector& w, int sample,
                           BlockVector& grad) const = 0;

  /// Loss and gradient of one sample in a single evaluation. The returned
  /// loss must be bit-identical to sample_loss.
  virtual double sample_loss_and_grad(const BlockVector& w, int sample,
                                      BlockVector& grad) const {
    sample_grad(w, sample, grad);
    return sample_loss(w, sample);
  }

  /// Fills grad with the exact full-data gradient when the problem has a
  /// closed form for it; returns false otherwise.
  virtual bool full_grad_closed_form(const BlockVector& /*w*/,
                                     BlockVector& /*grad*/) const {
    return false;
  }

 protected:
  explicit Problem(std::shared_ptr<const BlockLayout> layout)
      : layout_(std::move(layout)) {}

  std::shared_ptr<const BlockLayout> layout_;
};

/// Batched evaluation. All batch sums use a fixed reduction: samples are
/// accumulated sequentially inside 32-sample chunks and chunk partials are
/// combined by a pairwise tree, so the result is a pure function of the
/// batch and never of the worker-thread count.
double eval_loss(const Problem& p, const BlockVector& w, const MiniBatch& batch);
BlockVector eval_grad_batch(const Problem& p, const BlockVector& w,
                            const MiniBatch& batch);
LayerStats eval_layer_stats(const Problem& p, const BlockVector& w,
                            const MiniBatch& batch);

struct BatchEval {
  double loss = 0.0;
  BlockVector grad;
  LayerStats stats;
};

/// One pass producing loss, batch gradient and layer stats together. Each
/// field is bit-identical to what the single-purpose entry points return.
BatchEval eval_batch(const Problem& p, const BlockVector& w,
                     const MiniBatch& batch);

struct LossGrad {
  double loss = 0.0;
  BlockVector grad;
};

/// Loss and batch gradient without the per-layer stats.
LossGrad eval_loss_grad_batch(const Problem& p, const BlockVector& w,
                              const MiniBatch& batch);

/// Full-data gradient: closed form when available, otherwise a batch
/// evaluation over every sample.
BlockVector full_gradient(const Problem& p, const BlockVector& w);

/// Without-replacement mini-batches from a seeded per-epoch shuffle. The
/// ragged tail (n mod batch samples) of each epoch is dropped. A given
/// (n, batch, seed) triple always yields the same batch sequence.
class EpochSampler {
 public:
  EpochSampler(int num_samples, int batch, std::uint64_t seed);

  MiniBatch next();
  int iters_per_epoch() const { return iters_per_epoch_; }
  std::int64_t epochs_started() const { return epoch_; }

 private:
  void reshuffle();

  std::vector<std::int32_t> order_;
  int batch_;
  int cursor_ = 0;
  int iters_per_epoch_;
  std::int64_t epoch_ = 0;
  std::uint64_t seed_;
};

}  // namespace lwopt
