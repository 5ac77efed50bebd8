#include "lwopt/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lwopt/errors.hpp"
#include "lwopt/parallel.hpp"
#include "lwopt/rng.hpp"

namespace lwopt {
namespace {

constexpr int kChunk = 32;  // samples per reduction leaf

struct ChunkPartial {
  double loss = 0.0;
  std::vector<double> grad_sum;        // flat, layout-sized
  std::vector<double> sq_norm_sum;     // per layer
  std::vector<double> norm_sum;        // per layer
};

void merge_into(ChunkPartial& a, const ChunkPartial& b) {
  a.loss += b.loss;
  for (std::size_t i = 0; i < a.grad_sum.size(); ++i) a.grad_sum[i] += b.grad_sum[i];
  for (std::size_t i = 0; i < a.sq_norm_sum.size(); ++i) {
    a.sq_norm_sum[i] += b.sq_norm_sum[i];
    a.norm_sum[i] += b.norm_sum[i];
  }
}

// Pairwise tree over chunk partials; shape depends only on the count.
ChunkPartial tree_reduce(std::vector<ChunkPartial>& parts, std::size_t lo,
                         std::size_t hi) {
  if (hi - lo == 1) return std::move(parts[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  ChunkPartial left = tree_reduce(parts, lo, mid);
  ChunkPartial right = tree_reduce(parts, mid, hi);
  merge_into(left, right);
  return left;
}

void validate_batch(const Problem& p, const BlockVector& w,
                    const MiniBatch& batch) {
  if (!(w.layout() == p.layout())) {
    throw config_error("batch evaluation: iterate layout does not match problem");
  }
  if (batch.indices.empty()) {
    throw config_error("batch evaluation: empty mini-batch");
  }
  for (std::int32_t i : batch.indices) {
    if (i < 0 || i >= p.num_samples()) {
      throw config_error("batch evaluation: sample index out of range");
    }
  }
}

ChunkPartial chunked_eval(const Problem& p, const BlockVector& w,
                          const MiniBatch& batch, bool want_grad,
                          bool want_stats) {
  const int b = batch.size();
  const int chunks = (b + kChunk - 1) / kChunk;
  const int layers = p.layout().blocks();
  std::vector<ChunkPartial> parts(static_cast<std::size_t>(chunks));

  par::parallel_for(chunks, [&](std::int64_t c) {
    ChunkPartial part;
    if (want_grad) part.grad_sum.assign(p.layout().dim(), 0.0);
    if (want_stats) {
      part.sq_norm_sum.assign(static_cast<std::size_t>(layers), 0.0);
      part.norm_sum.assign(static_cast<std::size_t>(layers), 0.0);
    }
    BlockVector grad(p.layout_ptr());
    const int lo = static_cast<int>(c) * kChunk;
    const int hi = std::min(lo + kChunk, b);
    for (int j = lo; j < hi; ++j) {
      const int sample = batch.indices[static_cast<std::size_t>(j)];
      if (want_grad || want_stats) {
        part.loss += p.sample_loss_and_grad(w, sample, grad);
        if (want_grad) {
          auto g = grad.data();
          for (std::size_t i = 0; i < g.size(); ++i) part.grad_sum[i] += g[i];
        }
        if (want_stats) {
          for (int k = 0; k < layers; ++k) {
            const double s = sq_norm(grad.block(k));
            part.sq_norm_sum[static_cast<std::size_t>(k)] += s;
            part.norm_sum[static_cast<std::size_t>(k)] += std::sqrt(s);
          }
        }
      } else {
        part.loss += p.sample_loss(w, sample);
      }
    }
    parts[static_cast<std::size_t>(c)] = std::move(part);
  });

  return tree_reduce(parts, 0, parts.size());
}

}  // namespace

MiniBatch MiniBatch::all(int n) {
  MiniBatch b;
  b.indices.resize(static_cast<std::size_t>(n));
  std::iota(b.indices.begin(), b.indices.end(), 0);
  return b;
}

double eval_loss(const Problem& p, const BlockVector& w, const MiniBatch& batch) {
  validate_batch(p, w, batch);
  return chunked_eval(p, w, batch, false, false).loss / batch.size();
}

BlockVector eval_grad_batch(const Problem& p, const BlockVector& w,
                            const MiniBatch& batch) {
  validate_batch(p, w, batch);
  ChunkPartial total = chunked_eval(p, w, batch, true, false);
  BlockVector grad(p.layout_ptr());
  const double inv_b = 1.0 / batch.size();
  auto out = grad.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = total.grad_sum[i] * inv_b;
  return grad;
}

namespace {

LayerStats stats_from_partial(const Problem& p, const BlockVector& w,
                              const ChunkPartial& total, int batch_size) {
  const int layers = p.layout().blocks();
  const double inv_b = 1.0 / batch_size;
  LayerStats stats;
  stats.batch_size = batch_size;
  stats.weight_norm = block_l2_norms(w);
  stats.batch_grad_norm.resize(static_cast<std::size_t>(layers));
  stats.mean_sample_sq_norm.resize(static_cast<std::size_t>(layers));
  stats.mean_sample_norm.resize(static_cast<std::size_t>(layers));
  for (int k = 0; k < layers; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    double s = 0.0;
    const std::size_t off = p.layout().offset(k);
    const std::size_t dim = static_cast<std::size_t>(p.layout().block_dim(k));
    for (std::size_t i = off; i < off + dim; ++i) {
      const double g = total.grad_sum[i] * inv_b;
      s += g * g;
    }
    stats.batch_grad_norm[ks] = std::sqrt(s);
    stats.mean_sample_sq_norm[ks] = total.sq_norm_sum[ks] * inv_b;
    stats.mean_sample_norm[ks] = total.norm_sum[ks] * inv_b;
  }
  return stats;
}

}  // namespace

LayerStats eval_layer_stats(const Problem& p, const BlockVector& w,
                            const MiniBatch& batch) {
  validate_batch(p, w, batch);
  ChunkPartial total = chunked_eval(p, w, batch, true, true);
  return stats_from_partial(p, w, total, batch.size());
}

BatchEval eval_batch(const Problem& p, const BlockVector& w,
                     const MiniBatch& batch) {
  validate_batch(p, w, batch);
  ChunkPartial total = chunked_eval(p, w, batch, true, true);
  BatchEval result{0.0, BlockVector(p.layout_ptr()), {}};
  const double inv_b = 1.0 / batch.size();
  result.loss = total.loss * inv_b;
  auto out = result.grad.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = total.grad_sum[i] * inv_b;
  result.stats = stats_from_partial(p, w, total, batch.size());
  return result;
}

LossGrad eval_loss_grad_batch(const Problem& p, const BlockVector& w,
                              const MiniBatch& batch) {
  validate_batch(p, w, batch);
  ChunkPartial total = chunked_eval(p, w, batch, true, false);
  LossGrad result{0.0, BlockVector(p.layout_ptr())};
  const double inv_b = 1.0 / batch.size();
  result.loss = total.loss * inv_b;
  auto out = result.grad.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = total.grad_sum[i] * inv_b;
  return result;
}

BlockVector full_gradient(const Problem& p, const BlockVector& w) {
  BlockVector grad(p.layout_ptr());
  if (p.full_grad_closed_form(w, grad)) return grad;
  return eval_grad_batch(p, w, MiniBatch::all(p.num_samples()));
}

EpochSampler::EpochSampler(int num_samples, int batch, std::uint64_t seed)
    : batch_(batch), seed_(seed) {
  if (num_samples < 1) throw config_error("sampler: need at least one sample");
  if (batch < 1 || batch > num_samples) {
    throw config_error("sampler: batch size must be in [1, num_samples]");
  }
  order_.resize(static_cast<std::size_t>(num_samples));
  std::iota(order_.begin(), order_.end(), 0);
  iters_per_epoch_ = num_samples / batch;
  reshuffle();
}

void EpochSampler::reshuffle() {
  Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(epoch_)));
  std::iota(order_.begin(), order_.end(), 0);
  rng.shuffle(order_);
  cursor_ = 0;
}

MiniBatch EpochSampler::next() {
  if (cursor_ + batch_ > static_cast<int>(order_.size()) ||
      cursor_ >= iters_per_epoch_ * batch_) {
    ++epoch_;
    reshuffle();
  }
  MiniBatch b;
  b.indices.assign(order_.begin() + cursor_, order_.begin() + cursor_ + batch_);
  cursor_ += batch_;
  return b;
}

}  // namespace lwopt
