#include "lwopt/fcn.hpp"

#include <algorithm>
#include <cmath>

#include "lwopt/errors.hpp"
#include "lwopt/rng.hpp"

namespace lwopt {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::shared_ptr<const BlockLayout> fcn_layout(const FcnSpec& spec) {
  spec.validate();
  std::vector<int> dims;
  dims.reserve(FcnSpec::kWeightLayers);
  for (int k = 0; k < FcnSpec::kWeightLayers; ++k) {
    const int in = spec.layer_dims[static_cast<std::size_t>(k)];
    const int out = spec.layer_dims[static_cast<std::size_t>(k) + 1];
    dims.push_back(out * (in + 1));
  }
  return make_layout(std::move(dims));
}

thread_local std::vector<double> t_acts;
thread_local std::vector<double> t_delta;
thread_local std::vector<double> t_delta_prev;

}  // namespace

void FcnSpec::validate() const {
  if (layer_dims.size() != kWeightLayers + 1) {
    throw config_error("fcn: layer_dims needs input, four hidden and output widths");
  }
  for (int d : layer_dims) {
    if (d < 1) throw config_error("fcn: every layer width must be >= 1");
  }
}

Fcn::Fcn(FcnSpec spec, std::shared_ptr<const Dataset> data)
    : Problem(fcn_layout(spec)),
      spec_(std::move(spec)),
      data_(std::move(data)) {
  data_->validate();
  if (data_->feature_dim != spec_.layer_dims.front()) {
    throw config_error("fcn: input width must equal the dataset feature dim");
  }
  if (data_->num_classes != spec_.layer_dims.back()) {
    throw config_error("fcn: output width must equal the class count");
  }
  act_offset_.resize(spec_.layer_dims.size());
  for (std::size_t l = 0; l < spec_.layer_dims.size(); ++l) {
    act_offset_[l] = act_size_;
    act_size_ += static_cast<std::size_t>(spec_.layer_dims[l]);
  }
}

std::shared_ptr<Fcn> make_fcn(FcnSpec spec, std::shared_ptr<const Dataset> data) {
  return std::make_shared<Fcn>(std::move(spec), std::move(data));
}

double Fcn::forward(const BlockVector& w, int sample,
                    std::vector<double>& acts) const {
  acts.resize(act_size_);
  const double* x = data_->row(sample);
  const int in_dim = spec_.layer_dims.front();
  std::copy(x, x + in_dim, acts.begin());

  for (int l = 0; l < FcnSpec::kWeightLayers; ++l) {
    const int in = spec_.layer_dims[static_cast<std::size_t>(l)];
    const int out = spec_.layer_dims[static_cast<std::size_t>(l) + 1];
    const auto block = w.block(l);
    const double* weights = block.data();
    const double* bias = block.data() + static_cast<std::size_t>(out) * in;
    const double* h = acts.data() + act_offset_[static_cast<std::size_t>(l)];
    double* z = acts.data() + act_offset_[static_cast<std::size_t>(l) + 1];
    for (int j = 0; j < out; ++j) {
      const double* row = weights + static_cast<std::size_t>(j) * in;
      double s = bias[j];
      for (int i = 0; i < in; ++i) s += row[i] * h[i];
      z[j] = s;
    }
    if (l + 1 < FcnSpec::kWeightLayers) {
      if (spec_.activation == FcnSpec::Activation::sigmoid) {
        for (int j = 0; j < out; ++j) z[j] = sigmoid(z[j]);
      } else {
        for (int j = 0; j < out; ++j) z[j] = z[j] > 0.0 ? z[j] : 0.0;
      }
    }
  }

  // Softmax cross-entropy on the stored logits.
  const int classes = spec_.layer_dims.back();
  const double* logits = acts.data() + act_offset_.back();
  double zmax = logits[0];
  for (int j = 1; j < classes; ++j) zmax = std::max(zmax, logits[j]);
  double sum = 0.0;
  for (int j = 0; j < classes; ++j) sum += std::exp(logits[j] - zmax);
  const double lse = zmax + std::log(sum);
  const int label = data_->labels[static_cast<std::size_t>(sample)];
  return lse - logits[label];
}

double Fcn::sample_loss(const BlockVector& w, int sample) const {
  return forward(w, sample, t_acts);
}

double Fcn::sample_loss_and_grad(const BlockVector& w, int sample,
                                 BlockVector& grad) const {
  auto& acts = t_acts;
  const double loss = forward(w, sample, acts);

  const int classes = spec_.layer_dims.back();
  const double* logits = acts.data() + act_offset_.back();
  auto& delta = t_delta;
  auto& delta_prev = t_delta_prev;
  delta.resize(static_cast<std::size_t>(classes));

  double zmax = logits[0];
  for (int j = 1; j < classes; ++j) zmax = std::max(zmax, logits[j]);
  double sum = 0.0;
  for (int j = 0; j < classes; ++j) sum += std::exp(logits[j] - zmax);
  const int label = data_->labels[static_cast<std::size_t>(sample)];
  for (int j = 0; j < classes; ++j) {
    delta[static_cast<std::size_t>(j)] = std::exp(logits[j] - zmax) / sum;
  }
  delta[static_cast<std::size_t>(label)] -= 1.0;

  for (int l = FcnSpec::kWeightLayers - 1; l >= 0; --l) {
    const int in = spec_.layer_dims[static_cast<std::size_t>(l)];
    const int out = spec_.layer_dims[static_cast<std::size_t>(l) + 1];
    const auto wblock = w.block(l);
    const double* weights = wblock.data();
    const double* h = acts.data() + act_offset_[static_cast<std::size_t>(l)];

    auto gblock = grad.block(l);
    double* gw = gblock.data();
    double* gb = gblock.data() + static_cast<std::size_t>(out) * in;
    for (int j = 0; j < out; ++j) {
      const double dj = delta[static_cast<std::size_t>(j)];
      double* grow = gw + static_cast<std::size_t>(j) * in;
      for (int i = 0; i < in; ++i) grow[i] = dj * h[i];
      gb[j] = dj;
    }

    if (l > 0) {
      delta_prev.assign(static_cast<std::size_t>(in), 0.0);
      for (int j = 0; j < out; ++j) {
        const double dj = delta[static_cast<std::size_t>(j)];
        const double* row = weights + static_cast<std::size_t>(j) * in;
        for (int i = 0; i < in; ++i) delta_prev[static_cast<std::size_t>(i)] += row[i] * dj;
      }
      // Activation derivative from the stored post-activation value.
      if (spec_.activation == FcnSpec::Activation::sigmoid) {
        for (int i = 0; i < in; ++i) {
          delta_prev[static_cast<std::size_t>(i)] *= h[i] * (1.0 - h[i]);
        }
      } else {
        for (int i = 0; i < in; ++i) {
          if (h[i] <= 0.0) delta_prev[static_cast<std::size_t>(i)] = 0.0;
        }
      }
      std::swap(delta, delta_prev);
    }
  }
  return loss;
}

void Fcn::sample_grad(const BlockVector& w, int sample, BlockVector& grad) const {
  sample_loss_and_grad(w, sample, grad);
}

BlockVector Fcn::initial_point() const {
  BlockVector w(layout_ptr());
  Rng rng(spec_.init_seed);
  for (int k = 0; k < FcnSpec::kWeightLayers; ++k) {
    const double bound =
        1.0 / std::sqrt(static_cast<double>(spec_.layer_dims[static_cast<std::size_t>(k)]));
    for (double& value : w.block(k)) value = rng.uniform(-bound, bound);
  }
  return w;
}

}  // namespace lwopt
