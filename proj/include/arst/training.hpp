#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arst/model.hpp"
#include "arst/numerics.hpp"
#include "arst/video.hpp"

namespace arst {

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t epochs = 20;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::optional<double> grad_clip;  // max global L2 norm
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("train.learning_rate must be > 0");
    }
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("train.adam_beta1 must be in [0,1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("train.adam_beta2 must be in [0,1)");
    if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
    if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("train.grad_clip must be > 0");
  }
};

class TrainingNumericError : public NumericError {
 public:
  TrainingNumericError(const std::string& video, std::size_t step, double loss)
      : NumericError("non-finite loss " + std::to_string(loss) + " on video '" + video +
                     "' at optimizer step " + std::to_string(step)),
        video_id(video),
        step(step) {}
  std::string video_id;
  std::size_t step;
};

template <typename Scalar>
struct LossAndGrad {
  double loss = 0.0;
  Matrix<Scalar> dlogits;
};

// Mean over frames of -log softmax(logits_t)[y_t]; labels are 1-based.
template <typename Scalar>
LossAndGrad<Scalar> cross_entropy_loss(const Matrix<Scalar>& logits, std::span<const int> labels) {
  if (logits.rows() != labels.size()) {
    throw DimensionError("cross_entropy_loss: " + std::to_string(logits.rows()) + " logit rows for " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t T = logits.rows();
  const std::size_t c = logits.cols();
  LossAndGrad<Scalar> out;
  out.dlogits = Matrix<Scalar>(T, c);
  const Scalar inv_t = Scalar(1) / static_cast<Scalar>(T);
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const int y = labels[t];
    if (y < 1 || static_cast<std::size_t>(y) > c) {
      throw std::domain_error("cross_entropy_loss: label " + std::to_string(y) + " at frame " +
                              std::to_string(t) + " outside [1, " + std::to_string(c) + "]");
    }
    const auto row = logits.row(t);
    Scalar mx = row[0];
    for (Scalar v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (Scalar v : row) sum += std::exp(static_cast<double>(v - mx));
    const double log_z = static_cast<double>(mx) + std::log(sum);
    total += log_z - static_cast<double>(row[static_cast<std::size_t>(y - 1)]);
    auto g = out.dlogits.row(t);
    for (std::size_t k = 0; k < c; ++k) {
      const double p = std::exp(static_cast<double>(row[k]) - log_z);
      g[k] = static_cast<Scalar>(p - (static_cast<std::size_t>(y - 1) == k ? 1.0 : 0.0)) * inv_t;
    }
  }
  out.loss = total / static_cast<double>(T);
  return out;
}

template <typename Scalar>
struct AdamState {
  std::vector<Matrix<Scalar>> m;
  std::vector<Matrix<Scalar>> v;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::span<Parameter<Scalar>* const> params) {
    for (const auto* p : params) {
      m.emplace_back(p->value.rows(), p->value.cols());
      v.emplace_back(p->value.rows(), p->value.cols());
    }
  }
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update in place; grads are zeroed afterwards.
template <typename Scalar>
void adam_step(std::span<Parameter<Scalar>* const> params, AdamState<Scalar>& state, double lr,
               const AdamHyper& hp = {}) {
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_step: state holds " + std::to_string(state.m.size()) +
                         " tensors for " + std::to_string(params.size()) + " parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  const auto b1 = static_cast<Scalar>(hp.beta1);
  const auto b2 = static_cast<Scalar>(hp.beta2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& val = params[k]->value.data();
    auto& grad = params[k]->grad.data();
    auto& m = state.m[k].data();
    auto& v = state.v[k].data();
    for (std::size_t i = 0; i < val.size(); ++i) {
      const Scalar g = grad[i];
      m[i] = b1 * m[i] + (Scalar(1) - b1) * g;
      v[i] = b2 * v[i] + (Scalar(1) - b2) * g * g;
      const double mhat = static_cast<double>(m[i]) / c1;
      const double vhat = static_cast<double>(v[i]) / c2;
      val[i] = static_cast<Scalar>(static_cast<double>(val[i]) - lr * mhat / (std::sqrt(vhat) + hp.eps));
      grad[i] = Scalar(0);
    }
  }
}

template <typename Scalar>
double global_grad_norm(std::span<Parameter<Scalar>* const> params) {
  double s = 0.0;
  for (const auto* p : params) {
    for (Scalar g : p->grad.data()) s += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(s);
}

// Teacher-forced loss and grads for one video. Grads are accumulated, not reset.
template <typename Scalar>
double video_loss_and_grad(ArstModel<Scalar>& model, const Matrix<Scalar>& features,
                           std::span<const int> labels) {
  const auto tokens = shift_labels(labels);
  typename ArstModel<Scalar>::ForwardCache cache;
  const Matrix<Scalar> logits = model.forward_teacher_forced(features, tokens, &cache);
  const auto lg = cross_entropy_loss(logits, labels);
  if (std::isfinite(lg.loss)) model.backward(cache, lg.dlogits);
  return lg.loss;
}

template <typename Scalar>
class Trainer {
 public:
  Trainer(ArstModel<Scalar>& model, TrainConfig cfg)
      : model_(model), cfg_(std::move(cfg)), params_(model.parameters()), adam_(params_), rng_(cfg_.seed) {
    cfg_.validate();
  }

  // One pass over the dataset in seeded-shuffled order, one optimizer step per
  // video. Returns the mean per-video loss.
  double train_epoch(std::span<const Video> videos) {
    for (const auto& v : videos) {
      if (v.frames() < 2) throw std::invalid_argument("train_epoch: video '" + v.id + "' has fewer than 2 frames");
    }
    std::vector<std::size_t> order(videos.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng_.shuffle(order.begin(), order.end());
    double total = 0.0;
    for (std::size_t idx : order) {
      const Video& v = videos[idx];
      model_.zero_grad();
      const Matrix<Scalar> feats = matrix_cast<Scalar>(v.features);
      const double loss = video_loss_and_grad(model_, feats, v.labels);
      if (!std::isfinite(loss)) throw TrainingNumericError(v.id, adam_.step + 1, loss);
      if (cfg_.grad_clip) {
        const double norm = global_grad_norm<Scalar>(params_);
        if (norm > *cfg_.grad_clip) {
          const auto s = static_cast<Scalar>(*cfg_.grad_clip / norm);
          for (auto* p : params_) {
            for (auto& g : p->grad.data()) g *= s;
          }
        }
      }
      adam_step<Scalar>(params_, adam_, cfg_.learning_rate,
                        AdamHyper{cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps});
      total += loss;
    }
    ++epoch_;
    return videos.empty() ? 0.0 : total / static_cast<double>(videos.size());
  }

  // Runs cfg.epochs epochs; on_epoch receives (epoch index, mean loss).
  std::vector<double> fit(std::span<const Video> videos,
                          const std::function<void(std::size_t, double)>& on_epoch = {}) {
    std::vector<double> losses;
    for (std::size_t e = 0; e < cfg_.epochs; ++e) {
      losses.push_back(train_epoch(videos));
      if (on_epoch) on_epoch(e, losses.back());
    }
    return losses;
  }

  const AdamState<Scalar>& adam() const { return adam_; }
  std::size_t epochs_done() const { return epoch_; }

 private:
  ArstModel<Scalar>& model_;
  TrainConfig cfg_;
  std::vector<Parameter<Scalar>*> params_;
  AdamState<Scalar> adam_;
  SeededRng rng_;
  std::size_t epoch_ = 0;
};

}  // namespace arst
