#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "arst/model.hpp"
#include "arst/numerics.hpp"

namespace arst {

// A single-stream auto-regressive predictor. Each call to step() consumes the
// frame at position() together with the decoder token fed at that position
// (the committed label of the previous frame, or BOS) and returns p_t.
class StepPredictor {
 public:
  virtual ~StepPredictor() = default;
  virtual std::vector<double> step(std::span<const float> feature, PhaseToken fed) = 0;
  // Independent copy of the full stream state, used for speculative lookahead.
  virtual std::unique_ptr<StepPredictor> clone() const = 0;
  virtual std::size_t position() const = 0;
  virtual std::size_t n_classes() const = 0;
};

// Fixed-capacity ring of row vectors indexed by absolute stream position.
template <typename Scalar>
class RowRing {
 public:
  RowRing() = default;
  RowRing(std::size_t capacity, std::size_t dim) : capacity_(capacity), rows_(capacity, dim) {}

  Scalar* at(std::size_t position) { return rows_.row(position % capacity_).data(); }
  const Scalar* at(std::size_t position) const { return rows_.row(position % capacity_).data(); }

 private:
  std::size_t capacity_ = 1;
  Matrix<Scalar> rows_;
};

// Incremental ARST decoder. Keeps the last W+1 key/value rows of every
// attention layer, so each step costs O(W d + d^2) regardless of position.
template <typename Scalar>
class ArstStreamDecoder final : public StepPredictor {
 public:
  explicit ArstStreamDecoder(const ArstModel<Scalar>& model)
      : model_(&model),
        window_(model.cfg.width + 1),
        enc_k_(window_, model.cfg.d_model),
        enc_v_(window_, model.cfg.d_model),
        cross_k_(window_, model.cfg.d_model),
        cross_v_(window_, model.cfg.d_model),
        dec_k_(window_, model.cfg.d_model),
        dec_v_(window_, model.cfg.d_model) {}

  std::vector<double> step(std::span<const float> feature, PhaseToken fed) override {
    const ModelConfig& cfg = model_->cfg;
    if (feature.size() != cfg.d_feat) {
      throw DimensionError("ArstStreamDecoder::step: feature dim " + std::to_string(feature.size()) +
                           " != d_feat " + std::to_string(cfg.d_feat));
    }
    if (pos_ == 0 && !fed.is_bos()) throw InvariantError("ArstStreamDecoder: position 0 must be fed BOS");
    if (pos_ > 0 && (fed.value < 1 || fed.value > static_cast<int>(cfg.n_classes))) {
      throw std::domain_error("ArstStreamDecoder: fed token " + std::to_string(fed.value) +
                              " is not a phase id");
    }
    const std::size_t d = cfg.d_model;
    const std::size_t t = pos_;
    const std::size_t first = t > cfg.width ? t - cfg.width : 0;
    const auto& enc = model_->enc;
    const auto& dec = model_->dec;

    std::vector<Scalar> f(feature.begin(), feature.end());
    std::vector<Scalar> x0 = model_->encoder_input_row(f, t);
    std::vector<Scalar> q(d), heads(d), a(d), h1(d), g(d), e(d);

    enc.self_attn.q.forward_row(x0, q);
    enc.self_attn.k.forward_row(x0, {enc_k_.at(t), d});
    enc.self_attn.v.forward_row(x0, {enc_v_.at(t), d});
    attend(q, first, t, enc_k_, enc_v_, heads);
    enc.self_attn.o.forward_row(heads, a);
    for (std::size_t j = 0; j < d; ++j) a[j] += x0[j];
    enc.ln1.forward_row(a, h1);
    enc.ffn.forward_row(h1, g);
    for (std::size_t j = 0; j < d; ++j) g[j] += h1[j];
    enc.ln2.forward_row(g, e);
    dec.cross_attn.k.forward_row(e, {cross_k_.at(t), d});
    dec.cross_attn.v.forward_row(e, {cross_v_.at(t), d});

    std::vector<Scalar> y0 = model_->decoder_input_row(fed, t);
    std::vector<Scalar> b(d), z1(d), z2(d), z3(d);
    dec.self_attn.q.forward_row(y0, q);
    dec.self_attn.k.forward_row(y0, {dec_k_.at(t), d});
    dec.self_attn.v.forward_row(y0, {dec_v_.at(t), d});
    attend(q, first, t, dec_k_, dec_v_, heads);
    dec.self_attn.o.forward_row(heads, b);
    for (std::size_t j = 0; j < d; ++j) b[j] += y0[j];
    dec.ln1.forward_row(b, z1);
    dec.cross_attn.q.forward_row(z1, q);
    attend(q, first, t, cross_k_, cross_v_, heads);
    dec.cross_attn.o.forward_row(heads, b);
    for (std::size_t j = 0; j < d; ++j) b[j] += z1[j];
    dec.ln2.forward_row(b, z2);
    dec.ffn.forward_row(z2, g);
    for (std::size_t j = 0; j < d; ++j) g[j] += z2[j];
    dec.ln3.forward_row(g, z3);

    logits_.assign(cfg.n_classes, Scalar(0));
    model_->head.forward_row(z3, logits_);
    ++pos_;

    std::vector<double> lg(logits_.begin(), logits_.end());
    return softmax<double>(lg);
  }

  std::unique_ptr<StepPredictor> clone() const override {
    return std::make_unique<ArstStreamDecoder>(*this);
  }

  std::size_t position() const override { return pos_; }
  std::size_t n_classes() const override { return model_->cfg.n_classes; }

  // Logits produced by the most recent step.
  const std::vector<Scalar>& last_logits() const { return logits_; }

 private:
  void attend(std::span<const Scalar> q, std::size_t first, std::size_t last,
              const RowRing<Scalar>& keys, const RowRing<Scalar>& values,
              std::span<Scalar> out) const {
    attend_row<Scalar>(
        q.data(), first, last, [&](std::size_t j) { return keys.at(j); },
        [&](std::size_t j) { return values.at(j); }, model_->cfg.n_heads, model_->cfg.d_model,
        out.data(), nullptr);
  }

  const ArstModel<Scalar>* model_;
  std::size_t window_;
  RowRing<Scalar> enc_k_, enc_v_, cross_k_, cross_v_, dec_k_, dec_v_;
  std::vector<Scalar> logits_;
  std::size_t pos_ = 0;
};

// Ignores features and fed tokens; emits a fixed label stream. Used to check
// the consistency-constraint logic in isolation.
class LabelStreamStub final : public StepPredictor {
 public:
  LabelStreamStub(std::vector<int> labels, std::size_t n_classes)
      : labels_(std::move(labels)), n_classes_(n_classes) {}

  std::vector<double> step(std::span<const float> feature, PhaseToken fed) override;
  std::unique_ptr<StepPredictor> clone() const override {
    return std::make_unique<LabelStreamStub>(*this);
  }
  std::size_t position() const override { return pos_; }
  std::size_t n_classes() const override { return n_classes_; }

 private:
  std::vector<int> labels_;
  std::size_t n_classes_;
  std::size_t pos_ = 0;
};

struct CciConfig {
  bool enabled = false;
  std::size_t n = 10;

  void validate() const {
    if (n < 1) throw ConfigError("cci.n must be >= 1");
  }
};

struct TransitionDecision {
  std::size_t frame = 0;        // 0-based frame where greedy proposed a transition
  int from = 0;
  int to = 0;
  std::size_t lookahead = 0;    // frames examined before the decision
  bool accepted = false;
};

struct StreamResult {
  std::vector<int> committed;                 // P_t after the consistency check
  std::vector<int> greedy;                    // argmax of p_t
  std::vector<std::vector<double>> probs;     // p_t
  std::vector<double> latency_ms;             // wall clock per frame, lookahead included
  std::vector<TransitionDecision> decisions;  // one per proposed transition

  std::size_t frames() const { return committed.size(); }
};

// Reads frame t of the stream. The optional observer sees (frame being
// decided, frame read) for every access.
class FrameReader {
 public:
  using Observer = std::function<void(std::size_t deciding, std::size_t read)>;

  explicit FrameReader(const Matrix<float>& features, Observer observer = {})
      : features_(features), observer_(std::move(observer)) {}

  std::size_t frames() const { return features_.rows(); }
  std::size_t dim() const { return features_.cols(); }

  std::span<const float> read(std::size_t deciding, std::size_t t) const {
    if (observer_) observer_(deciding, t);
    return features_.row(t);
  }

 private:
  const Matrix<float>& features_;
  Observer observer_;
};

// Frame-by-frame decoding with optional consistency-constraint inference.
// When greedy proposes P_t != P_{t-1}, up to n lookahead frames are decoded on
// a cloned state while feeding P_{t-1}; the transition is committed only if
// every lookahead argmax equals P_t. Near the stream end the window is
// truncated to the frames that exist.
StreamResult run_stream(StepPredictor& predictor, const FrameReader& frames, const CciConfig& cci);

template <typename Scalar>
StreamResult run_stream(const ArstModel<Scalar>& model, const Matrix<float>& features,
                        const CciConfig& cci) {
  if (features.cols() != model.cfg.d_feat) {
    throw DimensionError("run_stream: feature dim " + std::to_string(features.cols()) +
                         " != d_feat " + std::to_string(model.cfg.d_feat));
  }
  ArstStreamDecoder<Scalar> decoder(model);
  return run_stream(decoder, FrameReader(features), cci);
}

struct LatencyReport {
  std::size_t frames = 0;
  std::size_t width = 0;
  bool cci = false;
  std::size_t cci_n = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p99_ms = 0.0;
  double fps = 0.0;
  std::vector<double> samples_ms;

  // Mean latency over frames [begin, end).
  double window_mean(std::size_t begin, std::size_t end) const;
};

LatencyReport summarize_latency(std::span<const double> samples_ms);

// Streams T synthetic Gaussian frames through the model and times each frame.
LatencyReport bench_latency(const ArstModel<float>& model, const CciConfig& cci, std::size_t frames,
                            std::uint64_t seed);

}  // namespace arst
