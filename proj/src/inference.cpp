#include "arst/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace arst {

std::vector<double> LabelStreamStub::step(std::span<const float> /*feature*/, PhaseToken /*fed*/) {
  if (pos_ >= labels_.size()) throw InvariantError("LabelStreamStub: stream exhausted");
  const int label = labels_[pos_++];
  if (label < 1 || static_cast<std::size_t>(label) > n_classes_) {
    throw std::domain_error("LabelStreamStub: label " + std::to_string(label) + " out of range");
  }
  std::vector<double> p(n_classes_, 0.0);
  p[static_cast<std::size_t>(label - 1)] = 1.0;
  return p;
}

namespace {

int argmax_phase(const std::vector<double>& p) {
  return static_cast<int>(argmax<double>(p)) + 1;
}

}  // namespace

StreamResult run_stream(StepPredictor& predictor, const FrameReader& frames, const CciConfig& cci) {
  if (cci.enabled) cci.validate();
  const std::size_t T = frames.frames();
  StreamResult out;
  out.committed.reserve(T);
  out.greedy.reserve(T);
  out.probs.reserve(T);
  out.latency_ms.reserve(T);

  using clock = std::chrono::steady_clock;
  for (std::size_t t = 0; t < T; ++t) {
    const auto start = clock::now();
    const PhaseToken fed = t == 0 ? PhaseToken::bos() : PhaseToken::phase(out.committed.back());
    std::vector<double> p = predictor.step(frames.read(t, t), fed);
    const int proposed = argmax_phase(p);
    int committed = proposed;

    if (cci.enabled && t > 0 && proposed != out.committed.back()) {
      const int previous = out.committed.back();
      const std::size_t horizon = std::min(cci.n, T - 1 - t);
      TransitionDecision decision{t, previous, proposed, 0, true};
      auto lookahead = predictor.clone();
      for (std::size_t j = 1; j <= horizon; ++j) {
        const auto pj = lookahead->step(frames.read(t, t + j), PhaseToken::phase(previous));
        decision.lookahead = j;
        if (argmax_phase(pj) != proposed) {
          decision.accepted = false;
          break;
        }
      }
      if (!decision.accepted) committed = previous;
      out.decisions.push_back(decision);
    }

    out.committed.push_back(committed);
    out.greedy.push_back(proposed);
    out.probs.push_back(std::move(p));
    out.latency_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - start).count());
  }
  return out;
}

double LatencyReport::window_mean(std::size_t begin, std::size_t end) const {
  end = std::min(end, samples_ms.size());
  if (begin >= end) return 0.0;
  const double s = std::accumulate(samples_ms.begin() + static_cast<std::ptrdiff_t>(begin),
                                   samples_ms.begin() + static_cast<std::ptrdiff_t>(end), 0.0);
  return s / static_cast<double>(end - begin);
}

LatencyReport summarize_latency(std::span<const double> samples_ms) {
  LatencyReport r;
  r.frames = samples_ms.size();
  r.samples_ms.assign(samples_ms.begin(), samples_ms.end());
  if (samples_ms.empty()) return r;
  std::vector<double> sorted = r.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  r.mean_ms = total / static_cast<double>(sorted.size());
  const std::size_t n = sorted.size();
  r.median_ms = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
  r.p99_ms = sorted[std::min(n - 1, rank == 0 ? 0 : rank - 1)];
  r.fps = r.mean_ms > 0.0 ? 1000.0 / r.mean_ms : 0.0;
  return r;
}

LatencyReport bench_latency(const ArstModel<float>& model, const CciConfig& cci, std::size_t frames,
                            std::uint64_t seed) {
  if (frames < 100) throw std::invalid_argument("bench_latency: need at least 100 frames");
  SeededRng rng(seed);
  Matrix<float> features(frames, model.cfg.d_feat);
  for (auto& v : features.data()) v = static_cast<float>(rng.normal());
  const StreamResult res = run_stream(model, features, cci);
  LatencyReport r = summarize_latency(res.latency_ms);
  r.width = model.cfg.width;
  r.cci = cci.enabled;
  r.cci_n = cci.n;
  return r;
}

}  // namespace arst
