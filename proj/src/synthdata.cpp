#include "arst/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "arst/model.hpp"

namespace arst {

std::string to_string(HardFrameMode mode) {
  return mode == HardFrameMode::PureNoise ? "pure_noise" : "wrong_phase_centroid";
}

HardFrameMode hard_frame_mode_from_string(const std::string& s) {
  if (s == "pure_noise") return HardFrameMode::PureNoise;
  if (s == "wrong_phase_centroid") return HardFrameMode::WrongPhaseCentroid;
  throw ConfigError("workflow.hard_frame_mode: unknown mode '" + s + "'");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

void WorkflowSpec::validate() const {
  const std::size_t c = n_classes;
  if (c < 2) throw ConfigError("workflow.n_classes must be >= 2");
  if (transitions.rows() != c || transitions.cols() != c) {
    throw ConfigError("workflow.transitions must be " + std::to_string(c) + "x" + std::to_string(c));
  }
  for (std::size_t i = 0; i < c; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = transitions(i, j);
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw ConfigError("workflow.transitions: entry (" + std::to_string(i + 1) + "," +
                          std::to_string(j + 1) + ") must be a finite probability");
      }
      sum += p;
    }
    if (transitions(i, i) != 0.0) {
      throw ConfigError("workflow.transitions: self-transition of phase " + std::to_string(i + 1) +
                        " must be 0 (dwell sampling handles staying)");
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("workflow.transitions: row " + std::to_string(i + 1) + " sums to " +
                        std::to_string(sum) + ", expected 1");
    }
  }
  if (min_dwell.size() != c) throw ConfigError("workflow.min_dwell needs one entry per phase");
  if (mean_dwell.size() != c) throw ConfigError("workflow.mean_dwell needs one entry per phase");
  for (std::size_t i = 0; i < c; ++i) {
    if (min_dwell[i] < 1) throw ConfigError("workflow.min_dwell must be >= 1");
    if (!(mean_dwell[i] >= static_cast<double>(min_dwell[i])) || !std::isfinite(mean_dwell[i])) {
      throw ConfigError("workflow.mean_dwell of phase " + std::to_string(i + 1) +
                        " must be >= its min_dwell");
    }
  }
  if (d_feat < 1) throw ConfigError("workflow.d_feat must be >= 1");
  if (!(centroid_scale > 0.0)) throw ConfigError("workflow.centroid_scale must be > 0");
  if (!(noise_sigma >= 0.0)) throw ConfigError("workflow.noise_sigma must be >= 0");
  if (!(hard_frame_rate >= 0.0 && hard_frame_rate < 1.0)) {
    throw ConfigError("workflow.hard_frame_rate must be in [0, 1)");
  }
}

Matrix<double> default_transitions(std::size_t c) {
  Matrix<double> m(c, c);
  for (std::size_t i = 0; i < c; ++i) m(i, (i + 1) % c) = 1.0;
  if (c >= 4) {
    // 0-based: a = P(c-3), b = P(c-2), e = P(c-1), last = P(c)
    const std::size_t a = c - 4, b = c - 3, e = c - 2, last = c - 1;
    m(a, b) = 0.9;
    m(a, e) = 0.1;
    m(b, e) = 0.9;
    m(b, last) = 0.1;
    m(e, last) = 0.9;
    m(e, b) = 0.1;
  }
  return m;
}

WorkflowSpec default_workflow(std::size_t n_classes, std::size_t d_feat) {
  WorkflowSpec spec;
  spec.n_classes = n_classes;
  spec.transitions = default_transitions(n_classes);
  spec.d_feat = d_feat;
  spec.min_dwell.assign(n_classes, 12);
  // Uneven phase lengths, about 200 frames for one pass of the 7-phase flow.
  static constexpr double kMeans[] = {24, 40, 26, 40, 22, 26, 22};
  spec.mean_dwell.resize(n_classes);
  for (std::size_t i = 0; i < n_classes; ++i) spec.mean_dwell[i] = kMeans[i % 7];
  spec.centroid_scale = 1.0;
  spec.noise_sigma = 1.0;
  return spec;
}

Matrix<double> draw_centroids(const WorkflowSpec& spec, SeededRng& rng) {
  Matrix<double> c(spec.n_classes, spec.d_feat);
  for (auto& v : c.data()) v = spec.centroid_scale * rng.normal();
  return c;
}

namespace {

std::size_t sample_next(const Matrix<double>& transitions, std::size_t from, SeededRng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = from;
  for (std::size_t j = 0; j < transitions.cols(); ++j) {
    const double p = transitions(from, j);
    if (p <= 0.0) continue;
    last_positive = j;
    acc += p;
    if (u < acc) return j;
  }
  return last_positive;
}

}  // namespace

GeneratedVideo gen_video(const WorkflowSpec& spec, const Matrix<double>& centroids, SeededRng& rng,
                         std::size_t target_frames) {
  spec.validate();
  if (centroids.rows() != spec.n_classes || centroids.cols() != spec.d_feat) {
    throw DimensionError("gen_video: centroids " + centroids.shape_string() + " do not match spec");
  }
  const std::size_t min_min = *std::min_element(spec.min_dwell.begin(), spec.min_dwell.end());
  if (target_frames < min_min) {
    throw std::invalid_argument("gen_video: target_frames " + std::to_string(target_frames) +
                                " below min_dwell " + std::to_string(min_min));
  }

  GeneratedVideo out;
  std::vector<int>& labels = out.video.labels;
  std::size_t phase = 0;
  while (labels.size() < target_frames) {
    const double excess = spec.mean_dwell[phase] - static_cast<double>(spec.min_dwell[phase]);
    const std::size_t dwell = spec.min_dwell[phase] + rng.geometric(1.0 / (1.0 + excess));
    labels.insert(labels.end(), dwell, static_cast<int>(phase + 1));
    phase = sample_next(spec.transitions, phase, rng);
  }

  const std::size_t T = labels.size();
  const std::size_t d = spec.d_feat;
  const double hard_sd = std::sqrt(spec.centroid_scale * spec.centroid_scale +
                                   spec.noise_sigma * spec.noise_sigma);
  out.video.features = Matrix<float>(T, d);
  out.hard.assign(T, false);
  std::vector<double> noise(d);
  for (std::size_t t = 0; t < T; ++t) {
    // Fixed number of draws per frame keeps clean and corrupted datasets from
    // the same seed aligned.
    const double u = rng.uniform();
    const std::size_t other = static_cast<std::size_t>(rng.below(spec.n_classes - 1));
    for (auto& z : noise) z = rng.normal();
    const std::size_t truth = static_cast<std::size_t>(labels[t] - 1);
    const bool hard = u < spec.hard_frame_rate;
    out.hard[t] = hard;
    auto row = out.video.features.row(t);
    if (!hard) {
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = static_cast<float>(centroids(truth, j) + spec.noise_sigma * noise[j]);
      }
    } else if (spec.hard_frame_mode == HardFrameMode::WrongPhaseCentroid) {
      const std::size_t wrong = other >= truth ? other + 1 : other;
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = static_cast<float>(centroids(wrong, j) + spec.noise_sigma * noise[j]);
      }
    } else {
      for (std::size_t j = 0; j < d; ++j) row[j] = static_cast<float>(hard_sd * noise[j]);
    }
  }
  return out;
}

std::vector<Video> SyntheticDataset::split(Split s) const {
  std::vector<Video> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(e.video);
  }
  return out;
}

SyntheticDataset gen_dataset(const WorkflowSpec& spec, std::uint64_t seed, const DatasetCounts& counts) {
  spec.validate();
  if (counts.t_max < counts.t_min) throw ConfigError("data.t_max must be >= data.t_min");
  SyntheticDataset ds;
  ds.spec = spec;
  ds.seed = seed;
  SeededRng centroid_rng(derive_seed(seed, 0));
  ds.centroids = draw_centroids(spec, centroid_rng);

  std::uint64_t index = 0;
  auto add = [&](Split split, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i, ++index) {
      DatasetEntry e;
      e.split = split;
      e.seed = derive_seed(seed, index + 1);
      SeededRng rng(e.seed);
      const std::size_t target = counts.t_min + rng.below(counts.t_max - counts.t_min + 1);
      GeneratedVideo g = gen_video(spec, ds.centroids, rng, target);
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%03zu", to_string(split).c_str(), i);
      g.video.id = id;
      e.video = std::move(g.video);
      e.hard_frames = static_cast<std::size_t>(std::count(g.hard.begin(), g.hard.end(), true));
      ds.entries.push_back(std::move(e));
    }
  };
  add(Split::Train, counts.n_train);
  add(Split::Val, counts.n_val);
  add(Split::Test, counts.n_test);
  return ds;
}

std::vector<double> stationary_occupancy(const WorkflowSpec& spec) {
  spec.validate();
  const std::size_t c = spec.n_classes;
  // Lazy chain (I + P) / 2 converges even when P is periodic.
  std::vector<double> pi(c, 1.0 / static_cast<double>(c)), next(c);
  for (int it = 0; it < 100000; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < c; ++i) {
      next[i] += 0.5 * pi[i];
      for (std::size_t j = 0; j < c; ++j) next[j] += 0.5 * pi[i] * spec.transitions(i, j);
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < c; ++i) diff += std::abs(next[i] - pi[i]);
    pi.swap(next);
    if (diff < 1e-15) break;
  }
  std::vector<double> occ(c);
  double total = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    occ[i] = pi[i] * spec.mean_dwell[i];
    total += occ[i];
  }
  for (auto& v : occ) v /= total;
  return occ;
}

}  // namespace arst
