#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arst/numerics.hpp"
#include "arst/video.hpp"

namespace arst {

enum class HardFrameMode { PureNoise, WrongPhaseCentroid };

std::string to_string(HardFrameMode mode);
HardFrameMode hard_frame_mode_from_string(const std::string& s);

// Markov phase process with explicit dwell times and Gaussian emissions.
// The transition matrix has a zero diagonal: staying in a phase is governed
// by the dwell distribution min_dwell + Geometric(mean_dwell - min_dwell).
struct WorkflowSpec {
  std::size_t n_classes = 7;
  Matrix<double> transitions;  // n_classes x n_classes, row-stochastic
  std::vector<std::size_t> min_dwell;
  std::vector<double> mean_dwell;
  std::size_t d_feat = 32;
  double centroid_scale = 1.0;
  double noise_sigma = 1.0;
  double hard_frame_rate = 0.0;
  HardFrameMode hard_frame_mode = HardFrameMode::WrongPhaseCentroid;

  // Throws ConfigError naming the violated invariant.
  void validate() const;
};

// Near-linear P1 -> ... -> Pc flow. The three phases before the last one carry
// 10% mass for swapping the order of P(c-2) and P(c-1); the last phase wraps
// to P1 so the chain is recurrent.
Matrix<double> default_transitions(std::size_t n_classes);

WorkflowSpec default_workflow(std::size_t n_classes = 7, std::size_t d_feat = 32);

// One centroid row per phase, drawn once per dataset.
Matrix<double> draw_centroids(const WorkflowSpec& spec, SeededRng& rng);

struct GeneratedVideo {
  Video video;
  std::vector<bool> hard;  // frames whose features were corrupted
};

// Phase path starts at P1 and runs whole segments until at least T_target
// frames exist, so the last segment is never truncated below min_dwell.
GeneratedVideo gen_video(const WorkflowSpec& spec, const Matrix<double>& centroids, SeededRng& rng,
                         std::size_t target_frames);

enum class Split { Train, Val, Test };
std::string to_string(Split split);

struct DatasetEntry {
  Video video;
  Split split = Split::Train;
  std::uint64_t seed = 0;
  std::size_t hard_frames = 0;
};

struct SyntheticDataset {
  WorkflowSpec spec;
  Matrix<double> centroids;
  std::uint64_t seed = 0;
  std::vector<DatasetEntry> entries;

  std::vector<Video> split(Split s) const;
};

struct DatasetCounts {
  std::size_t n_train = 20;
  std::size_t n_val = 0;
  std::size_t n_test = 10;
  std::size_t t_min = 180;
  std::size_t t_max = 220;
};

// Centroids come from sub-stream 0 of the master seed and video i from
// sub-stream i + 1, so datasets that differ only in hard_frame_rate share
// centroids, phase paths and clean-frame noise.
SyntheticDataset gen_dataset(const WorkflowSpec& spec, std::uint64_t seed, const DatasetCounts& counts);

// Fraction of time spent in each phase under the stationary jump chain,
// weighted by mean dwell. Computed by power iteration.
std::vector<double> stationary_occupancy(const WorkflowSpec& spec);

}  // namespace arst
