#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace arst {

struct PhaseScores {
  int phase = 0;
  bool in_ground_truth = false;
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double jaccard = 0.0;
};

struct VideoEval {
  std::string id;
  std::size_t frames = 0;
  double accuracy = 0.0;
  // Averages over phases present in the ground truth.
  double precision = 0.0;
  double recall = 0.0;
  double jaccard = 0.0;
  std::vector<PhaseScores> per_phase;  // every phase seen in pred or gt, ascending
  std::size_t pred_transitions = 0;
  std::size_t gt_transitions = 0;

  // Predicted transitions beyond the ground-truth count, floored at 0.
  std::size_t excess_transitions() const {
    return pred_transitions > gt_transitions ? pred_transitions - gt_transitions : 0;
  }
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct EvalReport {
  std::vector<VideoEval> videos;
  MeanStd accuracy, precision, recall, jaccard;
  MeanStd pred_transitions, gt_transitions, excess_transitions;
};

// Precision of a phase that is never predicted is 0.
VideoEval eval_video(std::span<const int> pred, std::span<const int> gt, std::string id = {});

// Unweighted mean and population standard deviation across videos.
EvalReport aggregate(std::vector<VideoEval> evals);

std::size_t count_transitions(std::span<const int> labels);

// Contiguous runs as (phase, begin, length).
struct Segment {
  int phase;
  std::size_t begin;
  std::size_t length;
};
std::vector<Segment> segments(std::span<const int> labels);

// Two-row SVG ribbon: ground truth on top, prediction below, one rect per segment.
std::string render_ribbon_svg(std::span<const int> pred, std::span<const int> gt);
void export_ribbon(std::span<const int> pred, std::span<const int> gt, const std::filesystem::path& path);

}  // namespace arst
