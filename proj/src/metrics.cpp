#include "arst/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "arst/errors.hpp"

namespace arst {

std::size_t count_transitions(std::span<const int> labels) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < labels.size(); ++i) n += labels[i] != labels[i - 1];
  return n;
}

std::vector<Segment> segments(std::span<const int> labels) {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (out.empty() || out.back().phase != labels[i]) {
      out.push_back({labels[i], i, 1});
    } else {
      ++out.back().length;
    }
  }
  return out;
}

VideoEval eval_video(std::span<const int> pred, std::span<const int> gt, std::string id) {
  if (pred.size() != gt.size()) {
    throw LengthMismatchError("eval_video: prediction has " + std::to_string(pred.size()) +
                              " frames, ground truth has " + std::to_string(gt.size()));
  }
  if (gt.empty()) throw LengthMismatchError("eval_video: empty sequences");

  VideoEval ev;
  ev.id = std::move(id);
  ev.frames = gt.size();
  std::map<int, PhaseScores> scores;
  std::size_t correct = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    auto& g = scores[gt[t]];
    g.phase = gt[t];
    g.in_ground_truth = true;
    auto& p = scores[pred[t]];
    p.phase = pred[t];
    if (pred[t] == gt[t]) {
      ++correct;
      ++scores[gt[t]].tp;
    } else {
      ++scores[pred[t]].fp;
      ++scores[gt[t]].fn;
    }
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(gt.size());

  std::size_t present = 0;
  for (auto& [phase, s] : scores) {
    const std::size_t predicted = s.tp + s.fp;
    const std::size_t actual = s.tp + s.fn;
    const std::size_t uni = s.tp + s.fp + s.fn;
    s.precision = predicted ? static_cast<double>(s.tp) / static_cast<double>(predicted) : 0.0;
    s.recall = actual ? static_cast<double>(s.tp) / static_cast<double>(actual) : 0.0;
    s.jaccard = uni ? static_cast<double>(s.tp) / static_cast<double>(uni) : 0.0;
    if (s.in_ground_truth) {
      ++present;
      ev.precision += s.precision;
      ev.recall += s.recall;
      ev.jaccard += s.jaccard;
    }
    ev.per_phase.push_back(s);
  }
  ev.precision /= static_cast<double>(present);
  ev.recall /= static_cast<double>(present);
  ev.jaccard /= static_cast<double>(present);
  ev.pred_transitions = count_transitions(pred);
  ev.gt_transitions = count_transitions(gt);
  return ev;
}

namespace {

template <typename Get>
MeanStd mean_std(const std::vector<VideoEval>& evals, Get get) {
  MeanStd r;
  const double n = static_cast<double>(evals.size());
  for (const auto& e : evals) r.mean += get(e);
  r.mean /= n;
  double ss = 0.0;
  for (const auto& e : evals) {
    const double d = get(e) - r.mean;
    ss += d * d;
  }
  r.std = std::sqrt(ss / n);
  return r;
}

}  // namespace

EvalReport aggregate(std::vector<VideoEval> evals) {
  if (evals.empty()) throw std::invalid_argument("aggregate: no videos to aggregate");
  EvalReport r;
  r.accuracy = mean_std(evals, [](const VideoEval& e) { return e.accuracy; });
  r.precision = mean_std(evals, [](const VideoEval& e) { return e.precision; });
  r.recall = mean_std(evals, [](const VideoEval& e) { return e.recall; });
  r.jaccard = mean_std(evals, [](const VideoEval& e) { return e.jaccard; });
  r.pred_transitions =
      mean_std(evals, [](const VideoEval& e) { return static_cast<double>(e.pred_transitions); });
  r.gt_transitions =
      mean_std(evals, [](const VideoEval& e) { return static_cast<double>(e.gt_transitions); });
  r.excess_transitions =
      mean_std(evals, [](const VideoEval& e) { return static_cast<double>(e.excess_transitions()); });
  r.videos = std::move(evals);
  return r;
}

namespace {

// Qualitative palette; phases beyond its length cycle.
constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

void append_row(std::ostringstream& os, std::span<const int> labels, int y, int height) {
  for (const auto& s : segments(labels)) {
    const std::size_t color = static_cast<std::size_t>(std::max(0, s.phase - 1)) % std::size(kPalette);
    os << "  <rect x=\"" << s.begin << "\" y=\"" << y << "\" width=\"" << s.length
       << "\" height=\"" << height << "\" fill=\"" << kPalette[color] << "\" data-phase=\"" << s.phase
       << "\"/>\n";
  }
}

}  // namespace

std::string render_ribbon_svg(std::span<const int> pred, std::span<const int> gt) {
  if (pred.size() != gt.size()) {
    throw LengthMismatchError("export_ribbon: prediction has " + std::to_string(pred.size()) +
                              " frames, ground truth has " + std::to_string(gt.size()));
  }
  constexpr int kRow = 20;
  constexpr int kGap = 4;
  const std::size_t width = std::max<std::size_t>(gt.size(), 1);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << 2 * kRow + kGap << "\" viewBox=\"0 0 " << width << " " << 2 * kRow + kGap
     << "\" preserveAspectRatio=\"none\">\n";
  os << " <g id=\"ground_truth\">\n";
  append_row(os, gt, 0, kRow);
  os << " </g>\n <g id=\"prediction\">\n";
  append_row(os, pred, kRow + kGap, kRow);
  os << " </g>\n</svg>\n";
  return os.str();
}

void export_ribbon(std::span<const int> pred, std::span<const int> gt, const std::filesystem::path& path) {
  const std::string svg = render_ribbon_svg(pred, gt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("export_ribbon: cannot open '" + path.string() + "' for writing");
  out << svg;
  if (!out) throw IoError("export_ribbon: write failed for '" + path.string() + "'");
}

}  // namespace arst
