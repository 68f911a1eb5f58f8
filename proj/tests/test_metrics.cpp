#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "arst/errors.hpp"
#include "arst/metrics.hpp"
#include "arst/numerics.hpp"

using namespace arst;

namespace {

struct Reference {
  double accuracy, precision, recall, jaccard;
};

// Confusion matrix over phases 1..c, then the index-set definitions.
Reference brute_force(const std::vector<int>& pred, const std::vector<int>& gt, int c) {
  std::vector<std::vector<double>> cm(static_cast<std::size_t>(c + 1), std::vector<double>(static_cast<std::size_t>(c + 1), 0));
  for (std::size_t t = 0; t < gt.size(); ++t) cm[static_cast<std::size_t>(gt[t])][static_cast<std::size_t>(pred[t])] += 1;
  double correct = 0;
  for (int k = 1; k <= c; ++k) correct += cm[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
  Reference r{correct / static_cast<double>(gt.size()), 0, 0, 0};
  int present = 0;
  for (int k = 1; k <= c; ++k) {
    std::set<std::size_t> P, G, I, U;
    for (std::size_t t = 0; t < gt.size(); ++t) {
      if (pred[t] == k) P.insert(t);
      if (gt[t] == k) G.insert(t);
    }
    if (G.empty()) continue;
    ++present;
    std::set_intersection(P.begin(), P.end(), G.begin(), G.end(), std::inserter(I, I.begin()));
    std::set_union(P.begin(), P.end(), G.begin(), G.end(), std::inserter(U, U.begin()));
    double col = 0;
    for (int g = 1; g <= c; ++g) col += cm[static_cast<std::size_t>(g)][static_cast<std::size_t>(k)];
    const double tp = cm[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
    r.precision += col > 0 ? tp / col : 0.0;
    r.recall += static_cast<double>(I.size()) / static_cast<double>(G.size());
    r.jaccard += static_cast<double>(I.size()) / static_cast<double>(U.size());
  }
  r.precision /= present;
  r.recall /= present;
  r.jaccard /= present;
  return r;
}

std::size_t count_substr(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("eval_video worked example") {
  const std::vector<int> gt{1, 1, 2, 2}, pred{1, 2, 2, 2};
  const auto e = eval_video(pred, gt, "v");
  CHECK(e.accuracy == 0.75);
  REQUIRE(e.per_phase.size() == 2);
  CHECK(e.per_phase[0].precision == 1.0);
  CHECK(e.per_phase[0].recall == 0.5);
  CHECK(e.per_phase[0].jaccard == 0.5);
  CHECK(e.per_phase[1].precision == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(e.per_phase[1].recall == 1.0);
  CHECK(e.per_phase[1].jaccard == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(e.precision == doctest::Approx(5.0 / 6).epsilon(1e-15));
  CHECK(e.recall == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(e.jaccard == doctest::Approx(7.0 / 12).epsilon(1e-15));
  CHECK(e.pred_transitions == 1);
  CHECK(e.gt_transitions == 1);
  CHECK(e.id == "v");
}

TEST_CASE("eval_video edge cases") {
  const std::vector<int> gt{3, 3, 1, 1, 1, 2};
  const auto perfect = eval_video(gt, gt);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.jaccard == 1.0);
  CHECK(perfect.pred_transitions == perfect.gt_transitions);

  const std::vector<int> g2{1, 1, 2, 2}, constant{1, 1, 1, 1};
  const auto deg = eval_video(constant, g2);
  CHECK(deg.recall == 0.5);
  // Phase 2 is never predicted: precision 0 by convention.
  CHECK(deg.per_phase[1].precision == 0.0);
  CHECK(deg.precision == doctest::Approx(0.25));

  // A predicted phase absent from gt is scored but not averaged.
  const std::vector<int> g3{1, 1, 1, 1}, p3{1, 5, 1, 1};
  const auto ex = eval_video(p3, g3);
  CHECK(ex.per_phase.size() == 2);
  CHECK_FALSE(ex.per_phase[1].in_ground_truth);
  CHECK(ex.per_phase[1].fp == 1);
  CHECK(ex.recall == 0.75);
  CHECK(ex.precision == 1.0);
  CHECK(ex.excess_transitions() == 2);

  CHECK_THROWS_AS(eval_video(std::vector<int>{1, 2}, std::vector<int>{1}), LengthMismatchError);
  CHECK_THROWS_AS(eval_video(std::vector<int>{}, std::vector<int>{}), LengthMismatchError);
}

TEST_CASE("eval_video matches a brute-force confusion matrix") {
  SeededRng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 2 + static_cast<int>(rng.below(6));
    const std::size_t T = 1 + rng.below(60);
    std::vector<int> gt(T), pred(T);
    for (std::size_t t = 0; t < T; ++t) {
      gt[t] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
      pred[t] = rng.uniform() < 0.6 ? gt[t] : 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    }
    const auto e = eval_video(pred, gt);
    const auto r = brute_force(pred, gt, c);
    CHECK(std::abs(e.accuracy - r.accuracy) <= 1e-12);
    CHECK(std::abs(e.precision - r.precision) <= 1e-12);
    CHECK(std::abs(e.recall - r.recall) <= 1e-12);
    CHECK(std::abs(e.jaccard - r.jaccard) <= 1e-12);
    for (const auto& s : e.per_phase) {
      CHECK(s.jaccard <= std::min(s.precision, s.recall) + 1e-15);
      CHECK(s.jaccard == doctest::Approx(static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp + s.fn)));
      for (double v : {s.precision, s.recall, s.jaccard}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
}

TEST_CASE("consistent relabeling leaves averaged metrics unchanged") {
  SeededRng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 5 + rng.below(50);
    std::vector<int> gt(T), pred(T);
    for (std::size_t t = 0; t < T; ++t) {
      gt[t] = 1 + static_cast<int>(rng.below(7));
      pred[t] = 1 + static_cast<int>(rng.below(7));
    }
    std::vector<int> perm{1, 2, 3, 4, 5, 6, 7};
    rng.shuffle(perm.begin(), perm.end());
    std::vector<int> gt2(T), pred2(T);
    for (std::size_t t = 0; t < T; ++t) {
      gt2[t] = perm[static_cast<std::size_t>(gt[t] - 1)];
      pred2[t] = perm[static_cast<std::size_t>(pred[t] - 1)];
    }
    const auto a = eval_video(pred, gt);
    const auto b = eval_video(pred2, gt2);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.precision == doctest::Approx(b.precision).epsilon(1e-14));
    CHECK(a.recall == doctest::Approx(b.recall).epsilon(1e-14));
    CHECK(a.jaccard == doctest::Approx(b.jaccard).epsilon(1e-14));
  }
}

TEST_CASE("aggregate uses the population standard deviation") {
  VideoEval a, b;
  a.accuracy = 0.8;
  b.accuracy = 1.0;
  const auto r = aggregate({a, b});
  CHECK(r.accuracy.mean == doctest::Approx(0.9));
  CHECK(r.accuracy.std == doctest::Approx(0.1));
  CHECK(r.videos.size() == 2);

  VideoEval single;
  single.jaccard = 0.42;
  const auto s = aggregate({single});
  CHECK(s.jaccard.mean == 0.42);
  CHECK(s.jaccard.std == 0.0);
  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);

  SeededRng rng(7);
  std::vector<VideoEval> evals(40);
  for (auto& e : evals) {
    e.accuracy = rng.uniform();
    e.recall = rng.uniform();
    e.pred_transitions = rng.below(20);
    e.gt_transitions = rng.below(20);
  }
  const auto agg = aggregate(evals);
  auto oracle = [&](auto get) {
    long double m = 0;
    for (const auto& e : evals) m += get(e);
    m /= 40;
    long double v = 0;
    for (const auto& e : evals) v += (get(e) - m) * (get(e) - m);
    return std::pair<double, double>(static_cast<double>(m), static_cast<double>(std::sqrt(v / 40)));
  };
  const auto acc = oracle([](const VideoEval& e) { return static_cast<long double>(e.accuracy); });
  CHECK(std::abs(agg.accuracy.mean - acc.first) <= 1e-12);
  CHECK(std::abs(agg.accuracy.std - acc.second) <= 1e-12);
  const auto rec = oracle([](const VideoEval& e) { return static_cast<long double>(e.recall); });
  CHECK(std::abs(agg.recall.mean - rec.first) <= 1e-12);
  CHECK(std::abs(agg.recall.std - rec.second) <= 1e-12);
  const auto exc = oracle([](const VideoEval& e) { return static_cast<long double>(e.excess_transitions()); });
  CHECK(std::abs(agg.excess_transitions.mean - exc.first) <= 1e-12);
}

TEST_CASE("ribbon has one rect per segment per row") {
  const std::vector<int> constant(10, 4);
  CHECK(count_substr(render_ribbon_svg(constant, constant), "<rect") == 2);

  const std::vector<int> gt{1, 1, 2, 2, 3, 3, 3}, pred{1, 2, 1, 2, 2, 3, 3};
  const auto svg = render_ribbon_svg(pred, gt);
  const auto split = svg.find("id=\"prediction\"");
  REQUIRE(split != std::string::npos);
  CHECK(count_substr(svg.substr(0, split), "<rect") == segments(gt).size());
  CHECK(count_substr(svg.substr(split), "<rect") == segments(pred).size());
  CHECK(segments(pred).size() == 5);

  const auto dir = std::filesystem::temp_directory_path() / "arst_test_metrics";
  std::filesystem::create_directories(dir);
  export_ribbon(pred, gt, dir / "a.svg");
  export_ribbon(pred, gt, dir / "b.svg");
  CHECK(read_file(dir / "a.svg") == read_file(dir / "b.svg"));
  CHECK(read_file(dir / "a.svg") == svg);
  CHECK_THROWS_AS(export_ribbon(pred, gt, dir / "missing" / "c.svg"), IoError);
  CHECK_THROWS_AS(render_ribbon_svg(pred, constant), LengthMismatchError);
  std::filesystem::remove_all(dir);
}
