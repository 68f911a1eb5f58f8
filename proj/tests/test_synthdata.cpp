#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "arst/model.hpp"
#include "arst/synthdata.hpp"

using namespace arst;

namespace {

struct Segment {
  int label;
  std::size_t length;
};

std::vector<Segment> runs(const std::vector<int>& y) {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (out.empty() || out.back().label != y[i]) out.push_back({y[i], 0});
    ++out.back().length;
  }
  return out;
}

// Time-weighted occupancy from P^k of the lazy jump chain, with k large.
std::vector<double> occupancy_oracle(const WorkflowSpec& spec) {
  const std::size_t c = spec.n_classes;
  Matrix<double> L(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) L(i, j) = 0.5 * spec.transitions(i, j) + (i == j ? 0.5 : 0.0);
  }
  Matrix<double> P = L;
  for (int k = 0; k < 12; ++k) P = matmul(P, P);  // L^4096
  std::vector<double> occ(c);
  double total = 0;
  for (std::size_t j = 0; j < c; ++j) {
    occ[j] = P(0, j) * spec.mean_dwell[j];
    total += occ[j];
  }
  for (auto& v : occ) v /= total;
  return occ;
}

}  // namespace

TEST_CASE("default workflow is valid and near-linear") {
  const auto spec = default_workflow();
  CHECK_NOTHROW(spec.validate());
  const auto& m = spec.transitions;
  CHECK(m(0, 1) == 1.0);
  CHECK(m(3, 4) == 0.9);
  CHECK(m(3, 5) == 0.1);
  CHECK(m(4, 5) == 0.9);
  CHECK(m(5, 4) == 0.1);
  CHECK(m(6, 0) == 1.0);
  for (std::size_t i = 0; i < 7; ++i) CHECK(m(i, i) == 0.0);
}

TEST_CASE("noiseless generation reproduces centroids exactly") {
  auto spec = default_workflow(7, 8);
  spec.noise_sigma = 0.0;
  SeededRng crng(1);
  const auto centroids = draw_centroids(spec, crng);
  SeededRng rng(2);
  const auto g = gen_video(spec, centroids, rng, 150);
  CHECK(g.video.frames() >= 150);
  CHECK(g.video.labels.front() == 1);
  for (std::size_t t = 0; t < g.video.frames(); ++t) {
    const auto truth = static_cast<std::size_t>(g.video.labels[t] - 1);
    for (std::size_t j = 0; j < 8; ++j) CHECK(g.video.features(t, j) == static_cast<float>(centroids(truth, j)));
  }
}

TEST_CASE("generation is deterministic per seed") {
  const auto spec = default_workflow(7, 6);
  SeededRng c1(3), c2(3);
  const auto cen = draw_centroids(spec, c1);
  CHECK(cen == draw_centroids(spec, c2));
  SeededRng a(9), b(9), other(10);
  const auto ga = gen_video(spec, cen, a, 200);
  const auto gb = gen_video(spec, cen, b, 200);
  CHECK(ga.video.labels == gb.video.labels);
  CHECK(ga.video.features == gb.video.features);
  const auto go = gen_video(spec, cen, other, 200);
  CHECK_FALSE(go.video.features.data() == ga.video.features.data());
}

TEST_CASE("empirical dwell means match the configured means within 5%") {
  auto spec = default_workflow(7, 1);
  SeededRng crng(4);
  const auto cen = draw_centroids(spec, crng);
  std::vector<double> sum(7, 0.0);
  std::vector<std::size_t> count(7, 0);
  std::size_t total = 0;
  SeededRng rng(5);
  std::size_t min_seen = 1000;
  while (*std::min_element(count.begin(), count.end()) < 10000) {
    const auto g = gen_video(spec, cen, rng, 400);
    for (const auto& s : runs(g.video.labels)) {
      sum[static_cast<std::size_t>(s.label - 1)] += static_cast<double>(s.length);
      ++count[static_cast<std::size_t>(s.label - 1)];
      min_seen = std::min(min_seen, s.length);
      ++total;
    }
  }
  CHECK(total >= 10000);
  CHECK(min_seen >= 12);
  for (std::size_t i = 0; i < 7; ++i) {
    const double mean = sum[i] / static_cast<double>(count[i]);
    INFO("phase " << i + 1 << " mean " << mean);
    CHECK(std::abs(mean - spec.mean_dwell[i]) <= 0.05 * spec.mean_dwell[i]);
  }
}

TEST_CASE("phase histogram matches stationary occupancy within 10%") {
  auto spec = default_workflow(7, 1);
  const auto oracle = occupancy_oracle(spec);
  const auto occ = stationary_occupancy(spec);
  for (std::size_t i = 0; i < 7; ++i) CHECK(occ[i] == doctest::Approx(oracle[i]).epsilon(1e-9));

  DatasetCounts counts{100, 0, 0, 2000, 2400};
  const auto ds = gen_dataset(spec, 6, counts);
  std::vector<double> hist(7, 0.0);
  double n = 0;
  for (const auto& e : ds.entries) {
    for (int y : e.video.labels) {
      hist[static_cast<std::size_t>(y - 1)] += 1;
      n += 1;
    }
  }
  for (std::size_t i = 0; i < 7; ++i) {
    INFO("phase " << i + 1 << " empirical " << hist[i] / n << " oracle " << oracle[i]);
    CHECK(std::abs(hist[i] / n - oracle[i]) <= 0.10 * oracle[i]);
  }
}

TEST_CASE("labels never contain a segment shorter than min_dwell") {
  auto spec = default_workflow(5, 2);
  spec.min_dwell = {3, 7, 1, 4, 9};
  spec.mean_dwell = {5, 7, 6, 10, 12};
  const auto ds = gen_dataset(spec, 7, DatasetCounts{30, 5, 5, 50, 300});
  for (const auto& e : ds.entries) {
    for (const auto& s : runs(e.video.labels)) {
      CHECK(s.length >= spec.min_dwell[static_cast<std::size_t>(s.label - 1)]);
    }
    for (int y : e.video.labels) {
      CHECK(y >= 1);
      CHECK(y <= 5);
    }
  }
}

TEST_CASE("hard frames corrupt features only, at a Binomial rate") {
  for (auto mode : {HardFrameMode::PureNoise, HardFrameMode::WrongPhaseCentroid}) {
    auto clean = default_workflow(7, 4);
    auto hard = clean;
    hard.hard_frame_rate = 0.1;
    hard.hard_frame_mode = mode;
    SeededRng c(8);
    const auto cen = draw_centroids(clean, c);
    SeededRng r1(11), r2(11);
    const auto gc = gen_video(clean, cen, r1, 20000);
    const auto gh = gen_video(hard, cen, r2, 20000);
    REQUIRE(gc.video.labels == gh.video.labels);
    const double T = static_cast<double>(gh.video.frames());
    std::size_t k = 0;
    for (std::size_t t = 0; t < gh.video.frames(); ++t) {
      CHECK_FALSE(gc.hard[t]);
      const bool same = std::equal(gc.video.features.row(t).begin(), gc.video.features.row(t).end(),
                                   gh.video.features.row(t).begin());
      CHECK(same == !gh.hard[t]);
      k += gh.hard[t] ? 1 : 0;
    }
    const double sd = std::sqrt(T * 0.1 * 0.9);
    CHECK(std::abs(static_cast<double>(k) - 0.1 * T) <= 3 * sd);
  }
}

TEST_CASE("datasets use per-video derived seeds") {
  const auto spec = default_workflow(7, 3);
  const DatasetCounts counts{2, 1, 1, 40, 60};
  const auto a = gen_dataset(spec, 99, counts);
  REQUIRE(a.entries.size() == 4);
  CHECK(a.entries[0].video.id == "train_000");
  CHECK(a.entries[1].video.id == "train_001");
  CHECK(a.entries[2].video.id == "val_000");
  CHECK(a.entries[3].video.id == "test_000");
  CHECK(a.split(Split::Train).size() == 2);
  CHECK(a.split(Split::Val).size() == 1);
  std::set<std::uint64_t> seeds;
  for (const auto& e : a.entries) seeds.insert(e.seed);
  CHECK(seeds.size() == 4);
  for (const auto& e : a.entries) {
    CHECK(e.video.frames() >= 40);
    CHECK(e.video.features.rows() == e.video.frames());
    CHECK(e.video.features.cols() == 3);
  }

  const auto b = gen_dataset(spec, 99, counts);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.entries[i].video.features == b.entries[i].video.features);
    CHECK(a.entries[i].video.labels == b.entries[i].video.labels);
  }
  CHECK(a.centroids == b.centroids);
}

TEST_CASE("workflow validation names the violated invariant") {
  auto check = [](WorkflowSpec s, const std::string& needle) {
    try {
      s.validate();
      FAIL("expected ConfigError for " << needle);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  auto s = default_workflow();
  s.transitions(0, 1) = 0.5;
  check(s, "sums to");
  s = default_workflow();
  s.transitions(2, 2) = 0.5;
  s.transitions(2, 3) = 0.5;
  check(s, "self-transition");
  s = default_workflow();
  s.min_dwell[3] = 0;
  check(s, "min_dwell");
  s = default_workflow();
  s.mean_dwell[0] = 5;
  check(s, "mean_dwell");
  s = default_workflow();
  s.hard_frame_rate = 1.0;
  check(s, "hard_frame_rate");
  s = default_workflow();
  s.noise_sigma = -1;
  check(s, "noise_sigma");
  CHECK_THROWS_AS(hard_frame_mode_from_string("blur"), ConfigError);
  CHECK(hard_frame_mode_from_string(to_string(HardFrameMode::PureNoise)) == HardFrameMode::PureNoise);

  SeededRng rng(1);
  const auto spec = default_workflow();
  const auto cen = draw_centroids(spec, rng);
  CHECK_THROWS_AS(gen_video(spec, cen, rng, 5), std::invalid_argument);
}

TEST_CASE("geometric draws have mean (1 - p) / p") {
  SeededRng rng(12);
  for (double p : {0.5, 0.1, 1.0 / 29}) {
    double s = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) s += static_cast<double>(rng.geometric(p));
    CHECK(s / n == doctest::Approx((1 - p) / p).epsilon(0.02));
  }
  CHECK(rng.geometric(1.0) == 0);
}
