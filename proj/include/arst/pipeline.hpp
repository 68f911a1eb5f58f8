#pragma once

#include <functional>
#include <span>
#include <vector>

#include "arst/config.hpp"
#include "arst/inference.hpp"
#include "arst/metrics.hpp"
#include "arst/model.hpp"
#include "arst/video.hpp"

namespace arst {

// Fresh model from cfg.init_seed(), trained with cfg.train on `train`.
// on_epoch receives (epoch index, mean loss).
ArstModel<float> train_model(const RunConfig& cfg, std::span<const Video> train,
                             const std::function<void(std::size_t, double)>& on_epoch = {});

struct StreamEval {
  std::vector<StreamResult> streams;
  EvalReport report;
};

StreamEval evaluate_streams(const ArstModel<float>& model, std::span<const Video> videos,
                            const CciConfig& cci);

struct SweepRow {
  std::size_t width = 0;
  EvalReport report;
};

// Trains and evaluates one model per band width with identical seeds. Up to
// `threads` widths run concurrently; rows come back in the order of `widths`.
std::vector<SweepRow> sweep_widths(const RunConfig& cfg, std::span<const Video> train,
                                   std::span<const Video> test, std::span<const std::size_t> widths,
                                   std::size_t threads = 1);

// Worker cap from ARST_THREADS, defaulting to 1.
std::size_t threads_from_env();

}  // namespace arst
