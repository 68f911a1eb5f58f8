#include "arst/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "arst/training.hpp"

namespace arst {

ArstModel<float> train_model(const RunConfig& cfg, std::span<const Video> train,
                             const std::function<void(std::size_t, double)>& on_epoch) {
  ArstModel<float> model(cfg.model);
  model.init(cfg.init_seed());
  TrainConfig tc = cfg.train;
  tc.seed = cfg.shuffle_seed();
  Trainer<float> trainer(model, tc);
  trainer.fit(train, on_epoch);
  return model;
}

StreamEval evaluate_streams(const ArstModel<float>& model, std::span<const Video> videos,
                            const CciConfig& cci) {
  StreamEval out;
  std::vector<VideoEval> evals;
  for (const auto& v : videos) {
    out.streams.push_back(run_stream(model, v.features, cci));
    evals.push_back(eval_video(out.streams.back().committed, v.labels, v.id));
  }
  out.report = aggregate(std::move(evals));
  return out;
}

std::vector<SweepRow> sweep_widths(const RunConfig& cfg, std::span<const Video> train,
                                   std::span<const Video> test, std::span<const std::size_t> widths,
                                   std::size_t threads) {
  if (widths.empty()) throw ConfigError("w-list must not be empty");
  std::vector<SweepRow> rows(widths.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < widths.size(); i = next++) {
      try {
        RunConfig c = cfg;
        c.model.width = widths[i];
        const ArstModel<float> model = train_model(c, train);
        rows[i] = SweepRow{widths[i], evaluate_streams(model, test, c.cci).report};
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, widths.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::size_t threads_from_env() {
  const char* v = std::getenv("ARST_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (end == v || n < 1) return 1;
  return static_cast<std::size_t>(n);
}

}  // namespace arst
