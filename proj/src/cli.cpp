#include "arst/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "arst/config.hpp"
#include "arst/errors.hpp"
#include "arst/inference.hpp"
#include "arst/io.hpp"
#include "arst/metrics.hpp"
#include "arst/pipeline.hpp"
#include "arst/training.hpp"

namespace arst::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file_bytes(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text);
}

std::string fmt(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string mean_std_cell(const MeanStd& m) {
  return fmt(100.0 * m.mean, 2) + " +- " + fmt(100.0 * m.std, 2);
}

json report_row(const EvalReport& r) {
  const json agg = eval_report_json(r).at("aggregate");
  return agg;
}

struct GenArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const SyntheticDataset ds = gen_dataset(cfg.workflow, cfg.seed, cfg.data);
  write_dataset(a.out, ds, cfg);
  out << json{{"written", a.out},
              {"train", cfg.data.n_train},
              {"val", cfg.data.n_val},
              {"test", cfg.data.n_test}}
             .dump()
      << "\n";
  return kOk;
}

struct TrainArgs {
  std::string data, config, out_model;
};

RunConfig config_for_data(const std::string& config_path, const LoadedDataset& ds) {
  if (!config_path.empty()) return load_config(config_path);
  return run_config_from_json(ds.manifest.at("config"));
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const LoadedDataset ds = read_dataset(a.data);
  const RunConfig cfg = config_for_data(a.config, ds);
  if (ds.train.empty()) throw FormatError("dataset has no training videos");
  if (ds.train.front().features.cols() != cfg.model.d_feat) {
    throw FormatError("dataset d_feat " + std::to_string(ds.train.front().features.cols()) +
                      " does not match model.d_feat " + std::to_string(cfg.model.d_feat));
  }
  const ArstModel<float> model = train_model(cfg, ds.train, [&](std::size_t epoch, double loss) {
    out << json{{"epoch", epoch + 1}, {"mean_loss", loss}}.dump() << "\n";
    out.flush();
  });
  save_checkpoint(a.out_model, model, cfg);
  return kOk;
}

struct InferArgs {
  std::string model, features, out, bench;
  bool cci = false;
  std::size_t n = 10;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.model);
  const Matrix<float> features = read_features(a.features);
  if (features.cols() != ck.model.cfg.d_feat) {
    throw FormatError("feature file has d_feat " + std::to_string(features.cols()) +
                      " but the checkpoint expects " + std::to_string(ck.model.cfg.d_feat));
  }
  if (features.rows() == 0) throw FormatError("feature file has no frames");
  const CciConfig cci{a.cci, a.n};
  cci.validate();
  const StreamResult res = run_stream(ck.model, features, cci);
  write_file_bytes(a.out, encode_predictions_csv(res));
  if (!a.bench.empty()) {
    LatencyReport rep = summarize_latency(res.latency_ms);
    rep.width = ck.model.cfg.width;
    rep.cci = cci.enabled;
    rep.cci_n = cci.n;
    write_file_bytes(a.bench, latency_report_json(rep).dump(2) + "\n");
  }
  out << json{{"frames", res.frames()},
              {"cci", {{"enabled", cci.enabled}, {"n", cci.n}}},
              {"transitions_proposed", res.decisions.size()},
              {"transitions", count_transitions(res.committed)}}
             .dump()
      << "\n";
  return kOk;
}

struct EvalArgs {
  std::vector<std::string> pred, gt;
  std::string report, ribbon;
};

fs::path ribbon_path(const std::string& base, std::size_t index, std::size_t total) {
  if (total == 1) return base;
  const fs::path p(base);
  return p.parent_path() / (p.stem().string() + "_" + std::to_string(index + 1) + p.extension().string());
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.pred.size() != a.gt.size()) {
    throw LengthMismatchError("eval: " + std::to_string(a.pred.size()) + " --pred files for " +
                              std::to_string(a.gt.size()) + " --gt files");
  }
  if (a.pred.empty()) throw ConfigError("eval: at least one --pred/--gt pair is required");
  std::vector<VideoEval> evals;
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    const auto pred = read_phase_sequence(a.pred[i]);
    const auto gt = read_labels(a.gt[i]);
    evals.push_back(eval_video(pred, gt, fs::path(a.gt[i]).stem().string()));
    if (!a.ribbon.empty()) export_ribbon(pred, gt, ribbon_path(a.ribbon, i, a.pred.size()));
  }
  const EvalReport rep = aggregate(std::move(evals));
  const std::string text = eval_report_json(rep).dump(2) + "\n";
  if (!a.report.empty()) {
    write_file_bytes(a.report, text);
  } else {
    out << text;
  }
  if (!a.report.empty()) {
    out << json{{"videos", rep.videos.size()},
                {"accuracy", rep.accuracy.mean},
                {"precision", rep.precision.mean},
                {"recall", rep.recall.mean},
                {"jaccard", rep.jaccard.mean}}
               .dump()
        << "\n";
  }
  return kOk;
}

std::vector<std::size_t> parse_width_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
    }
    if (v < 0 || used != item.size()) throw ConfigError("w-list: '" + item + "' is not a non-negative integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError("w-list must not be empty");
  return out;
}

struct SweepArgs {
  std::string data, config, w_list = "0,2,5,10,20", out;
  bool cci = false;
};

int cmd_sweep_w(const SweepArgs& a, std::ostream& out) {
  const auto widths = parse_width_list(a.w_list);
  const LoadedDataset ds = read_dataset(a.data);
  RunConfig cfg = config_for_data(a.config, ds);
  if (a.cci) cfg.cci.enabled = true;
  const auto rows = sweep_widths(cfg, ds.train, ds.test, widths, threads_from_env());

  json table = json::array();
  out << "W\tAccuracy\tPrecision\tRecall\tJaccard\n";
  for (const auto& r : rows) {
    out << r.width << "\t" << mean_std_cell(r.report.accuracy) << "\t" << mean_std_cell(r.report.precision)
        << "\t" << mean_std_cell(r.report.recall) << "\t" << mean_std_cell(r.report.jaccard) << "\n";
    json row = report_row(r.report);
    row["width"] = r.width;
    table.push_back(row);
  }
  if (!a.out.empty()) {
    const json doc = {{"cci", {{"enabled", cfg.cci.enabled}, {"n", cfg.cci.n}}}, {"rows", table}};
    write_file_bytes(a.out, doc.dump(2) + "\n");
  }
  return kOk;
}

struct AblateArgs {
  std::string data, config, out;
};

// Greedy auto-regressive decoding versus consistency-constrained decoding on
// the test split of one trained model.
int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  const LoadedDataset ds = read_dataset(a.data);
  const RunConfig cfg = config_for_data(a.config, ds);
  const ArstModel<float> model = train_model(cfg, ds.train);
  json rows = json::array();
  out << "decoder\tAccuracy\tPrecision\tRecall\tJaccard\tTransitions\n";
  for (bool enabled : {false, true}) {
    const CciConfig cci{enabled, cfg.cci.n};
    const EvalReport rep = evaluate_streams(model, ds.test, cci).report;
    const std::string name = enabled ? "AR+CCI(n=" + std::to_string(cci.n) + ")" : "AR";
    out << name << "\t" << mean_std_cell(rep.accuracy) << "\t" << mean_std_cell(rep.precision) << "\t"
        << mean_std_cell(rep.recall) << "\t" << mean_std_cell(rep.jaccard) << "\t"
        << fmt(rep.pred_transitions.mean, 2) << "\n";
    json row = report_row(rep);
    row["decoder"] = name;
    rows.push_back(row);
  }
  if (!a.out.empty()) write_file_bytes(a.out, json{{"rows", rows}}.dump(2) + "\n");
  return kOk;
}

struct BenchArgs {
  std::string model, config, out;
  std::size_t frames = 2000;
  bool cci = false;
  std::size_t n = 10;
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  ArstModel<float> model;
  if (!a.model.empty()) {
    model = load_checkpoint(a.model).model;
  } else {
    const RunConfig cfg = a.config.empty() ? default_run_config("desk") : load_config(a.config);
    model = ArstModel<float>(cfg.model);
    model.init(cfg.init_seed());
  }
  const LatencyReport rep = bench_latency(model, CciConfig{a.cci, a.n}, a.frames, a.seed);
  const json doc = latency_report_json(rep);
  if (!a.out.empty()) write_file_bytes(a.out, doc.dump(2) + "\n");
  json summary = doc;
  summary.erase("samples_ms");
  out << summary.dump() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Auto-regressive transformer for online phase recognition", "arst"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset directory");
  g->add_option("--config", gen.config, "Run config JSON")->required();
  g->add_option("--out", gen.out, "Output dataset directory")->required();
  g->add_option("--seed", gen.seed, "Override the config seed");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Teacher-forced training; one JSON loss line per epoch");
  t->add_option("--data", train.data, "Dataset directory")->required();
  t->add_option("--config", train.config, "Run config JSON (default: the dataset manifest's)");
  t->add_option("--out-model", train.out_model, "Checkpoint to write")->required();

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "Stream one feature file; write per-frame predictions CSV");
  i->add_option("--model", infer.model, "Checkpoint")->required();
  i->add_option("--features", infer.features, "Feature file (.feat)")->required();
  i->add_flag("--cci", infer.cci, "Enable consistency-constraint inference");
  i->add_option("--n", infer.n, "Consistency horizon")->capture_default_str();
  i->add_option("--out", infer.out, "Predictions CSV")->required();
  i->add_option("--bench", infer.bench, "Write a per-frame latency report (JSON)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predictions against ground truth");
  e->add_option("--pred", ev.pred, "Predictions CSV or labels file (repeatable)")->required();
  e->add_option("--gt", ev.gt, "Ground-truth labels file (repeatable, paired with --pred)")->required();
  e->add_option("--report", ev.report, "Report JSON (default: stdout)");
  e->add_option("--ribbon", ev.ribbon, "SVG ribbon path (suffixed _k for multiple videos)");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep-w", "Train and evaluate one model per band width");
  s->add_option("--data", sw.data, "Dataset directory")->required();
  s->add_option("--config", sw.config, "Run config JSON (default: the dataset manifest's)");
  s->add_option("--w-list", sw.w_list, "Comma-separated widths")->capture_default_str();
  s->add_option("--out", sw.out, "Table JSON");
  s->add_flag("--cci", sw.cci, "Evaluate with consistency-constraint inference");

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Greedy vs consistency-constrained decoding on one model");
  a->add_option("--data", ab.data, "Dataset directory")->required();
  a->add_option("--config", ab.config, "Run config JSON (default: the dataset manifest's)");
  a->add_option("--out", ab.out, "Table JSON");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Per-frame streaming latency on synthetic input");
  b->add_option("--model", bench.model, "Checkpoint (default: randomly initialised model)");
  b->add_option("--config", bench.config, "Run config for a random model (default: desk profile)");
  b->add_option("--frames", bench.frames, "Stream length")->capture_default_str();
  b->add_flag("--cci", bench.cci, "Enable consistency-constraint inference");
  b->add_option("--n", bench.n, "Consistency horizon")->capture_default_str();
  b->add_option("--seed", bench.seed, "Input seed")->capture_default_str();
  b->add_option("--out", bench.out, "Latency report JSON");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kConfigError;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, out);
    if (t->parsed()) return cmd_train(train, out);
    if (i->parsed()) return cmd_infer(infer, out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (s->parsed()) return cmd_sweep_w(sw, out);
    if (a->parsed()) return cmd_ablate(ab, out);
    if (b->parsed()) return cmd_bench(bench, out);
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kConfigError;
  } catch (const TrainingNumericError& ex) {
    err << "training error: " << ex.what() << "\n";
    return kTrainingNumericError;
  } catch (const LengthMismatchError& ex) {
    err << "length mismatch: " << ex.what() << "\n";
    return kEvalMismatch;
  } catch (const FormatError& ex) {
    err << "format error: " << ex.what() << "\n";
    return kFormatError;
  } catch (const DimensionError& ex) {
    err << "format error: " << ex.what() << "\n";
    return kFormatError;
  } catch (const IoError& ex) {
    err << "io error: " << ex.what() << "\n";
    return kFormatError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace arst::cli
