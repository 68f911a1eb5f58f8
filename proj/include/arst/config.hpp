#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "arst/inference.hpp"
#include "arst/model.hpp"
#include "arst/synthdata.hpp"
#include "arst/training.hpp"

namespace arst {

// Everything a CLI run depends on. Parsed from JSON; unknown keys are
// rejected with ConfigError naming the dotted key path.
//
// Defaults describe the full-scale setup ("full" profile: d_model 512, 8 heads,
// W 5, 7 phases, CCI n 10, Adam lr 1e-5 for 20 epochs). The "desk" profile
// shrinks the model to d_model 64, 4 heads, d_feat 32 and raises the learning
// rate so the synthetic experiments train in seconds.
struct RunConfig {
  std::string profile = "full";
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  CciConfig cci;
  WorkflowSpec workflow;
  DatasetCounts data;

  // Sub-seeds derived from `seed`.
  std::uint64_t init_seed() const { return derive_seed(seed, 0x1001); }
  std::uint64_t shuffle_seed() const { return derive_seed(seed, 0x1002); }

  void validate() const;
};

RunConfig default_run_config(const std::string& profile);

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig parse_run_config(const std::string& text);
nlohmann::json run_config_to_json(const RunConfig& cfg);

}  // namespace arst
