#include "arst/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace arst {

void ModelConfig::validate() const {
  if (d_model < 1) throw ConfigError("model.d_model must be >= 1");
  if (n_heads < 1) throw ConfigError("model.n_heads must be >= 1");
  if (d_model % n_heads != 0) {
    throw ConfigError("model.n_heads: d_model " + std::to_string(d_model) +
                      " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (n_classes < 2) throw ConfigError("model.n_classes must be >= 2");
  if (d_ffn < 1) throw ConfigError("model.d_ffn must be >= 1");
  if (d_feat < 1) throw ConfigError("model.d_feat must be >= 1");
  if (!(ln_eps >= 0.0)) throw ConfigError("model.ln_eps must be >= 0");
  if (!(pe_base > 0.0)) throw ConfigError("model.pe_base must be > 0");
}

ModelConfig desk_model_config() {
  ModelConfig cfg;
  cfg.d_model = 64;
  cfg.n_heads = 4;
  cfg.width = 5;
  cfg.n_classes = 7;
  cfg.d_ffn = 256;
  cfg.d_feat = 32;
  return cfg;
}

std::pair<std::size_t, std::size_t> phase_segment(int phase, std::size_t d_model,
                                                  std::size_t n_classes) {
  if (phase < 1 || static_cast<std::size_t>(phase) > n_classes) {
    throw std::domain_error("phase id " + std::to_string(phase) + " outside [1, " +
                            std::to_string(n_classes) + "]");
  }
  const std::size_t base = d_model / n_classes;
  const std::size_t extra = d_model % n_classes;
  const auto i = static_cast<std::size_t>(phase - 1);
  const std::size_t begin = i * base + std::min(i, extra);
  const std::size_t len = base + (i < extra ? 1 : 0);
  return {begin, begin + len};
}

std::vector<double> phase_embed(PhaseToken token, const ModelConfig& cfg) {
  std::vector<double> e(cfg.d_model, 0.0);
  if (token.is_bos()) return e;
  const auto [begin, end] = phase_segment(token.value, cfg.d_model, cfg.n_classes);
  for (std::size_t j = begin; j < end; ++j) e[j] = 1.0;
  return e;
}

std::vector<double> positional_encoding(std::size_t position, const ModelConfig& cfg) {
  std::vector<double> pe(cfg.d_model);
  const double t = static_cast<double>(position);
  const double d = static_cast<double>(cfg.d_model);
  for (std::size_t j = 0; j < cfg.d_model; j += 2) {
    const double freq = std::pow(cfg.pe_base, static_cast<double>(j) / d);
    pe[j] = std::sin(t / freq);
    if (j + 1 < cfg.d_model) pe[j + 1] = std::cos(t / freq);
  }
  return pe;
}

std::size_t parameter_count(const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model;
  const std::size_t f = cfg.d_ffn;
  const std::size_t attention = 4 * (d * d + d);
  const std::size_t ffn = d * f + f + f * d + d;
  const std::size_t ln = 2 * d;
  const std::size_t input = cfg.d_feat * d + d;
  const std::size_t head = d * cfg.n_classes + cfg.n_classes;
  const std::size_t encoder = attention + ffn + 2 * ln;
  const std::size_t decoder = 2 * attention + ffn + 3 * ln;
  return input + encoder + decoder + head;
}

std::vector<PhaseToken> shift_labels(std::span<const int> labels) {
  std::vector<PhaseToken> out;
  out.reserve(labels.size());
  if (labels.empty()) return out;
  out.push_back(PhaseToken::bos());
  for (std::size_t t = 0; t + 1 < labels.size(); ++t) out.push_back(PhaseToken::phase(labels[t]));
  return out;
}

}  // namespace arst
