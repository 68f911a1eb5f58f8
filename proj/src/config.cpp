#include "arst/config.hpp"

#include <set>
#include <stdexcept>

namespace arst {

namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were read so the rest can be
// reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(child(key) + " has the wrong type");
    }
  }

  void get_size(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(child(key) + " must be a non-negative integer");
    }
    out = v.get<std::size_t>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + child(key) + "'");
    }
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_model(const json& j, ModelConfig& m) {
  ObjectReader r(j, "model");
  r.get_size("d_model", m.d_model);
  r.get_size("n_heads", m.n_heads);
  r.get_size("width", m.width);
  r.get_size("n_classes", m.n_classes);
  r.get_size("d_ffn", m.d_ffn);
  r.get_size("d_feat", m.d_feat);
  r.get("ln_eps", m.ln_eps);
  r.get("pe_base", m.pe_base);
  r.finish();
}

void read_train(const json& j, TrainConfig& t) {
  ObjectReader r(j, "train");
  r.get("learning_rate", t.learning_rate);
  r.get_size("epochs", t.epochs);
  r.get("adam_beta1", t.adam_beta1);
  r.get("adam_beta2", t.adam_beta2);
  r.get("adam_eps", t.adam_eps);
  if (r.has("grad_clip")) {
    double clip = 0.0;
    r.get("grad_clip", clip);
    t.grad_clip = clip;
  }
  r.finish();
}

void read_cci(const json& j, CciConfig& c) {
  ObjectReader r(j, "cci");
  r.get("enabled", c.enabled);
  r.get_size("n", c.n);
  r.finish();
}

void read_workflow(const json& j, WorkflowSpec& w) {
  ObjectReader r(j, "workflow");
  if (r.has("transitions")) {
    const json& rows = r.at("transitions");
    if (!rows.is_array()) throw ConfigError("workflow.transitions must be an array of rows");
    const std::size_t n = rows.size();
    Matrix<double> m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!rows[i].is_array() || rows[i].size() != n) {
        throw ConfigError("workflow.transitions must be square");
      }
      for (std::size_t k = 0; k < n; ++k) {
        if (!rows[i][k].is_number()) throw ConfigError("workflow.transitions entries must be numbers");
        m(i, k) = rows[i][k].get<double>();
      }
    }
    w.transitions = std::move(m);
  }
  if (r.has("min_dwell")) {
    const json& v = r.at("min_dwell");
    try {
      if (v.is_array()) {
        w.min_dwell = v.get<std::vector<std::size_t>>();
      } else {
        w.min_dwell.assign(w.n_classes, v.get<std::size_t>());
      }
    } catch (const json::exception&) {
      throw ConfigError("workflow.min_dwell must be an integer or an array of integers");
    }
  }
  if (r.has("mean_dwell")) {
    const json& v = r.at("mean_dwell");
    try {
      if (v.is_array()) {
        w.mean_dwell = v.get<std::vector<double>>();
      } else {
        w.mean_dwell.assign(w.n_classes, v.get<double>());
      }
    } catch (const json::exception&) {
      throw ConfigError("workflow.mean_dwell must be a number or an array of numbers");
    }
  }
  r.get("centroid_scale", w.centroid_scale);
  r.get("noise_sigma", w.noise_sigma);
  r.get("hard_frame_rate", w.hard_frame_rate);
  if (r.has("hard_frame_mode")) {
    std::string mode;
    r.get("hard_frame_mode", mode);
    w.hard_frame_mode = hard_frame_mode_from_string(mode);
  }
  r.finish();
}

void read_data(const json& j, DatasetCounts& d) {
  ObjectReader r(j, "data");
  r.get_size("n_train", d.n_train);
  r.get_size("n_val", d.n_val);
  r.get_size("n_test", d.n_test);
  r.get_size("t_min", d.t_min);
  r.get_size("t_max", d.t_max);
  r.finish();
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  cci.validate();
  workflow.validate();
  if (workflow.n_classes != model.n_classes) {
    throw ConfigError("workflow.transitions: " + std::to_string(workflow.n_classes) +
                      " phases but model.n_classes is " + std::to_string(model.n_classes));
  }
  if (workflow.d_feat != model.d_feat) throw ConfigError("model.d_feat does not match workflow feature width");
  if (data.t_max < data.t_min) throw ConfigError("data.t_max must be >= data.t_min");
  if (data.t_min < 2) throw ConfigError("data.t_min must be >= 2");
}

RunConfig default_run_config(const std::string& profile) {
  RunConfig cfg;
  cfg.profile = profile;
  if (profile == "full") {
    cfg.model = ModelConfig{};
    cfg.train.learning_rate = 1e-5;
    cfg.train.epochs = 20;
  } else if (profile == "desk") {
    cfg.model = desk_model_config();
    cfg.train.learning_rate = 1e-3;
    cfg.train.epochs = 20;
  } else {
    throw ConfigError("profile: unknown profile '" + profile + "' (expected 'full' or 'desk')");
  }
  cfg.cci.n = 10;
  cfg.workflow = default_workflow(cfg.model.n_classes, cfg.model.d_feat);
  return cfg;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  ObjectReader r(j, "");
  std::string profile = "full";
  r.get("profile", profile);
  RunConfig cfg = default_run_config(profile);
  if (r.has("seed")) {
    const json& s = r.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      throw ConfigError("seed must be a non-negative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  if (r.has("model")) read_model(r.at("model"), cfg.model);
  // Workflow shape follows the model unless overridden explicitly.
  cfg.workflow = default_workflow(cfg.model.n_classes, cfg.model.d_feat);
  if (r.has("train")) read_train(r.at("train"), cfg.train);
  if (r.has("cci")) read_cci(r.at("cci"), cfg.cci);
  if (r.has("workflow")) read_workflow(r.at("workflow"), cfg.workflow);
  cfg.workflow.n_classes = cfg.workflow.transitions.rows();
  if (r.has("data")) read_data(r.at("data"), cfg.data);
  r.finish();
  cfg.train.seed = cfg.shuffle_seed();
  cfg.validate();
  return cfg;
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  json j;
  j["profile"] = cfg.profile;
  j["seed"] = cfg.seed;
  j["model"] = {{"d_model", cfg.model.d_model}, {"n_heads", cfg.model.n_heads},
                {"width", cfg.model.width},     {"n_classes", cfg.model.n_classes},
                {"d_ffn", cfg.model.d_ffn},     {"d_feat", cfg.model.d_feat},
                {"ln_eps", cfg.model.ln_eps},   {"pe_base", cfg.model.pe_base}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"epochs", cfg.train.epochs},
                {"adam_beta1", cfg.train.adam_beta1},
                {"adam_beta2", cfg.train.adam_beta2},
                {"adam_eps", cfg.train.adam_eps},
                {"grad_clip", cfg.train.grad_clip ? json(*cfg.train.grad_clip) : json(nullptr)}};
  j["cci"] = {{"enabled", cfg.cci.enabled}, {"n", cfg.cci.n}};
  json rows = json::array();
  for (std::size_t i = 0; i < cfg.workflow.transitions.rows(); ++i) {
    const auto r = cfg.workflow.transitions.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["workflow"] = {{"transitions", rows},
                   {"min_dwell", cfg.workflow.min_dwell},
                   {"mean_dwell", cfg.workflow.mean_dwell},
                   {"centroid_scale", cfg.workflow.centroid_scale},
                   {"noise_sigma", cfg.workflow.noise_sigma},
                   {"hard_frame_rate", cfg.workflow.hard_frame_rate},
                   {"hard_frame_mode", to_string(cfg.workflow.hard_frame_mode)}};
  j["data"] = {{"n_train", cfg.data.n_train}, {"n_val", cfg.data.n_val}, {"n_test", cfg.data.n_test},
               {"t_min", cfg.data.t_min},     {"t_max", cfg.data.t_max}};
  return j;
}

}  // namespace arst
