#include "arst/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace arst {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(what_ + ": truncated at byte " + std::to_string(pos_) + " (need " +
                        std::to_string(n) + " more, have " + std::to_string(bytes_.size() - pos_) + ")");
    }
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes_[pos_++]) << (8 * i));
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string rest() {
    std::string s = bytes_.substr(pos_);
    pos_ = bytes_.size();
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string encode_features(const Matrix<float>& features) {
  std::string out(kFeatureMagic, 6);
  put_u32(out, static_cast<std::uint32_t>(features.rows()));
  put_u32(out, static_cast<std::uint32_t>(features.cols()));
  out.reserve(kFeatureHeaderBytes + 4 * features.size());
  for (float v : features.data()) put_f32(out, v);
  return out;
}

Matrix<float> decode_features(const std::string& bytes) {
  ByteReader r(bytes, "feature file");
  if (r.str(6) != std::string(kFeatureMagic, 6)) throw FormatError("feature file: bad magic");
  const std::uint32_t T = r.u32();
  const std::uint32_t d = r.u32();
  const std::uint64_t expected = kFeatureHeaderBytes + 4ULL * T * d;
  if (bytes.size() != expected) {
    throw FormatError("feature file: length " + std::to_string(bytes.size()) + " != expected " +
                      std::to_string(expected) + " for T=" + std::to_string(T) + ", d_feat=" + std::to_string(d));
  }
  Matrix<float> m(T, d);
  for (auto& v : m.data()) v = r.f32();
  return m;
}

void write_features(const fs::path& path, const Matrix<float>& features) {
  write_file_bytes(path, encode_features(features));
}

Matrix<float> read_features(const fs::path& path) { return decode_features(read_file_bytes(path)); }

std::string encode_labels(std::span<const int> labels) {
  std::string out;
  for (int l : labels) {
    out += std::to_string(l);
    out += '\n';
  }
  return out;
}

std::vector<int> decode_labels(const std::string& text) {
  std::vector<int> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(line, &used);
    } catch (const std::exception&) {
      throw FormatError("labels: line " + std::to_string(lineno) + " is not an integer");
    }
    if (used != line.size()) throw FormatError("labels: line " + std::to_string(lineno) + " is not an integer");
    if (v < 1) throw FormatError("labels: line " + std::to_string(lineno) + " is not a phase id");
    out.push_back(v);
  }
  return out;
}

void write_labels(const fs::path& path, std::span<const int> labels) {
  write_file_bytes(path, encode_labels(labels));
}

std::vector<int> read_labels(const fs::path& path) { return decode_labels(read_file_bytes(path)); }

std::string encode_checkpoint(const ArstModel<float>& model, const RunConfig& config) {
  if (!(model.cfg == config.model)) throw FormatError("checkpoint: model does not match run config");
  std::string out(kCheckpointMagic, 6);
  const auto params = model.parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put_u16(out, static_cast<std::uint16_t>(p->name.size()));
    out += p->name;
    out.push_back(static_cast<char>(2));
    put_u32(out, static_cast<std::uint32_t>(p->value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p->value.cols()));
    for (float v : p->value.data()) put_f32(out, v);
  }
  out += run_config_to_json(config).dump();
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.str(6) != std::string(kCheckpointMagic, 6)) throw FormatError("checkpoint: bad magic");
  const std::uint32_t count = r.u32();
  struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
  };
  std::map<std::string, Tensor> tensors;
  std::vector<std::string> order;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    std::string name = r.str(len);
    const std::uint8_t rank = r.u8();
    Tensor t;
    std::uint64_t n = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      t.dims.push_back(r.u32());
      n *= t.dims.back();
    }
    r.need(4 * n);
    t.data.resize(n);
    for (auto& v : t.data) v = r.f32();
    if (tensors.count(name)) throw FormatError("checkpoint: duplicate tensor '" + name + "'");
    order.push_back(name);
    tensors.emplace(std::move(name), std::move(t));
  }
  const std::string trailer = r.rest();
  if (trailer.empty()) throw FormatError("checkpoint: missing config trailer");
  RunConfig cfg;
  try {
    cfg = run_config_from_json(json::parse(trailer));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint: config trailer is not valid JSON: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: config trailer rejected: ") + e.what());
  }

  Checkpoint ck{cfg, ArstModel<float>(cfg.model)};
  auto params = ck.model.parameters();
  if (params.size() != tensors.size()) {
    throw FormatError("checkpoint: " + std::to_string(tensors.size()) + " tensors, model expects " +
                      std::to_string(params.size()));
  }
  for (auto* p : params) {
    auto it = tensors.find(p->name);
    if (it == tensors.end()) throw FormatError("checkpoint: missing tensor '" + p->name + "'");
    const Tensor& t = it->second;
    if (t.dims.size() != 2 || t.dims[0] != p->value.rows() || t.dims[1] != p->value.cols()) {
      throw FormatError("checkpoint: tensor '" + p->name + "' has the wrong shape for the model config");
    }
    p->value = Matrix<float>(p->value.rows(), p->value.cols(), t.data);
  }
  return ck;
}

void save_checkpoint(const fs::path& path, const ArstModel<float>& model, const RunConfig& config) {
  write_file_bytes(path, encode_checkpoint(model, config));
}

Checkpoint load_checkpoint(const fs::path& path) { return decode_checkpoint(read_file_bytes(path)); }

std::string encode_predictions_csv(const StreamResult& result) {
  const std::size_t c = result.probs.empty() ? 0 : result.probs.front().size();
  std::string out = "frame_index,committed_phase";
  for (std::size_t k = 1; k <= c; ++k) out += ",p" + std::to_string(k);
  out += '\n';
  for (std::size_t t = 0; t < result.frames(); ++t) {
    out += std::to_string(t + 1);
    out += ',';
    out += std::to_string(result.committed[t]);
    for (double p : result.probs[t]) {
      out += ',';
      out += format_double(p);
    }
    out += '\n';
  }
  return out;
}

std::vector<int> decode_predictions_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("frame_index,committed_phase", 0) != 0) {
    throw FormatError("predictions: missing 'frame_index,committed_phase' header");
  }
  std::vector<int> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    if (c1 == std::string::npos) throw FormatError("predictions: line " + std::to_string(lineno) + " has no columns");
    const auto c2 = line.find(',', c1 + 1);
    const std::string phase = line.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1);
    try {
      std::size_t used = 0;
      const int v = std::stoi(phase, &used);
      if (used != phase.size() || v < 1) throw std::invalid_argument("bad phase");
      out.push_back(v);
    } catch (const std::exception&) {
      throw FormatError("predictions: line " + std::to_string(lineno) + " has a bad committed_phase");
    }
  }
  return out;
}

std::vector<int> read_phase_sequence(const fs::path& path) {
  const std::string text = read_file_bytes(path);
  if (text.rfind("frame_index", 0) == 0) return decode_predictions_csv(text);
  return decode_labels(text);
}

void write_dataset(const fs::path& dir, const SyntheticDataset& ds, const RunConfig& config) {
  fs::create_directories(dir);
  json videos = json::array();
  std::map<std::string, std::size_t> counts;
  for (const auto& e : ds.entries) {
    const std::string split = to_string(e.split);
    fs::create_directories(dir / split);
    const std::string feat = split + "/" + e.video.id + ".feat";
    const std::string lab = split + "/" + e.video.id + ".labels";
    write_features(dir / feat, e.video.features);
    write_labels(dir / lab, e.video.labels);
    ++counts[split];
    videos.push_back({{"id", e.video.id},
                      {"split", split},
                      {"frames", e.video.frames()},
                      {"seed", e.seed},
                      {"hard_frames", e.hard_frames},
                      {"features", feat},
                      {"labels", lab}});
  }
  for (const char* s : {"train", "val", "test"}) fs::create_directories(dir / s);
  json manifest = {{"format", "arst-dataset"},
                   {"version", 1},
                   {"seed", ds.seed},
                   {"n_classes", ds.spec.n_classes},
                   {"d_feat", ds.spec.d_feat},
                   {"counts", {{"train", counts["train"]}, {"val", counts["val"]}, {"test", counts["test"]}}},
                   {"videos", videos},
                   {"config", run_config_to_json(config)}};
  write_file_bytes(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedDataset read_dataset(const fs::path& dir) {
  LoadedDataset out;
  try {
    out.manifest = json::parse(read_file_bytes(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest.json is not valid JSON: ") + e.what());
  }
  if (!out.manifest.is_object() || out.manifest.value("format", "") != "arst-dataset") {
    throw FormatError("manifest.json: not an arst dataset");
  }
  struct Entry {
    std::string id, split, features, labels;
  };
  std::size_t d_feat = 0;
  std::vector<Entry> entries;
  try {
    d_feat = out.manifest.at("d_feat").get<std::size_t>();
    for (const auto& v : out.manifest.at("videos")) {
      entries.push_back({v.at("id").get<std::string>(), v.at("split").get<std::string>(),
                         v.at("features").get<std::string>(), v.at("labels").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest.json: ") + e.what());
  }
  for (const auto& v : entries) {
    Video video;
    video.id = v.id;
    video.features = read_features(dir / v.features);
    video.labels = read_labels(dir / v.labels);
    if (video.features.rows() != video.labels.size()) {
      throw FormatError("dataset: video '" + video.id + "' has " + std::to_string(video.features.rows()) +
                        " feature rows but " + std::to_string(video.labels.size()) + " labels");
    }
    if (video.features.cols() != d_feat) throw FormatError("dataset: video '" + video.id + "' has the wrong d_feat");
    const std::string& split = v.split;
    if (split == "train") {
      out.train.push_back(std::move(video));
    } else if (split == "val") {
      out.val.push_back(std::move(video));
    } else if (split == "test") {
      out.test.push_back(std::move(video));
    } else {
      throw FormatError("dataset: unknown split '" + split + "'");
    }
  }
  return out;
}

namespace {

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

}  // namespace

json eval_report_json(const EvalReport& report) {
  json videos = json::array();
  for (const auto& v : report.videos) {
    json phases = json::array();
    for (const auto& p : v.per_phase) {
      phases.push_back({{"phase", p.phase},
                        {"in_ground_truth", p.in_ground_truth},
                        {"tp", p.tp},
                        {"fp", p.fp},
                        {"fn", p.fn},
                        {"precision", p.precision},
                        {"recall", p.recall},
                        {"jaccard", p.jaccard}});
    }
    videos.push_back({{"id", v.id},
                      {"frames", v.frames},
                      {"accuracy", v.accuracy},
                      {"precision", v.precision},
                      {"recall", v.recall},
                      {"jaccard", v.jaccard},
                      {"pred_transitions", v.pred_transitions},
                      {"gt_transitions", v.gt_transitions},
                      {"excess_transitions", v.excess_transitions()},
                      {"per_phase", phases}});
  }
  return {{"videos", videos},
          {"aggregate",
           {{"n_videos", report.videos.size()},
            {"accuracy", mean_std_json(report.accuracy)},
            {"precision", mean_std_json(report.precision)},
            {"recall", mean_std_json(report.recall)},
            {"jaccard", mean_std_json(report.jaccard)},
            {"pred_transitions", mean_std_json(report.pred_transitions)},
            {"gt_transitions", mean_std_json(report.gt_transitions)},
            {"excess_transitions", mean_std_json(report.excess_transitions)}}}};
}

json latency_report_json(const LatencyReport& report) {
  return {{"reference", {{"fps", kReferenceFps}, {"ms_per_frame", kReferenceMsPerFrame},
                         {"note", "reference GPU figure for comparison only; not a target"}}},
          {"frames", report.frames},
          {"width", report.width},
          {"cci", {{"enabled", report.cci}, {"n", report.cci_n}}},
          {"mean_ms", report.mean_ms},
          {"median_ms", report.median_ms},
          {"p99_ms", report.p99_ms},
          {"fps", report.fps},
          {"samples_ms", report.samples_ms}};
}

}  // namespace arst
