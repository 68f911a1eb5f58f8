#pragma once

// On-disk formats. All binary data is little-endian.
//
// Feature file (.feat):
//   "ARSTF1" | u32 T | u32 d_feat | T*d_feat f32, row-major
// Labels file (.labels): one 1-based phase id per line, T lines.
// Checkpoint (.arst):
//   "ARSTM1" | u32 tensor count | per tensor:
//     u16 name length | name bytes | u8 rank | u32 dims[rank] | f32 payload
//   followed by the producing run config as UTF-8 JSON up to end of file.
// Predictions (.csv): header "frame_index,committed_phase,p1..pc", one row per frame.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "arst/config.hpp"
#include "arst/errors.hpp"
#include "arst/inference.hpp"
#include "arst/metrics.hpp"
#include "arst/model.hpp"
#include "arst/synthdata.hpp"

namespace arst {

inline constexpr char kFeatureMagic[] = "ARSTF1";
inline constexpr char kCheckpointMagic[] = "ARSTM1";
inline constexpr std::size_t kFeatureHeaderBytes = 14;

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

std::string encode_features(const Matrix<float>& features);
Matrix<float> decode_features(const std::string& bytes);
void write_features(const std::filesystem::path& path, const Matrix<float>& features);
Matrix<float> read_features(const std::filesystem::path& path);

std::string encode_labels(std::span<const int> labels);
std::vector<int> decode_labels(const std::string& text);
void write_labels(const std::filesystem::path& path, std::span<const int> labels);
std::vector<int> read_labels(const std::filesystem::path& path);

std::string encode_checkpoint(const ArstModel<float>& model, const RunConfig& config);
struct Checkpoint {
  RunConfig config;
  ArstModel<float> model;
};
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const ArstModel<float>& model, const RunConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_predictions_csv(const StreamResult& result);
// Committed phase column of a predictions CSV.
std::vector<int> decode_predictions_csv(const std::string& text);

// Reads either a predictions CSV or a labels file, by content.
std::vector<int> read_phase_sequence(const std::filesystem::path& path);

// Dataset directory: manifest.json plus <split>/<id>.feat and <id>.labels.
void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& ds, const RunConfig& config);

struct LoadedDataset {
  nlohmann::json manifest;
  std::vector<Video> train, val, test;
};
LoadedDataset read_dataset(const std::filesystem::path& dir);

nlohmann::json eval_report_json(const EvalReport& report);
nlohmann::json latency_report_json(const LatencyReport& report);

// Reference GPU throughput of the full pipeline, echoed in latency reports for
// comparison only.
inline constexpr double kReferenceFps = 66.0;
inline constexpr double kReferenceMsPerFrame = 15.15;

}  // namespace arst
