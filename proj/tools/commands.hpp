#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace sppnet::cli {

struct Options {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<int> iterations;
  std::optional<std::filesystem::path> output;
  std::string image;
  int n = 10;
  bool oracle = false;
  bool measure_fps = false;
  bool accounting_only = false;
};

// Each command writes its artifacts under the output directory and returns 0.
// Failures throw sppnet::Error (or std::exception) with a readable message.
int cmd_train(const Options& opts, std::ostream& log);
int cmd_eval(const Options& opts, std::ostream& log);
int cmd_stability(const Options& opts, std::ostream& log);
int cmd_sample_points(const Options& opts, std::ostream& log);
int cmd_info(const Options& opts, std::ostream& log);
int cmd_ablate(const Options& opts, std::ostream& log);

inline constexpr const char* kCheckpointFile = "checkpoint.sppnet";
inline constexpr const char* kTrainLogFile = "train_log.jsonl";
inline constexpr const char* kEvalReportFile = "eval_report.json";
inline constexpr const char* kStabilityReportFile = "stability_report.json";
inline constexpr const char* kInfoFile = "info.json";
inline constexpr const char* kAblationReportFile = "ablation_report.json";

}  // namespace sppnet::cli
