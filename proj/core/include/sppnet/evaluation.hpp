#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sppnet/data_io.hpp"
#include "sppnet/metrics.hpp"
#include "sppnet/sppnet.hpp"

namespace sppnet {

/// Anything that maps (sample, prompt pair) to a binary mask at the
/// sample's original resolution.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual BinaryMask segment(const Sample& sample, const PromptPair& prompts) const = 0;
};

/// Runs the network and postprocesses to the original size. Prompt-independent
/// image features are cached per sample id, so repeated prompt draws on the
/// same image only rerun the decoder.
class SppNetSegmenter : public Segmenter {
 public:
  SppNetSegmenter(const SppNet& model, const NormalizationStats& stats) : model_(&model), stats_(stats) {}

  BinaryMask segment(const Sample& sample, const PromptPair& prompts) const override;
  /// Raw (num_classes, D, D) logits.
  Tensor logits(const Sample& sample, const PromptPair& prompts) const;

 private:
  const ImageFeatures& features(const Sample& sample) const;

  const SppNet* model_;
  NormalizationStats stats_;
  mutable std::map<std::string, ImageFeatures> cache_;
};

/// Returns the ground-truth foreground regardless of the prompts.
class OracleSegmenter : public Segmenter {
 public:
  BinaryMask segment(const Sample& sample, const PromptPair& prompts) const override;
};

struct ImageScore {
  std::string id;
  double iou = 0.0;
  double dsc = 0.0;
  PromptPair prompts;
};

struct EvalReport {
  std::uint64_t seed = 0;
  std::vector<ImageScore> per_image;
  double miou_mean = 0.0;
  double miou_std = 0.0;
  double dsc_mean = 0.0;
  double dsc_std = 0.0;
  std::int64_t params_total = 0;
  std::int64_t flops_total = 0;
  /// Present only when measured; timings are not reproducible.
  std::optional<double> fps;
};

struct StabilityReport {
  std::uint64_t base_seed = 0;
  int iterations = 0;
  std::vector<double> dsc_samples;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

struct FpsResult {
  double fps = 0.0;         // n_timed / total seconds
  double median_fps = 0.0;  // 1 / median single-run seconds
  double total_seconds = 0.0;
};

/// Population mean and standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

/// The prompt pair `evaluate` draws for image `index` under `seed`.
PromptPair evaluation_prompts(const Sample& sample, const SamplerConfig& sampler, std::uint64_t seed,
                              std::size_t index);

/// One seeded prompt pair per image, iou and dsc at the original resolution
/// against the foreground union, aggregated as mean and std over images.
EvalReport evaluate(const Segmenter& segmenter, std::span<const Sample> samples, const SamplerConfig& sampler,
                    std::uint64_t seed);

/// `evaluate` repeated with derived seeds; collects the per-run DSC means.
StabilityReport stability_eval(const Segmenter& segmenter, std::span<const Sample> samples,
                               const SamplerConfig& sampler, int iterations, std::uint64_t base_seed);

/// Times single-image forwards (batch 1) after discarded warmup runs.
FpsResult fps_benchmark(const SppNet& model, const PreparedInputs& inputs, int n_warmup, int n_timed);

/// Input image with the prediction boundary in red, the ground-truth boundary
/// in green and the prompts as small squares (positive yellow, negative blue).
Image render_overlay(const Image& image, const BinaryMask& pred, const BinaryMask& target,
                     std::span<const PointPrompt> prompts);

void to_json(nlohmann::json& j, const PointPrompt& p);
void to_json(nlohmann::json& j, const ImageScore& s);
void to_json(nlohmann::json& j, const EvalReport& r);
void to_json(nlohmann::json& j, const StabilityReport& r);

}  // namespace sppnet
