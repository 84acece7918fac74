#include "sppnet/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "sppnet/errors.hpp"

namespace sppnet {

const ImageFeatures& SppNetSegmenter::features(const Sample& sample) const {
  auto it = cache_.find(sample.id);
  if (it != cache_.end()) return it->second;
  NoGradGuard no_grad;
  const ModelConfig& cfg = model_->config();
  ImageFeatures f = model_->encode_image(Var(resize_and_standardize(sample.image, cfg.encoder_input_size, stats_)),
                                         Var(resize_and_standardize(sample.image, cfg.llsie_input_size, stats_)));
  return cache_.emplace(sample.id, std::move(f)).first->second;
}

Tensor SppNetSegmenter::logits(const Sample& sample, const PromptPair& prompts) const {
  const ImageFeatures& f = features(sample);
  NoGradGuard no_grad;
  const PointPrompt points[2] = {prompts.positive, prompts.negative};
  return model_->decode(f, points, sample.image.size()).value();
}

BinaryMask SppNetSegmenter::segment(const Sample& sample, const PromptPair& prompts) const {
  Tensor out = logits(sample, prompts);
  if (out.dim(0) != 1) throw ShapeError("SppNetSegmenter supports single-class models only");
  return postprocess(out, sample.image.size());
}

BinaryMask OracleSegmenter::segment(const Sample& sample, const PromptPair&) const {
  return sample.instances.foreground();
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

PromptPair evaluation_prompts(const Sample& sample, const SamplerConfig& sampler, std::uint64_t seed,
                              std::size_t index) {
  Rng rng(derive_seed(seed, {index}));
  return sample_prompt_pair(sample.instances, sampler, rng);
}

EvalReport evaluate(const Segmenter& segmenter, std::span<const Sample> samples, const SamplerConfig& sampler,
                    std::uint64_t seed) {
  sampler.validate();
  if (samples.empty()) throw ConfigError("evaluate: empty sample set");
  EvalReport report;
  report.seed = seed;
  std::vector<double> ious;
  std::vector<double> dscs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const PromptPair prompts = evaluation_prompts(s, sampler, seed, i);
    const BinaryMask pred = segmenter.segment(s, prompts);
    const BinaryMask target = s.instances.foreground();
    ImageScore score{s.id, iou(pred, target), dsc(pred, target), prompts};
    ious.push_back(score.iou);
    dscs.push_back(score.dsc);
    report.per_image.push_back(std::move(score));
  }
  std::tie(report.miou_mean, report.miou_std) = mean_std(ious);
  std::tie(report.dsc_mean, report.dsc_std) = mean_std(dscs);
  return report;
}

StabilityReport stability_eval(const Segmenter& segmenter, std::span<const Sample> samples,
                               const SamplerConfig& sampler, int iterations, std::uint64_t base_seed) {
  if (iterations < 1) throw ConfigError("stability_eval: iterations must be >= 1");
  StabilityReport r;
  r.base_seed = base_seed;
  r.iterations = iterations;
  for (int it = 0; it < iterations; ++it) {
    const std::uint64_t seed = derive_seed(base_seed, {static_cast<std::uint64_t>(it)});
    r.dsc_samples.push_back(evaluate(segmenter, samples, sampler, seed).dsc_mean);
  }
  r.min = *std::min_element(r.dsc_samples.begin(), r.dsc_samples.end());
  r.max = *std::max_element(r.dsc_samples.begin(), r.dsc_samples.end());
  std::tie(r.mean, r.std) = mean_std(r.dsc_samples);
  return r;
}

FpsResult fps_benchmark(const SppNet& model, const PreparedInputs& inputs, int n_warmup, int n_timed) {
  if (n_warmup < 0 || n_timed < 1) throw ConfigError("fps_benchmark: need n_warmup >= 0 and n_timed >= 1");
  NoGradGuard no_grad;
  const Var full(inputs.image_full);
  const Var llsie(inputs.image_llsie);
  const ImageSize size = inputs.original_size;
  const PointPrompt points[2] = {{size.width / 2, size.height / 2, PromptLabel::kPositive},
                                 {0, 0, PromptLabel::kNegative}};
  for (int i = 0; i < n_warmup; ++i) postprocess(model.forward(full, llsie, points, size).value(), size);
  std::vector<double> runs;
  for (int i = 0; i < n_timed; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    postprocess(model.forward(full, llsie, points, size).value(), size);
    runs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  FpsResult r;
  for (double s : runs) r.total_seconds += s;
  r.fps = static_cast<double>(n_timed) / r.total_seconds;
  std::sort(runs.begin(), runs.end());
  const std::size_t m = runs.size() / 2;
  const double median = runs.size() % 2 == 1 ? runs[m] : 0.5 * (runs[m - 1] + runs[m]);
  r.median_fps = 1.0 / median;
  return r;
}

namespace {

bool on_boundary(const BinaryMask& m, int y, int x) {
  if (!m(y, x)) return false;
  constexpr int dy[4] = {-1, 1, 0, 0};
  constexpr int dx[4] = {0, 0, -1, 1};
  for (int k = 0; k < 4; ++k) {
    const int ny = y + dy[k];
    const int nx = x + dx[k];
    if (!m.contains(ny, nx) || !m(ny, nx)) return true;
  }
  return false;
}

void paint(Image& img, int y, int x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  img.at(y, x, 0) = r;
  img.at(y, x, 1) = g;
  img.at(y, x, 2) = b;
}

}  // namespace

Image render_overlay(const Image& image, const BinaryMask& pred, const BinaryMask& target,
                     std::span<const PointPrompt> prompts) {
  const ImageSize size = image.size();
  if (pred.size2d() != size || target.size2d() != size) throw ShapeError("render_overlay: mask size mismatch");
  Image out = image;
  for (int y = 0; y < size.height; ++y)
    for (int x = 0; x < size.width; ++x) {
      if (on_boundary(target, y, x)) paint(out, y, x, 0, 255, 0);
      if (on_boundary(pred, y, x)) paint(out, y, x, 255, 0, 0);
    }
  const int r = std::max(1, std::min(size.height, size.width) / 100);
  for (const PointPrompt& p : prompts) {
    const bool pos = p.label == PromptLabel::kPositive;
    for (int y = p.y - r; y <= p.y + r; ++y)
      for (int x = p.x - r; x <= p.x + r; ++x) {
        if (y < 0 || x < 0 || y >= size.height || x >= size.width) continue;
        if (pos) {
          paint(out, y, x, 255, 255, 0);
        } else {
          paint(out, y, x, 0, 128, 255);
        }
      }
  }
  return out;
}

void to_json(nlohmann::json& j, const PointPrompt& p) {
  j = nlohmann::json{{"x", p.x}, {"y", p.y}, {"label", p.label == PromptLabel::kPositive ? 1 : 0}};
}

void to_json(nlohmann::json& j, const ImageScore& s) {
  j = nlohmann::json{{"id", s.id},
                     {"iou", s.iou},
                     {"dsc", s.dsc},
                     {"positive", s.prompts.positive},
                     {"negative", s.prompts.negative}};
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"seed", r.seed},         {"images", r.per_image.size()}, {"miou_mean", r.miou_mean},
                     {"miou_std", r.miou_std}, {"dsc_mean", r.dsc_mean},       {"dsc_std", r.dsc_std},
                     {"params_total", r.params_total}, {"flops_total", r.flops_total},
                     {"per_image", r.per_image}};
  if (r.fps) j["fps"] = *r.fps;
}

void to_json(nlohmann::json& j, const StabilityReport& r) {
  j = nlohmann::json{{"base_seed", r.base_seed}, {"iterations", r.iterations}, {"min", r.min},
                     {"max", r.max},             {"mean", r.mean},             {"std", r.std},
                     {"gap", r.max - r.min},     {"dsc_samples", r.dsc_samples}};
}

}  // namespace sppnet
