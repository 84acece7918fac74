#include "sppnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "sppnet/errors.hpp"
#include "sppnet/metrics.hpp"
#include "sppnet/ops.hpp"

namespace sppnet {

namespace {

void check_dice_shapes(const Tensor& probs, const BinaryMask& target) {
  if (probs.rank() != 3 || probs.dim(0) != 1 || probs.dim(1) != target.height() || probs.dim(2) != target.width()) {
    throw ShapeError("dice_loss: prediction " + shape_to_string(probs.shape()) + " does not match target " +
                     std::to_string(target.height()) + "x" + std::to_string(target.width()));
  }
}

struct DiceTerms {
  double intersection = 0.0;
  double pred = 0.0;
  double target = 0.0;
};

DiceTerms dice_terms(const Tensor& probs, const BinaryMask& target) {
  DiceTerms t;
  auto g = target.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double p = probs[i];
    const double gi = g[i] != 0 ? 1.0 : 0.0;
    t.intersection += p * gi;
    t.pred += p;
    t.target += gi;
  }
  return t;
}

template <typename Px>
Grid<Px> flip_grid(const Grid<Px>& in) {
  Grid<Px> out(in.height(), in.width());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x) out(y, in.width() - 1 - x) = in(y, x);
  return out;
}

template <typename Px>
Grid<Px> rotate_grid_cw(const Grid<Px>& in) {
  const int h = in.height();
  const int w = in.width();
  Grid<Px> out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(x, h - 1 - y) = in(y, x);
  return out;
}

Grid<std::array<std::uint8_t, 3>> to_grid(const Image& image) {
  Grid<std::array<std::uint8_t, 3>> g(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) g(y, x) = {image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2)};
  return g;
}

Image from_grid(const Grid<std::array<std::uint8_t, 3>>& g) {
  Image image(g.height(), g.width());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      for (int c = 0; c < 3; ++c) image.at(y, x, c) = g(y, x)[static_cast<std::size_t>(c)];
  return image;
}

int normalize_turns(int quarter_turns) { return ((quarter_turns % 4) + 4) % 4; }

// Seed stream tags for the training loop.
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kValidationStream = 3;

void require_promptable(std::span<const Sample> samples, const char* which) {
  for (const Sample& s : samples) {
    const auto counts = s.instances.pixel_counts();
    if (s.instances.num_instances() == 0) {
      throw SamplingError(std::string(which) + " sample " + s.id + " has no foreground instance");
    }
    if (counts[0] == 0) throw SamplingError(std::string(which) + " sample " + s.id + " has no background pixel");
  }
}

Var forward_sample(const SppNet& model, const PreparedInputs& in, const PromptPair& prompts) {
  const PointPrompt points[2] = {prompts.positive, prompts.negative};
  return model.forward(Var(in.image_full), Var(in.image_llsie), points, in.original_size);
}

}  // namespace

Var dice_loss(const Var& probs, const BinaryMask& target, double eps) {
  check_dice_shapes(probs.value(), target);
  const DiceTerms t = dice_terms(probs.value(), target);
  const double num = 2.0 * t.intersection + eps;
  const double den = t.pred + t.target + eps;
  Tensor value = Tensor::scalar(1.0 - num / den);
  return Var::from_op(std::move(value), {probs}, [probs, target, num, den](const Tensor& g) {
    Tensor grad(probs.shape());
    const double upstream = g[0];
    auto gt = target.values();
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const double gi = gt[i] != 0 ? 1.0 : 0.0;
      grad[i] = upstream * -(2.0 * gi * den - num) / (den * den);
    }
    accumulate_grad(probs.node(), grad);
  });
}

double dice_loss_value(const Tensor& probs, const BinaryMask& target, double eps) {
  check_dice_shapes(probs, target);
  const DiceTerms t = dice_terms(probs, target);
  return 1.0 - (2.0 * t.intersection + eps) / (t.pred + t.target + eps);
}

Image flip_horizontal(const Image& image) { return from_grid(flip_grid(to_grid(image))); }
Grid<int> flip_horizontal(const Grid<int>& labels) { return flip_grid(labels); }

Image rotate_quarter(const Image& image, int quarter_turns) {
  auto g = to_grid(image);
  for (int i = 0; i < normalize_turns(quarter_turns); ++i) g = rotate_grid_cw(g);
  return from_grid(g);
}

Grid<int> rotate_quarter(const Grid<int>& labels, int quarter_turns) {
  Grid<int> g = labels;
  for (int i = 0; i < normalize_turns(quarter_turns); ++i) g = rotate_grid_cw(g);
  return g;
}

Augmented augment(const Image& image, const InstanceLabelMap& instances, const TrainConfig& cfg, Rng& rng) {
  if (image.height != instances.height() || image.width != instances.width()) {
    throw ShapeError("augment: image and mask sizes differ");
  }
  Augmented out;
  out.image = image;
  Grid<int> labels = instances.labels();
  const double p = cfg.aug_probability;
  if (uniform01(rng) < p) {
    out.record.flipped = true;
    out.image = flip_horizontal(out.image);
    labels = flip_horizontal(labels);
  }
  if (uniform01(rng) < p) {
    out.record.quarter_turns = uniform_int(rng, 1, 3);
    out.image = rotate_quarter(out.image, out.record.quarter_turns);
    labels = rotate_quarter(labels, out.record.quarter_turns);
  }
  if (uniform01(rng) < p) {
    const int side = std::max(1, static_cast<int>(std::lround(cfg.cutout_fraction *
                                                                std::min(out.image.height, out.image.width))));
    out.record.cutout = true;
    out.record.cutout_side = side;
    out.record.cutout_y = uniform_int(rng, 0, out.image.height - side);
    out.record.cutout_x = uniform_int(rng, 0, out.image.width - side);
    for (int y = out.record.cutout_y; y < out.record.cutout_y + side; ++y)
      for (int x = out.record.cutout_x; x < out.record.cutout_x + side; ++x)
        for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = 0;
  }
  // Flip and rotation permute pixels, so ids stay contiguous.
  out.instances = InstanceLabelMap(std::move(labels));
  return out;
}

DatasetSplit split_dataset(std::vector<std::string> ids, const std::array<double, 3>& fractions, std::uint64_t seed) {
  const std::size_t n = ids.size();
  if (n < 3) throw ConfigError("split_dataset needs at least 3 samples, got " + std::to_string(n));
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ConfigError("split_dataset: duplicate ids");

  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i)));
    std::swap(ids[i], ids[j]);
  }
  const auto count = [n](double f) { return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9)); };
  const std::size_t n_val = count(fractions[1]);
  const std::size_t n_test = count(fractions[2]);
  DatasetSplit split;
  split.val.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val),
                    ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), ids.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void to_json(nlohmann::json& j, const DatasetSplit& split) {
  j = nlohmann::json{{"train", split.train}, {"val", split.val}, {"test", split.test}};
}

void from_json(const nlohmann::json& j, DatasetSplit& split) {
  j.at("train").get_to(split.train);
  j.at("val").get_to(split.val);
  j.at("test").get_to(split.test);
}

Adam::Adam(ParameterSet& params, double lr, double beta1, double beta2, double eps)
    : params_(&params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params.entries()) {
    m_.emplace_back(p.var.shape(), 0.0);
    v_.emplace_back(p.var.shape(), 0.0);
  }
}

void Adam::step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  auto& entries = params_->entries();
  if (entries.size() != m_.size()) throw ConfigError("Adam: parameter set changed after construction");
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Var var = entries[k].var;
    if (!var.requires_grad()) continue;
    const Tensor& g = var.grad();
    Tensor& w = var.mutable_value();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

bool EarlyStopping::observe(double score) {
  if (!has_best_ || score > best_) {
    has_best_ = true;
    best_ = score;
    since_improvement_ = 0;
    return true;
  }
  ++since_improvement_;
  return false;
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = nlohmann::json{{"epoch", r.epoch}, {"loss", r.train_loss}, {"val_dsc", r.val_dsc}, {"seconds", r.seconds}};
}

double train_step(SppNet& model, Adam& optimizer, std::span<const Sample* const> batch,
                  const NormalizationStats& stats, const TrainConfig& train, const SamplerConfig& sampler,
                  std::uint64_t seed) {
  if (batch.empty()) throw ConfigError("train_step: empty batch");
  if (model.config().num_classes != 1) throw ConfigError("training supports num_classes == 1 only");
  model.parameters().zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Sample& s = *batch[i];
    Rng rng(derive_seed(seed, {i}));
    Augmented aug = augment(s.image, s.instances, train, rng);
    const PromptPair prompts = sample_prompt_pair(aug.instances, sampler, rng);
    const Sample view{s.id, std::move(aug.image), std::move(aug.instances)};
    const PreparedInputs in = prepare_inputs(view, model.config(), stats);
    const Var logits = forward_sample(model, in, prompts);
    const Var loss = dice_loss(ops::sigmoid(logits), in.ground_truth);
    const double value = loss.value()[0];
    if (!std::isfinite(value)) {
      throw DivergenceError("non-finite loss on sample " + s.id + " (step " + std::to_string(optimizer.steps() + 1) +
                            ")");
    }
    total += value;
    ops::scale(loss, inv).backward();
  }
  optimizer.step();
  return total * inv;
}

double validation_dsc(const SppNet& model, std::span<const Sample> samples, const NormalizationStats& stats,
                      const SamplerConfig& sampler, std::uint64_t seed) {
  if (samples.empty()) throw ConfigError("validation set is empty");
  NoGradGuard no_grad;
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng(derive_seed(seed, {i}));
    const PromptPair prompts = sample_prompt_pair(samples[i].instances, sampler, rng);
    const PreparedInputs in = prepare_inputs(samples[i], model.config(), stats);
    const Tensor logits = forward_sample(model, in, prompts).value();
    BinaryMask pred(in.ground_truth.height(), in.ground_truth.width(), 0);
    auto pv = pred.values();
    for (std::size_t k = 0; k < pv.size(); ++k) pv[k] = logits[k] > 0.0 ? 1 : 0;
    total += dsc(pred, in.ground_truth);
  }
  return total / static_cast<double>(samples.size());
}

TrainResult train_loop(SppNet& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                       const NormalizationStats& stats, const TrainConfig& train, const SamplerConfig& sampler,
                       const EpochCallback& on_epoch) {
  train.validate();
  sampler.validate();
  if (train_set.empty() || val_set.empty()) throw ConfigError("train_loop needs nonempty train and validation sets");
  require_promptable(train_set, "training");
  require_promptable(val_set, "validation");

  Adam optimizer(model.parameters(), train.learning_rate);
  EarlyStopping stopper(train.early_stop_patience);
  TrainResult result;
  std::vector<Tensor> best = model.parameters().snapshot();
  std::vector<std::size_t> order(train_set.size());
  const std::uint64_t val_seed = derive_seed(train.seed, {kValidationStream});

  for (int epoch = 1; epoch <= train.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(train.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(uniform_int(shuffle_rng, 0, static_cast<int>(i)))]);
    }
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(train.batch_size)) {
      std::vector<const Sample*> batch;
      for (std::size_t k = b; k < std::min(order.size(), b + static_cast<std::size_t>(train.batch_size)); ++k) {
        batch.push_back(&train_set[order[k]]);
      }
      const std::uint64_t seed =
          derive_seed(train.seed, {kBatchStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)});
      loss_sum += train_step(model, optimizer, batch, stats, train, sampler, seed);
      ++batches;
    }
    const double val = validation_dsc(model, val_set, stats, sampler, val_seed);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EpochRecord record{epoch, loss_sum / batches, val, seconds};
    result.log.push_back(record);
    if (stopper.observe(val)) {
      best = model.parameters().snapshot();
      result.state.best_epoch = epoch;
    }
    result.state.epoch = epoch;
    result.state.best_val_dsc = stopper.best();
    result.state.epochs_since_improvement = stopper.epochs_since_improvement();
    if (on_epoch) on_epoch(record);
    if (stopper.should_stop()) {
      result.stopped_early = epoch < train.max_epochs;
      break;
    }
  }
  model.parameters().restore(best);
  return result;
}

}  // namespace sppnet
