#include "sppnet/run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "sppnet/errors.hpp"

namespace sppnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + " must be an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + section);
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
  if (aug_probability < 0.0 || aug_probability > 1.0) throw ConfigError("aug_probability must be in [0, 1]");
  if (!(cutout_fraction > 0.0) || cutout_fraction > 1.0) throw ConfigError("cutout_fraction must be in (0, 1]");
  double total = 0.0;
  for (double f : split) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

void to_json(json& j, const TrainConfig& cfg) {
  j = json{{"learning_rate", cfg.learning_rate},     {"batch_size", cfg.batch_size},
           {"max_epochs", cfg.max_epochs},           {"early_stop_patience", cfg.early_stop_patience},
           {"aug_probability", cfg.aug_probability}, {"cutout_fraction", cfg.cutout_fraction},
           {"split", cfg.split},                     {"seed", cfg.seed}};
}

void from_json(const json& j, TrainConfig& cfg) {
  reject_unknown(j,
                 {"learning_rate", "batch_size", "max_epochs", "early_stop_patience", "aug_probability",
                  "cutout_fraction", "split", "seed"},
                 "train");
  read_opt(j, "learning_rate", cfg.learning_rate);
  read_opt(j, "batch_size", cfg.batch_size);
  read_opt(j, "max_epochs", cfg.max_epochs);
  read_opt(j, "early_stop_patience", cfg.early_stop_patience);
  read_opt(j, "aug_probability", cfg.aug_probability);
  read_opt(j, "cutout_fraction", cfg.cutout_fraction);
  read_opt(j, "split", cfg.split);
  read_opt(j, "seed", cfg.seed);
}

void to_json(json& j, const SamplerConfig& cfg) {
  j = json{{"half_width", cfg.half_width},
           {"sigma", cfg.sigma},
           {"seed", cfg.seed},
           {"require_inside_instance", cfg.require_inside_instance}};
}

void from_json(const json& j, SamplerConfig& cfg) {
  reject_unknown(j, {"half_width", "sigma", "seed", "require_inside_instance"}, "sampler");
  read_opt(j, "half_width", cfg.half_width);
  read_opt(j, "sigma", cfg.sigma);
  read_opt(j, "seed", cfg.seed);
  read_opt(j, "require_inside_instance", cfg.require_inside_instance);
}

void to_json(json& j, const EvalConfig& cfg) {
  j = json{{"iterations", cfg.iterations},
           {"fps_warmup", cfg.fps_warmup},
           {"fps_timed", cfg.fps_timed},
           {"write_overlays", cfg.write_overlays}};
}

void from_json(const json& j, EvalConfig& cfg) {
  reject_unknown(j, {"iterations", "fps_warmup", "fps_timed", "write_overlays"}, "eval");
  read_opt(j, "iterations", cfg.iterations);
  read_opt(j, "fps_warmup", cfg.fps_warmup);
  read_opt(j, "fps_timed", cfg.fps_timed);
  read_opt(j, "write_overlays", cfg.write_overlays);
}

void RunConfig::set_seed(std::uint64_t seed) {
  train.seed = seed;
  sampler.seed = seed;
}

RunConfig parse_run_config(const json& doc, const fs::path& base_dir) {
  reject_unknown(doc, {"dataset", "output", "seed", "model", "train", "sampler", "eval"}, "run config");
  RunConfig rc;
  try {
    if (doc.contains("model")) rc.model = doc.at("model").get<ModelConfig>();
    if (doc.contains("train")) rc.train = doc.at("train").get<TrainConfig>();
    if (doc.contains("sampler")) rc.sampler = doc.at("sampler").get<SamplerConfig>();
    if (doc.contains("eval")) rc.eval = doc.at("eval").get<EvalConfig>();
    if (doc.contains("seed")) rc.set_seed(doc.at("seed").get<std::uint64_t>());
    if (!doc.contains("dataset")) throw ConfigError("run config needs a 'dataset' path");
    rc.dataset = doc.at("dataset").get<std::string>();
    rc.output = doc.contains("output") ? fs::path(doc.at("output").get<std::string>()) : fs::path("output");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  if (rc.dataset.is_relative()) rc.dataset = base_dir / rc.dataset;
  if (rc.output.is_relative()) rc.output = base_dir / rc.output;
  rc.dataset = rc.dataset.lexically_normal();
  rc.output = rc.output.lexically_normal();
  rc.model.validate();
  rc.train.validate();
  rc.sampler.validate();
  if (rc.eval.iterations < 1) throw ConfigError("eval.iterations must be >= 1");
  if (rc.eval.fps_warmup < 0 || rc.eval.fps_timed < 1) throw ConfigError("invalid fps_warmup / fps_timed");
  if (!fs::is_directory(rc.dataset)) throw ConfigError("dataset directory does not exist: " + rc.dataset.string());
  return rc;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc, fs::absolute(path).parent_path());
}

}  // namespace sppnet
