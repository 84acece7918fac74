#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>

#include "sppnet/accounting.hpp"
#include "sppnet/checkpoint.hpp"
#include "sppnet/data_io.hpp"
#include "sppnet/errors.hpp"
#include "sppnet/evaluation.hpp"
#include "sppnet/run_config.hpp"
#include "sppnet/training.hpp"

namespace sppnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 11;

RunConfig load_config(const Options& opts) {
  RunConfig rc = load_run_config(opts.config);
  if (opts.seed) rc.set_seed(*opts.seed);
  if (opts.output) rc.output = fs::absolute(*opts.output).lexically_normal();
  fs::create_directories(rc.output);
  return rc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::vector<Sample> select(const std::vector<Sample>& all, const std::vector<std::string>& ids) {
  std::map<std::string, const Sample*> by_id;
  for (const Sample& s : all) by_id[s.id] = &s;
  std::vector<Sample> out;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw FormatError("sample " + id + " is not in the dataset");
    out.push_back(*it->second);
  }
  return out;
}

std::vector<std::string> ids_of(const std::vector<Sample>& samples) {
  std::vector<std::string> ids;
  for (const Sample& s : samples) ids.push_back(s.id);
  return ids;
}

struct TrainedModel {
  SppNet model;
  NormalizationStats stats;
  DatasetSplit split;
  TrainResult result;
};

// Split, normalize on the training split, train, and stream the epoch log.
TrainedModel train_model(const RunConfig& rc, const ModelConfig& model_cfg, const SamplerConfig& sampler,
                         const std::vector<Sample>& dataset, const fs::path& log_path, std::ostream& log) {
  DatasetSplit split = split_dataset(ids_of(dataset), rc.train.split, rc.train.seed);
  const auto train_set = select(dataset, split.train);
  const auto val_set = select(dataset, split.val);
  const NormalizationStats stats = compute_normalization(train_set);
  SppNet model(model_cfg, derive_seed(rc.train.seed, {kInitStream}));
  std::ofstream log_file(log_path, std::ios::binary);
  if (!log_file) throw FormatError("cannot write " + log_path.string());
  log << "training " << to_string(model_cfg.block_kind) << " on " << train_set.size() << " images, validating on "
      << val_set.size() << "\n";
  TrainResult result = train_loop(model, train_set, val_set, stats, rc.train, sampler, [&](const EpochRecord& r) {
    log_file << json(r).dump() << "\n";
    log_file.flush();
    log << "epoch " << r.epoch << " loss " << r.train_loss << " val_dsc " << r.val_dsc << "\n";
  });
  return {std::move(model), stats, std::move(split), std::move(result)};
}

json checkpoint_extra(const RunConfig& rc, const SamplerConfig& sampler, const TrainedModel& t) {
  return json{{"normalization", t.stats},
              {"split", t.split},
              {"train", rc.train},
              {"sampler", sampler},
              {"best_epoch", t.result.state.best_epoch},
              {"best_val_dsc", t.result.state.best_val_dsc}};
}

fs::path checkpoint_path(const Options& opts, const RunConfig& rc) {
  return opts.checkpoint ? fs::absolute(*opts.checkpoint) : rc.output / kCheckpointFile;
}

struct LoadedModel {
  SppNet model;
  NormalizationStats stats;
  std::vector<std::string> test_ids;
};

LoadedModel load_model(const fs::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  SppNet model(ckpt.config);
  load_parameters(model.parameters(), ckpt);
  LoadedModel out{std::move(model), {}, {}};
  try {
    out.stats = ckpt.extra.at("normalization").get<NormalizationStats>();
    out.test_ids = ckpt.extra.at("split").get<DatasetSplit>().test;
  } catch (const json::exception& e) {
    throw FormatError("checkpoint " + path.string() + " lacks training metadata: " + e.what());
  }
  return out;
}

// Test split for an oracle run: same split rule as training.
std::vector<Sample> oracle_test_set(const RunConfig& rc, const std::vector<Sample>& dataset) {
  return select(dataset, split_dataset(ids_of(dataset), rc.train.split, rc.train.seed).test);
}

std::int64_t submodule_params(const ArchitectureSpec& spec, const std::string& submodule) {
  for (const auto& row : cost_by_submodule(spec))
    if (row.submodule == submodule) return row.params;
  return 0;
}

}  // namespace

int cmd_train(const Options& opts, std::ostream& log) {
  const RunConfig rc = load_config(opts);
  const auto dataset = load_dataset(rc.dataset);
  const TrainedModel t = train_model(rc, rc.model, rc.sampler, dataset, rc.output / kTrainLogFile, log);
  const fs::path ckpt = rc.output / kCheckpointFile;
  write_checkpoint(ckpt, rc.model, t.model.parameters(), checkpoint_extra(rc, rc.sampler, t));
  log << "best epoch " << t.result.state.best_epoch << " val_dsc " << t.result.state.best_val_dsc << "; wrote "
      << ckpt.string() << "\n";
  return 0;
}

int cmd_eval(const Options& opts, std::ostream& log) {
  const RunConfig rc = load_config(opts);
  const auto dataset = load_dataset(rc.dataset);
  EvalReport report;
  if (opts.oracle) {
    const auto test = oracle_test_set(rc, dataset);
    report = evaluate(OracleSegmenter{}, test, rc.sampler, rc.sampler.seed);
  } else {
    const LoadedModel m = load_model(checkpoint_path(opts, rc));
    const auto test = select(dataset, m.test_ids);
    const SppNetSegmenter segmenter(m.model, m.stats);
    report = evaluate(segmenter, test, rc.sampler, rc.sampler.seed);
    report.params_total = count_params(m.model);
    report.flops_total = estimate_flops(m.model);
    if (opts.measure_fps) {
      const PreparedInputs in = prepare_inputs(test.front(), m.model.config(), m.stats);
      report.fps = fps_benchmark(m.model, in, rc.eval.fps_warmup, rc.eval.fps_timed).fps;
    }
    if (rc.eval.write_overlays) {
      fs::create_directories(rc.output / "overlays");
      for (std::size_t i = 0; i < test.size(); ++i) {
        const PromptPair& p = report.per_image[i].prompts;
        const PointPrompt points[2] = {p.positive, p.negative};
        const Image overlay =
            render_overlay(test[i].image, segmenter.segment(test[i], p), test[i].instances.foreground(), points);
        write_rgb_png(rc.output / "overlays" / (test[i].id + ".png"), overlay);
      }
    }
  }
  write_json(rc.output / kEvalReportFile, report);
  log << std::fixed << std::setprecision(4) << "mIoU " << report.miou_mean << " +- " << report.miou_std << "  DSC "
      << report.dsc_mean << " +- " << report.dsc_std << " over " << report.per_image.size() << " images\n";
  if (report.fps) log << std::setprecision(1) << "fps " << *report.fps << "\n";
  return 0;
}

int cmd_stability(const Options& opts, std::ostream& log) {
  const RunConfig rc = load_config(opts);
  const int iterations = opts.iterations.value_or(rc.eval.iterations);
  const auto dataset = load_dataset(rc.dataset);
  StabilityReport report;
  if (opts.oracle) {
    report = stability_eval(OracleSegmenter{}, oracle_test_set(rc, dataset), rc.sampler, iterations, rc.sampler.seed);
  } else {
    const LoadedModel m = load_model(checkpoint_path(opts, rc));
    const auto test = select(dataset, m.test_ids);
    report = stability_eval(SppNetSegmenter(m.model, m.stats), test, rc.sampler, iterations, rc.sampler.seed);
  }
  write_json(rc.output / kStabilityReportFile, report);
  log << std::setprecision(6) << "DSC over " << iterations << " iterations: min " << report.min << " max "
      << report.max << " mean " << report.mean << " std " << report.std << "\n";
  return 0;
}

int cmd_sample_points(const Options& opts, std::ostream& log) {
  const RunConfig rc = load_config(opts);
  if (opts.image.empty()) throw ConfigError("sample-points needs --image ID");
  if (opts.n < 1) throw ConfigError("--n must be >= 1");
  const auto dataset = load_dataset(rc.dataset);
  const Sample sample = select(dataset, {opts.image}).front();
  json points = json::array();
  std::vector<PointPrompt> drawn;
  for (int i = 0; i < opts.n; ++i) {
    Rng rng(derive_seed(rc.sampler.seed, {static_cast<std::uint64_t>(i)}));
    const PositiveSample pos = sample_positive_point(sample.instances, rc.sampler, rng);
    const PointPrompt neg = sample_negative_point(sample.instances, rng);
    points.push_back({{"x", pos.point.x},
                      {"y", pos.point.y},
                      {"label", 1},
                      {"instance_id", pos.instance_id},
                      {"center_x", pos.center.x},
                      {"center_y", pos.center.y}});
    points.push_back({{"x", neg.x}, {"y", neg.y}, {"label", 0}, {"instance_id", 0}});
    drawn.push_back(pos.point);
    drawn.push_back(neg);
  }
  const json doc{{"image", sample.id},
                 {"seed", rc.sampler.seed},
                 {"half_width", rc.sampler.half_width},
                 {"sigma", rc.sampler.sigma},
                 {"points", points}};
  const fs::path stem = rc.output / ("points_" + sample.id);
  write_json(stem.string() + ".json", doc);
  const BinaryMask fg = sample.instances.foreground();
  const BinaryMask none(fg.height(), fg.width(), 0);
  write_rgb_png(stem.string() + ".png", render_overlay(sample.image, none, fg, drawn));
  log << "wrote " << opts.n << " prompt pairs for " << sample.id << "\n";
  return 0;
}

int cmd_info(const Options& opts, std::ostream& log) {
  const RunConfig rc = load_config(opts);
  const SppNet model(rc.model);
  const ArchitectureSpec spec = model.describe();
  const auto rows = cost_by_submodule(spec);
  const json doc{{"model", rc.model},
                 {"submodules", rows},
                 {"params_total", count_params(spec)},
                 {"flops_total", estimate_flops(spec)}};
  write_json(rc.output / kInfoFile, doc);
  log << std::left << std::setw(16) << "submodule" << std::right << std::setw(14) << "params" << std::setw(18)
      << "flops" << "\n";
  for (const auto& r : rows) {
    log << std::left << std::setw(16) << r.submodule << std::right << std::setw(14) << r.params << std::setw(18)
        << r.flops << "\n";
  }
  log << std::left << std::setw(16) << "total" << std::right << std::setw(14) << doc["params_total"].get<std::int64_t>()
      << std::setw(18) << doc["flops_total"].get<std::int64_t>() << "\n";
  return 0;
}

int cmd_ablate(const Options& opts, std::ostream& log) {
  const RunConfig rc = load_config(opts);
  struct Variant {
    std::string name;
    BlockKind block;
    bool center_only;
  };
  const std::vector<Variant> variants = {{"llsie+cnps", BlockKind::kLlsie, false},
                                         {"unet_block+cnps", BlockKind::kUNet, false},
                                         {"stem_block+cnps", BlockKind::kStem, false},
                                         {"llsie+center_only", BlockKind::kLlsie, true}};
  std::vector<Sample> dataset;
  if (!opts.accounting_only) dataset = load_dataset(rc.dataset);
  json rows = json::array();
  for (const Variant& v : variants) {
    ModelConfig mc = rc.model;
    mc.block_kind = v.block;
    SamplerConfig sampler = rc.sampler;
    if (v.center_only) sampler.half_width = 0;
    const SppNet probe(mc);
    const ArchitectureSpec spec = probe.describe();
    json row{{"variant", v.name},
             {"block_kind", to_string(v.block)},
             {"sampling", v.center_only ? "center_only" : "cnps"},
             {"half_width", sampler.half_width},
             {"params_total", count_params(spec)},
             {"params_block", submodule_params(spec, "block")},
             {"flops_total", estimate_flops(spec)}};
    if (!opts.accounting_only) {
      const fs::path dir = rc.output / v.name;
      fs::create_directories(dir);
      const TrainedModel t = train_model(rc, mc, sampler, dataset, dir / kTrainLogFile, log);
      write_checkpoint(dir / kCheckpointFile, mc, t.model.parameters(), checkpoint_extra(rc, sampler, t));
      const auto test = select(dataset, t.split.test);
      const EvalReport report = evaluate(SppNetSegmenter(t.model, t.stats), test, sampler, rc.sampler.seed);
      row["miou_mean"] = report.miou_mean;
      row["miou_std"] = report.miou_std;
      row["dsc_mean"] = report.dsc_mean;
      row["dsc_std"] = report.dsc_std;
      row["best_val_dsc"] = t.result.state.best_val_dsc;
    }
    log << v.name << ": params " << row["params_total"].get<std::int64_t>();
    if (row.contains("dsc_mean")) log << " DSC " << row["dsc_mean"].get<double>();
    log << "\n";
    rows.push_back(std::move(row));
  }
  write_json(rc.output / kAblationReportFile, json{{"seed", rc.train.seed}, {"variants", rows}});
  return 0;
}

}  // namespace sppnet::cli
