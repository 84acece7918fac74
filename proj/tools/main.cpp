#include <CLI11.hpp>

#include <exception>
#include <functional>
#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace sppnet::cli;
  CLI::App app{"Single-point prompt nuclei segmentation"};
  app.require_subcommand(1);
  Options opts;
  std::uint64_t seed = 0;
  std::string checkpoint;
  int iterations = 0;
  std::string output;

  std::function<int(const Options&, std::ostream&)> selected;
  auto add = [&](const char* name, const char* help, auto fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override every seed in the config");
    sub->add_option("--output", output, "Output directory (default from config)");
    sub->callback([&selected, fn] { selected = fn; });
    return sub;
  };

  add("train", "Train and write checkpoint + epoch log", cmd_train);
  for (auto [name, help, fn] : {std::tuple{"eval", "Evaluate the test split", cmd_eval},
                                std::tuple{"stability", "Repeated evaluation with fresh prompts", cmd_stability}}) {
    CLI::App* sub = add(name, help, fn);
    sub->add_option("--checkpoint", checkpoint, "Checkpoint (default <output>/checkpoint.sppnet)");
    sub->add_flag("--oracle", opts.oracle, "Use the ground-truth oracle instead of a model");
    if (std::string(name) == "eval") sub->add_flag("--fps", opts.measure_fps, "Measure frames per second");
    if (std::string(name) == "stability") sub->add_option("--iterations", iterations, "Iterations (default 500)");
  }
  CLI::App* sp = add("sample-points", "Draw prompt pairs for one image", cmd_sample_points);
  sp->add_option("--image", opts.image, "Sample id")->required();
  sp->add_option("--n", opts.n, "Number of prompt pairs");
  add("info", "Parameter and FLOP table per submodule", cmd_info);
  CLI::App* ab = add("ablate", "Block and sampling ablation", cmd_ablate);
  ab->add_flag("--accounting-only", opts.accounting_only, "Skip training; report params and FLOPs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  for (CLI::App* sub : app.get_subcommands()) {
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--output")) opts.output = output;
    if (sub->get_option_no_throw("--checkpoint") && sub->count("--checkpoint")) opts.checkpoint = checkpoint;
    if (sub->get_option_no_throw("--iterations") && sub->count("--iterations")) opts.iterations = iterations;
  }
  try {
    return selected(opts, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
