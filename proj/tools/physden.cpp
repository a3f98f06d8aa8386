// physden: simulate | train | denoise | eval | gradcheck | bias-demo
#include <iostream>

#include <CLI11.hpp>

#include "physden/commands.hpp"

using namespace physden;

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed denoising of multi-channel sensor time series"};
  app.require_subcommand(1);

  std::optional<std::filesystem::path> config_file, run_dir;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_file, "INI run configuration");
    cmd->add_option("--set", overrides, "override as section.key=value (repeatable)");
    cmd->add_option("--run-dir", run_dir, "write artifacts here instead of <output.dir>/<timestamp>-seed<seed>");
  };

  auto* simulate = app.add_subcommand("simulate", "write simulated clean/noisy windows and a manifest");
  add_config(simulate);
  auto* train = app.add_subcommand("train", "two-phase training on a manifest");
  add_config(train);
  int threads = 0;
  train->add_option("--threads", threads, "worker threads for per-sample gradients (default 1)");

  DenoiseOptions denoise_opts;
  auto* denoise = app.add_subcommand("denoise", "denoise one CSV window with a checkpoint");
  denoise->add_option("--checkpoint", denoise_opts.checkpoint)->required();
  denoise->add_option("--input", denoise_opts.input)->required();
  denoise->add_option("--output", denoise_opts.output)->required();
  denoise->add_option("--bench", denoise_opts.bench_repeats, "also time this many forward passes");

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "reconstruction and physics metrics before and after denoising");
  eval->add_option("--checkpoint", eval_opts.checkpoint)->required();
  eval->add_option("--manifest", eval_opts.manifest)->required();
  eval->add_option("--output", eval_opts.output_dir, "report directory")->required();
  eval->add_option("--subset", eval_opts.subset, "all, train or test")->check(CLI::IsMember({"all", "train", "test"}));

  int gc_instances = 20;
  double gc_tolerance = 1e-5;
  std::uint64_t gc_seed = 1;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every differentiable operation");
  gradcheck->add_option("--instances", gc_instances, "random instances per operation");
  gradcheck->add_option("--tolerance", gc_tolerance, "maximum relative error");
  gradcheck->add_option("--seed", gc_seed);

  BiasDemoConfig bias_cfg;
  auto* bias = app.add_subcommand("bias-demo", "mean output error under biased inherent noise");
  bias->add_option("--eta", bias_cfg.eta, "inherent-noise mean in units of the clean std");
  bias->add_option("--windows", bias_cfg.windows, "training windows (the same number is held out)");
  bias->add_option("--epochs", bias_cfg.train.epochs);
  bias->add_option("--lr", bias_cfg.train.lr);
  bias->add_option("--seed", bias_cfg.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (simulate->parsed() || train->parsed()) {
      if (threads > 0) overrides.push_back("train.threads=" + std::to_string(threads));
      const RunConfig config = RunConfig::load(config_file, overrides);
      const auto dir = make_run_dir(config, run_dir);
      return simulate->parsed() ? cmd_simulate(config, dir, std::cout) : cmd_train(config, dir, std::cout);
    }
    if (denoise->parsed()) return cmd_denoise(denoise_opts, std::cout);
    if (eval->parsed()) return cmd_eval(eval_opts, std::cout, std::cerr);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_instances, gc_tolerance, gc_seed, std::cout);
    if (bias->parsed()) return cmd_bias_demo(bias_cfg, std::cout);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}
