#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "physden/config.hpp"
#include "physden/model.hpp"
#include "physden/training.hpp"

namespace physden {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2 };

/// <output>/<YYYYmmdd-HHMMSS>-seed<seed>, or `override` when given. Created on return.
std::filesystem::path make_run_dir(const RunConfig& config, const std::optional<std::filesystem::path>& override);

/// Writes clean/noisy CSV pairs and a manifest under run_dir/data, then
/// checks the clean windows against their own physics.
int cmd_simulate(const RunConfig& config, const std::filesystem::path& run_dir, std::ostream& out);

/// Split, normalization and two-phase training on data.manifest; writes
/// model.ckpt, train_log.csv and split.csv into run_dir.
int cmd_train(const RunConfig& config, const std::filesystem::path& run_dir, std::ostream& out);

struct DenoiseOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path input;
  std::filesystem::path output;
  int bench_repeats = 0;  // > 0 times that many forward passes
};

int cmd_denoise(const DenoiseOptions& options, std::ostream& out);

/// Mean wall-clock milliseconds of model.apply over `repeats` runs.
double denoise_latency_ms(const Denoiser& model, const RowMatrixd& input, int repeats);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path output_dir;
  std::string subset = "all";  // all | train | test (alignment split of the manifest)
};

/// Writes report.csv and report_breakdown.csv for the original and denoised windows.
int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);

int cmd_gradcheck(int instances, double tolerance, std::uint64_t seed, std::ostream& out);

/// Prints the bias report; nonzero when the expected pattern is not observed.
int cmd_bias_demo(const BiasDemoConfig& config, std::ostream& out);

}  // namespace physden
