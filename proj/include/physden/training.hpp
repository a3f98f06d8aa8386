#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "physden/dataset.hpp"
#include "physden/model.hpp"
#include "physden/noise.hpp"
#include "physden/physics.hpp"

namespace physden {

inline constexpr double kLambdaMin = 1e-8;
inline constexpr double kLambdaMax = 1e8;

enum class LambdaMode { Adaptive, Fixed };

struct LambdaSetting {
  LambdaMode mode = LambdaMode::Adaptive;
  double value = 0.0;  // used when mode == Fixed

  static LambdaSetting adaptive() { return {}; }
  static LambdaSetting fixed(double value) { return {LambdaMode::Fixed, value}; }
};

/// "adaptive" or a number.
LambdaSetting parse_lambda(const std::string& text);
std::string to_string(const LambdaSetting& setting);

/// l_rec / l_phy clamped to [kLambdaMin, kLambdaMax]; l_phy == 0 gives kLambdaMax.
double balance_lambda(double l_rec, double l_phy);

struct LossTerms {
  double total = 0;
  double l_rec = 0;
  double l_phy = 0;
  double lambda = 0;
};

/// Value of l_rec + lambda l_phy for a denoised window against its target,
/// with l_rec the MSE over the spec's signal channels.
LossTerms combined_loss(const SampleWindow& denoised, const SampleWindow& target, const PhysicsSpec& spec,
                        const LambdaSetting& lambda);

struct TrainConfig {
  double lr = 1e-4;
  Index batch_size = 16;
  int epochs = 30;
  double pretrain_fraction = 0.2;
  LambdaSetting lambda;
  NoiseSpec noise{NoiseKind::Gaussian, 0.1, 0.0, 0};
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> model_seed;  // initialization seed, `seed` when unset
  bool deterministic = true;
  int threads = 1;
  Widths widths = kDefaultWidths;
  bool residual = false;

  void validate() const;
  int pretrain_epochs() const;
};

struct LogRow {
  int epoch = 0;
  long iter = 0;
  int phase = 1;
  double l_rec = 0;
  std::optional<double> l_phy;
  std::optional<double> lambda;
  double total = 0;
};

struct TrainingLog {
  std::vector<LogRow> rows;

  /// Columns epoch,iter,phase,l_rec,l_phy,lambda,total; absent values are empty.
  void write_csv(std::ostream& os) const;
  void write_csv(const std::filesystem::path& path) const;
  /// Mean of `total` over the iterations of epochs [first, last).
  double mean_total(int first_epoch, int last_epoch) const;
};

struct TrainResult {
  Denoiser model;
  TrainingLog log;
};

/// Raised when a loss or gradient turns non-finite; carries the parameters
/// from before the failing step.
struct TrainingAborted : NumericalError {
  TrainingAborted(const std::string& what, Denoiser last_good, TrainingLog log)
      : NumericalError(what), last_good(std::move(last_good)), log(std::move(log)) {}
  Denoiser last_good;
  TrainingLog log;
};

/// Two-phase training on dataset.split.train: epochs before
/// pretrain_epochs() minimize the reconstruction loss of Y from Y + n only,
/// later epochs add lambda times the physics loss of the de-normalized
/// output. Needs prepare() (split and normalization) to have run.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg);

/// Runs `model` over every window and returns copies with signal channels replaced.
std::vector<SampleWindow> denoise_windows(const Denoiser& model, const std::vector<SampleWindow>& windows);

struct BiasDemoConfig {
  double eta = 0.5;             // inherent-noise mean, in units of the clean channel std
  double noise_fraction = 0.2;  // inherent-noise std, same units
  Index windows = 64;           // per half: training and evaluation sets
  Index steps = 128;
  double dt = 60.0;
  std::uint64_t seed = 7;
  TrainConfig train = [] {
    TrainConfig t;
    t.widths = {16, 32, 16};
    t.lr = 3e-3;
    t.epochs = 60;
    t.seed = 7;
    t.residual = true;
    return t;
  }();
};

struct BiasEstimate {
  double mean = 0;    // mean of f(Y) - X over evaluation windows
  double std_error = 0;  // standard error over per-window means
};

struct BiasReport {
  double clean_std = 0;
  double eta = 0;  // absolute
  BiasEstimate rec_only;
  BiasEstimate physics;
};

/// Single-channel room CO2 data with inherent noise of mean eta, denoised by
/// a rec-only model and a physics-informed model trained identically.
BiasReport bias_demo(const BiasDemoConfig& cfg);

}  // namespace physden
