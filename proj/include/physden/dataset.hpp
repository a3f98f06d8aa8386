#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "physden/model.hpp"
#include "physden/noise.hpp"
#include "physden/physics.hpp"
#include "physden/simulate.hpp"

namespace physden {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Observed windows, optional clean references, the physics that applies
/// to them, and (once computed) the split and normalization.
struct Dataset {
  PhysicsSpec spec;
  std::vector<SampleWindow> windows;
  std::vector<SampleWindow> clean;  // empty when no references exist
  Split split;
  NormStats norm;

  bool has_clean() const { return !clean.empty(); }
  std::size_t size() const { return windows.size(); }
  /// Signal-channel blocks (physical units) of the given windows.
  std::vector<RowMatrixd> signal_blocks(const std::vector<std::size_t>& indices, bool use_clean = false) const;
};

/// a_i = sum of squared residual entries of each window.
std::vector<double> alignment_scores(const std::vector<SampleWindow>& windows, const PhysicsSpec& spec);

/// Train gets the ceil(N/2) smallest scores, ties going to the lower index.
Split split_by_alignment(const std::vector<double>& scores);
Split split_by_alignment(const std::vector<SampleWindow>& windows, const PhysicsSpec& spec);

/// Splits on the observed windows and fits normalization on the train part.
void prepare(Dataset& dataset);

struct SimulationConfig {
  PhysicsFamily family = PhysicsFamily::Ins;
  Index windows = 64;
  Index steps = 128;
  double dt = 0.1;  // INS default; CO2/HVAC configs usually use 60 s
  std::uint64_t seed = 7;
  MotionParams motion;
  InsEnvironment ins;  // gravity for INS data; dt comes from `dt`
  Co2SimConfig co2;
  HvacSimConfig hvac;
  NoiseSpec inherent{NoiseKind::Gaussian, 0.2, 0.0, 0};
  double bias_fraction = 0.0;  // constant bias per channel, in units of channel std
};

/// Physics spec matching the simulator output of `cfg`.
PhysicsSpec simulated_spec(const SimulationConfig& cfg);

/// Clean windows from the family simulator and their corrupted observations.
/// Noise and bias scales use the per-channel std pooled over all clean windows.
Dataset simulate_dataset(const SimulationConfig& cfg);

/// Writes window CSVs and a manifest into `dir`; returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Reads a manifest: [dataset] family, windows; [physics] constants;
/// [channels] role = channel; [window_NNNN] noisy = path, clean = path.
/// Paths are relative to the manifest.
Dataset read_manifest(const std::filesystem::path& path);

}  // namespace physden
