#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "physden/window.hpp"

namespace physden {

enum class NoiseKind { Gaussian, Uniform, ZeroMask };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

/// scale is a fraction of the per-channel standard deviation: the Gaussian
/// std or the uniform half-width. mask_fraction applies to ZeroMask only.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Gaussian;
  double scale = 0.1;
  double mask_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Population standard deviation of each row.
Eigen::VectorXd channel_std(const RowMatrixd& values);

/// Corrupts every row of `values` in place. reference_std[r] sets the scale of row r.
void apply_noise(Eigen::Ref<RowMatrixd> values, const NoiseSpec& spec, const Eigen::VectorXd& reference_std,
                 std::mt19937_64& rng);

/// Returns a copy of `window` with noise added to `channels` (all when
/// empty). Scales come from `reference_std`, or the window's own
/// per-channel std when that is empty.
SampleWindow inject_noise(const SampleWindow& window, const NoiseSpec& spec, std::mt19937_64& rng,
                          const std::vector<std::string>& channels = {}, const Eigen::VectorXd& reference_std = {});

/// Observed data Y = X + eps + bias: noise per `inherent` (seeded from
/// inherent.seed) plus a constant per-channel bias on `channels`.
SampleWindow corrupt(const SampleWindow& clean, const NoiseSpec& inherent, const Eigen::VectorXd& bias,
                     const std::vector<std::string>& channels = {}, const Eigen::VectorXd& reference_std = {});

}  // namespace physden
