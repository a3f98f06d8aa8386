#include "physden/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "physden/errors.hpp"

namespace physden {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Uniform: return "uniform";
    case NoiseKind::ZeroMask: return "zero-mask";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "gaussian") return NoiseKind::Gaussian;
  if (name == "uniform") return NoiseKind::Uniform;
  if (name == "zero-mask" || name == "zero_mask" || name == "mask") return NoiseKind::ZeroMask;
  throw ValidationError("unknown noise kind '" + name + "' (expected gaussian, uniform or zero-mask)");
}

void NoiseSpec::validate() const {
  if (!(scale >= 0) || !std::isfinite(scale)) throw ValidationError("noise scale must be a non-negative number");
  if (!(mask_fraction >= 0 && mask_fraction <= 1)) throw ValidationError("noise mask_fraction must lie in [0, 1]");
}

Eigen::VectorXd channel_std(const RowMatrixd& values) {
  const Eigen::VectorXd mean = values.rowwise().mean();
  return ((values.colwise() - mean).rowwise().squaredNorm() / static_cast<double>(values.cols())).cwiseSqrt();
}

void apply_noise(Eigen::Ref<RowMatrixd> values, const NoiseSpec& spec, const Eigen::VectorXd& reference_std,
                 std::mt19937_64& rng) {
  spec.validate();
  if (reference_std.size() != values.rows()) throw DimensionError("noise: reference std does not match channel count");
  const Index len = values.cols();
  switch (spec.kind) {
    case NoiseKind::Gaussian: {
      std::normal_distribution<double> dist(0.0, 1.0);
      for (Index r = 0; r < values.rows(); ++r) {
        const double s = spec.scale * reference_std[r];
        for (Index t = 0; t < len; ++t) values(r, t) += s * dist(rng);
      }
      break;
    }
    case NoiseKind::Uniform: {
      std::uniform_real_distribution<double> dist(-1.0, 1.0);
      for (Index r = 0; r < values.rows(); ++r) {
        const double s = spec.scale * reference_std[r];
        for (Index t = 0; t < len; ++t) values(r, t) += s * dist(rng);
      }
      break;
    }
    case NoiseKind::ZeroMask: {
      const auto masked = static_cast<Index>(std::llround(spec.mask_fraction * static_cast<double>(len)));
      std::vector<Index> order(static_cast<std::size_t>(len));
      for (Index r = 0; r < values.rows(); ++r) {
        std::iota(order.begin(), order.end(), Index{0});
        // Partial Fisher-Yates: the first `masked` entries are a uniform sample.
        for (Index i = 0; i < masked; ++i) {
          std::uniform_int_distribution<Index> pick(i, len - 1);
          std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
          values(r, order[static_cast<std::size_t>(i)]) = 0.0;
        }
      }
      break;
    }
  }
}

namespace {

std::vector<std::string> resolve_channels(const SampleWindow& window, const std::vector<std::string>& channels) {
  return channels.empty() ? window.names : channels;
}

}  // namespace

SampleWindow inject_noise(const SampleWindow& window, const NoiseSpec& spec, std::mt19937_64& rng,
                          const std::vector<std::string>& channels, const Eigen::VectorXd& reference_std) {
  const auto names = resolve_channels(window, channels);
  RowMatrixd block = window.select(names);
  const Eigen::VectorXd scales = reference_std.size() ? reference_std : channel_std(block);
  apply_noise(block, spec, scales, rng);
  SampleWindow out = window;
  out.assign(names, block);
  return out;
}

SampleWindow corrupt(const SampleWindow& clean, const NoiseSpec& inherent, const Eigen::VectorXd& bias,
                     const std::vector<std::string>& channels, const Eigen::VectorXd& reference_std) {
  const auto names = resolve_channels(clean, channels);
  if (bias.size() != 0 && bias.size() != static_cast<Index>(names.size())) {
    throw DimensionError("corrupt: bias has " + std::to_string(bias.size()) + " entries for " +
                         std::to_string(names.size()) + " channels");
  }
  std::mt19937_64 rng(inherent.seed);
  RowMatrixd block = clean.select(names);
  const Eigen::VectorXd scales = reference_std.size() ? reference_std : channel_std(block);
  apply_noise(block, inherent, scales, rng);
  if (bias.size()) block.colwise() += bias;
  SampleWindow out = clean;
  out.assign(names, block);
  return out;
}

}  // namespace physden
