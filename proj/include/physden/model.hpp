#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "physden/autodiff.hpp"

namespace physden {

inline constexpr std::array<Index, 4> kKernelSizes{7, 5, 3, 3};

using Widths = std::array<Index, 3>;
inline constexpr Widths kDefaultWidths{128, 256, 128};

/// Weights and biases of the four-layer 1-D convolutional denoiser.
/// tensors is laid out as {w0, b0, w1, b1, w2, b2, w3, b3}.
struct ModelParams {
  Index channels = 0;
  Widths widths{};
  std::vector<Tensord> tensors;

  Tensord& weight(std::size_t layer) { return tensors.at(2 * layer); }
  const Tensord& weight(std::size_t layer) const { return tensors.at(2 * layer); }
  Tensord& bias(std::size_t layer) { return tensors.at(2 * layer + 1); }
  const Tensord& bias(std::size_t layer) const { return tensors.at(2 * layer + 1); }

  Index parameter_count() const;
  /// Throws DimensionError when shapes disagree with channels, widths or kernel sizes.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Fan-in scaled uniform weights U(-1/sqrt(Cin K), 1/sqrt(Cin K)), zero biases.
ModelParams init_params(Index channels, Widths widths, std::uint64_t seed);

Index parameter_count(Index channels, Widths widths);

/// Model parameters recorded as trainable leaves on a tape.
struct BoundParams {
  std::array<Var64, 8> vars;
};

BoundParams bind(Tape64& tape, const ModelParams& params, bool requires_grad = true);

/// conv7 -> relu -> conv5 -> relu -> conv3 -> relu -> conv3. With `residual`
/// the network output is added to the input.
Var64 forward(const BoundParams& params, const Var64& input, bool residual = false);

/// Tape-free forward for inference.
RowMatrixd forward_values(const ModelParams& params, const RowMatrixd& input, bool residual = false);

/// Per-channel z-score statistics.
struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  /// Population mean/std over all timesteps of all blocks (each c x T).
  static NormStats fit(const std::vector<RowMatrixd>& blocks);
  static NormStats identity(Index channels);

  RowMatrixd normalize(const RowMatrixd& physical) const;
  RowMatrixd denormalize(const RowMatrixd& normalized) const;

  friend bool operator==(const NormStats& a, const NormStats& b) {
    return a.mean.size() == b.mean.size() && a.std.size() == b.std.size() &&
           (a.mean.array() == b.mean.array()).all() && (a.std.array() == b.std.array()).all();
  }
};

/// Everything needed to denoise a window: parameters, normalization and channel layout.
struct Denoiser {
  ModelParams params;
  NormStats norm;
  std::vector<std::string> channels;
  bool residual = false;

  /// Physical c x T signal in, physical c x T denoised signal out.
  RowMatrixd apply(const RowMatrixd& physical) const;

  friend bool operator==(const Denoiser&, const Denoiser&) = default;
};

/// Text checkpoint; every double is stored in hexadecimal floating point,
/// so a write/read round trip is bit-exact.
void write_checkpoint(const Denoiser& model, std::ostream& os);
void write_checkpoint(const Denoiser& model, const std::filesystem::path& path);
Denoiser read_checkpoint(std::istream& is);
Denoiser read_checkpoint(const std::filesystem::path& path);

}  // namespace physden
