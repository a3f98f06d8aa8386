#include "physden/model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace physden {

namespace {

Index layer_in(Index channels, const Widths& w, std::size_t layer) { return layer == 0 ? channels : w[layer - 1]; }
Index layer_out(Index channels, const Widths& w, std::size_t layer) { return layer == 3 ? channels : w[layer]; }

}  // namespace

Index parameter_count(Index channels, Widths widths) {
  Index total = 0;
  for (std::size_t l = 0; l < 4; ++l) {
    const Index cin = layer_in(channels, widths, l), cout = layer_out(channels, widths, l);
    total += cout * cin * kKernelSizes[l] + cout;
  }
  return total;
}

Index ModelParams::parameter_count() const {
  Index total = 0;
  for (const auto& t : tensors) total += t.size();
  return total;
}

void ModelParams::validate() const {
  if (channels < 1) throw DimensionError("model: channel count must be at least 1");
  for (auto w : widths) {
    if (w < 1) throw DimensionError("model: hidden widths must be at least 1");
  }
  if (tensors.size() != 8) throw DimensionError("model: expected 8 parameter tensors, got " + std::to_string(tensors.size()));
  for (std::size_t l = 0; l < 4; ++l) {
    const Shape ws{layer_out(channels, widths, l), layer_in(channels, widths, l), kKernelSizes[l]};
    const Shape bs{layer_out(channels, widths, l)};
    if (weight(l).shape() != ws || bias(l).shape() != bs) {
      throw DimensionError("model: layer " + std::to_string(l) + " has weight " + shape_string(weight(l).shape()) +
                           " and bias " + shape_string(bias(l).shape()) + ", expected " + shape_string(ws) + " and " +
                           shape_string(bs));
    }
  }
}

ModelParams init_params(Index channels, Widths widths, std::uint64_t seed) {
  ModelParams params;
  params.channels = channels;
  params.widths = widths;
  if (channels < 1) throw DimensionError("model: channel count must be at least 1");
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < 4; ++l) {
    const Index cin = layer_in(channels, widths, l), cout = layer_out(channels, widths, l), k = kKernelSizes[l];
    if (cin < 1 || cout < 1) throw DimensionError("model: hidden widths must be at least 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensord w(Shape{cout, cin, k});
    for (Index i = 0; i < w.size(); ++i) w[i] = dist(rng);
    params.tensors.push_back(std::move(w));
    params.tensors.emplace_back(Shape{cout});
  }
  return params;
}

BoundParams bind(Tape64& tape, const ModelParams& params, bool requires_grad) {
  params.validate();
  BoundParams bound;
  for (std::size_t i = 0; i < 8; ++i) bound.vars[i] = tape.leaf(params.tensors[i], requires_grad);
  return bound;
}

Var64 forward(const BoundParams& p, const Var64& input, bool residual) {
  if (input.value().rank() != 2 || input.rows() != p.vars[0].value().dim(1)) {
    throw DimensionError("model: input " + shape_string(input.shape()) + " does not have " +
                         std::to_string(p.vars[0].value().dim(1)) + " channels");
  }
  Var64 h = relu(conv1d(input, p.vars[0], p.vars[1]));
  h = relu(conv1d(h, p.vars[2], p.vars[3]));
  h = relu(conv1d(h, p.vars[4], p.vars[5]));
  Var64 out = conv1d(h, p.vars[6], p.vars[7]);
  return residual ? out + input : out;
}

RowMatrixd forward_values(const ModelParams& params, const RowMatrixd& input, bool residual) {
  if (input.rows() != params.channels) {
    throw DimensionError("model: input has " + std::to_string(input.rows()) + " channels, model expects " +
                         std::to_string(params.channels));
  }
  Tensord h = Tensord::from_matrix(input);
  for (std::size_t l = 0; l < 4; ++l) {
    RowMatrixd out = conv1d_values(h, params.weight(l), params.bias(l));
    if (l < 3) out = out.cwiseMax(0.0);
    h = Tensord::from_matrix(out);
  }
  RowMatrixd out = h.matrix();
  if (residual) out += input;
  return out;
}

NormStats NormStats::fit(const std::vector<RowMatrixd>& blocks) {
  if (blocks.empty()) throw DimensionError("normalization: no data");
  const Index c = blocks.front().rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(c);
  double count = 0;
  for (const auto& b : blocks) {
    if (b.rows() != c) throw DimensionError("normalization: channel count differs between windows");
    sum += b.rowwise().sum();
    count += static_cast<double>(b.cols());
  }
  NormStats stats;
  stats.mean = sum / count;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(c);
  for (const auto& b : blocks) sq += (b.colwise() - stats.mean).rowwise().squaredNorm();
  stats.std = (sq / count).cwiseSqrt();
  for (Index i = 0; i < c; ++i) {
    // Constant channels are centred but not scaled.
    if (!(stats.std[i] > 1e-12 * std::max(1.0, std::abs(stats.mean[i])))) stats.std[i] = 1.0;
  }
  return stats;
}

NormStats NormStats::identity(Index channels) {
  return {Eigen::VectorXd::Zero(channels), Eigen::VectorXd::Ones(channels)};
}

RowMatrixd NormStats::normalize(const RowMatrixd& physical) const {
  if (physical.rows() != mean.size()) throw DimensionError("normalization: channel count mismatch");
  return (physical.colwise() - mean).array().colwise() / std.array();
}

RowMatrixd NormStats::denormalize(const RowMatrixd& normalized) const {
  if (normalized.rows() != mean.size()) throw DimensionError("normalization: channel count mismatch");
  return (normalized.array().colwise() * std.array()).matrix().colwise() + mean;
}

RowMatrixd Denoiser::apply(const RowMatrixd& physical) const {
  return norm.denormalize(forward_values(params, norm.normalize(physical), residual));
}

// ---- checkpoint ----------------------------------------------------------

namespace {

constexpr const char* kMagic = "physden-checkpoint";
constexpr int kVersion = 1;

void write_values(std::ostream& os, const double* data, Index n) {
  for (Index i = 0; i < n; ++i) os << (i % 8 ? " " : (i ? "\n" : "")) << data[i];
  os << '\n';
}

std::string expect_word(std::istream& is, const std::string& want) {
  std::string got;
  if (!(is >> got) || (!want.empty() && got != want)) {
    throw ParseError("checkpoint: expected '" + want + "', got '" + got + "'");
  }
  return got;
}

template <typename T>
T read_value(std::istream& is, const char* what) {
  T v{};
  if (!(is >> v)) throw ParseError(std::string("checkpoint: could not read ") + what);
  return v;
}

double read_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw ParseError("checkpoint: truncated value list");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw ParseError("checkpoint: bad number '" + tok + "'");
  return v;
}

Eigen::VectorXd read_doubles(std::istream& is, Index n) {
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = read_double(is);
  return v;
}

}  // namespace

void write_checkpoint(const Denoiser& model, std::ostream& os) {
  model.params.validate();
  os << kMagic << ' ' << kVersion << '\n';
  os << "channels " << model.params.channels;
  for (const auto& name : model.channels) os << ' ' << name;
  os << '\n';
  os << "widths " << model.params.widths[0] << ' ' << model.params.widths[1] << ' ' << model.params.widths[2] << '\n';
  os << "residual " << (model.residual ? 1 : 0) << '\n';
  os << std::hexfloat;
  os << "norm_mean\n";
  write_values(os, model.norm.mean.data(), model.norm.mean.size());
  os << "norm_std\n";
  write_values(os, model.norm.std.data(), model.norm.std.size());
  for (std::size_t l = 0; l < 4; ++l) {
    const auto& w = model.params.weight(l);
    os << "weight " << l << ' ' << w.dim(0) << ' ' << w.dim(1) << ' ' << w.dim(2) << '\n';
    write_values(os, w.data().data(), w.size());
    const auto& b = model.params.bias(l);
    os << "bias " << l << ' ' << b.dim(0) << '\n';
    write_values(os, b.data().data(), b.size());
  }
  os << std::defaultfloat << "end\n";
}

void write_checkpoint(const Denoiser& model, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write checkpoint " + path.string());
  write_checkpoint(model, os);
  if (!os) throw ValidationError("error while writing checkpoint " + path.string());
}

Denoiser read_checkpoint(std::istream& is) {
  expect_word(is, kMagic);
  const int version = read_value<int>(is, "version");
  if (version != kVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version));

  Denoiser model;
  expect_word(is, "channels");
  model.params.channels = read_value<Index>(is, "channel count");
  if (model.params.channels < 1) throw ParseError("checkpoint: channel count must be positive");
  for (Index i = 0; i < model.params.channels; ++i) model.channels.push_back(read_value<std::string>(is, "channel name"));
  expect_word(is, "widths");
  for (auto& w : model.params.widths) w = read_value<Index>(is, "width");
  expect_word(is, "residual");
  model.residual = read_value<int>(is, "residual flag") != 0;
  expect_word(is, "norm_mean");
  model.norm.mean = read_doubles(is, model.params.channels);
  expect_word(is, "norm_std");
  model.norm.std = read_doubles(is, model.params.channels);
  for (std::size_t l = 0; l < 4; ++l) {
    expect_word(is, "weight");
    if (read_value<std::size_t>(is, "layer index") != l) throw ParseError("checkpoint: layers out of order");
    Shape ws(3);
    for (auto& d : ws) d = read_value<Index>(is, "weight shape");
    if (ws[0] < 1 || ws[1] < 1 || ws[2] < 1 || ws[0] * ws[1] * ws[2] > (Index{1} << 32)) {
      throw ParseError("checkpoint: implausible weight shape " + shape_string(ws));
    }
    const Index wn = shape_size(ws);
    model.params.tensors.emplace_back(ws, read_doubles(is, wn));
    expect_word(is, "bias");
    if (read_value<std::size_t>(is, "layer index") != l) throw ParseError("checkpoint: layers out of order");
    const Index bn = read_value<Index>(is, "bias shape");
    if (bn < 1 || bn > (Index{1} << 24)) throw ParseError("checkpoint: implausible bias size");
    model.params.tensors.emplace_back(Shape{bn}, read_doubles(is, bn));
  }
  expect_word(is, "end");
  try {
    model.params.validate();
  } catch (const DimensionError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return model;
}

Denoiser read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

}  // namespace physden
