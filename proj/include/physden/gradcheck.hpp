#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "physden/autodiff.hpp"

namespace physden {

struct GradCheckResult {
  double max_relative_error = 0;  // worst over all checked inputs
  std::size_t evaluations = 0;
};

/// Builds a scalar loss on a fresh tape from leaf variables bound to `inputs`.
using ScalarGraph = std::function<Var64(Tape64&, std::span<const Var64>)>;

/// Norm-wise relative error ||a - b|| / max(||a||, ||b||), or ||a - b|| when
/// both vanish below `floor`.
inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-12) {
  const double scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

/// Compares tape gradients of `graph` wrt every input against central
/// finite differences with step `h` (scaled by max(1, |x|)).
inline GradCheckResult gradient_check(const ScalarGraph& graph, const std::vector<Tensord>& inputs, double h = 1e-6) {
  GradCheckResult result;
  std::vector<Tensord> analytic;
  {
    Tape64 tape;
    std::vector<Var64> vars;
    for (const auto& x : inputs) vars.push_back(tape.leaf(x, true));
    Var64 loss = graph(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto evaluate = [&](const std::vector<Tensord>& xs) {
    Tape64 tape;
    std::vector<Var64> vars;
    for (const auto& x : xs) vars.push_back(tape.leaf(x, false));
    ++result.evaluations;
    return graph(tape, vars).value().item();
  };
  std::vector<Tensord> work = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Eigen::VectorXd numeric(inputs[i].size());
    for (Index k = 0; k < inputs[i].size(); ++k) {
      const double x0 = inputs[i][k];
      const double step = h * std::max(1.0, std::abs(x0));
      work[i][k] = x0 + step;
      const double up = evaluate(work);
      work[i][k] = x0 - step;
      const double down = evaluate(work);
      work[i][k] = x0;
      numeric[k] = (up - down) / (2 * step);
    }
    result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic[i].data(), numeric));
  }
  return result;
}

}  // namespace physden
