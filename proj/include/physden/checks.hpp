#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace physden {

struct GradientSuiteEntry {
  std::string operation;
  int instances = 0;
  double worst_error = 0;  // largest norm-wise relative error seen
  bool passed = false;
};

/// Finite-difference checks of every differentiable operation (conv1d,
/// relu, mse, the four residuals, the full model) on `instances` random
/// small problems each.
std::vector<GradientSuiteEntry> run_gradient_suite(int instances = 20, double tolerance = 1e-5,
                                                   std::uint64_t seed = 1);

}  // namespace physden
