#pragma once

#include <stdexcept>
#include <string>

namespace physden {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UnsupportedKernelError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// NaN/Inf encountered, or a numerical check failed.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A physics spec or environment that does not fit the data it is applied to.
struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace physden
