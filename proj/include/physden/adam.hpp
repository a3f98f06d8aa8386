#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "physden/tensor.hpp"

namespace physden {

template <typename Scalar>
struct AdamConfig {
  Scalar lr = Scalar(1e-4);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
};

/// Adam with bias-corrected moments. Moment buffers are created on the
/// first step and must keep matching the parameter shapes afterwards.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamConfig<Scalar> config = {}) : config_(config) {}

  const AdamConfig<Scalar>& config() const { return config_; }
  void set_lr(Scalar lr) { config_.lr = lr; }
  long steps() const { return steps_; }

  void step(std::span<Tensor<Scalar>> params, std::span<const Tensor<Scalar>> grads) {
    if (params.size() != grads.size()) throw DimensionError("adam: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (grads[i].shape() != params[i].shape()) {
        throw DimensionError("adam: gradient " + std::to_string(i) + " has shape " + shape_string(grads[i].shape()) +
                             ", parameter has " + shape_string(params[i].shape()));
      }
      if (!grads[i].all_finite()) {
        Index bad = 0;
        while (std::isfinite(grads[i][bad])) ++bad;
        throw NumericalError("adam: non-finite gradient in parameter tensor " + std::to_string(i) + " at element " +
                             std::to_string(bad) + " (step " + std::to_string(steps_ + 1) + ")");
      }
    }
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Tensor<Scalar>::Vector::Zero(p.size()));
        v_.push_back(Tensor<Scalar>::Vector::Zero(p.size()));
      }
    } else if (m_.size() != params.size()) {
      throw DimensionError("adam: parameter count changed between steps");
    }

    ++steps_;
    const Scalar c1 = 1 - std::pow(config_.beta1, Scalar(steps_));
    const Scalar c2 = 1 - std::pow(config_.beta2, Scalar(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& g = grads[i].data();
      m_[i] = config_.beta1 * m_[i] + (1 - config_.beta1) * g;
      v_[i] = config_.beta2 * v_[i] + (1 - config_.beta2) * g.cwiseAbs2();
      params[i].data().array() -=
          config_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
    }
  }

 private:
  AdamConfig<Scalar> config_;
  long steps_ = 0;
  std::vector<typename Tensor<Scalar>::Vector> m_, v_;
};

}  // namespace physden
