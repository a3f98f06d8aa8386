#pragma once

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

#include "physden/autodiff.hpp"
#include "physden/quaternion.hpp"
#include "physden/window.hpp"

namespace physden {

inline constexpr double kStandardGravity = 9.80665;

enum class PhysicsFamily { Ins, Co2, Hvac };

std::string to_string(PhysicsFamily family);
PhysicsFamily parse_family(const std::string& name);

struct InsEnvironment {
  double dt = 0.01;
  Eigen::Vector3d gravity{0.0, 0.0, -kStandardGravity};  // world frame, m/s^2

  void validate() const;
};

/// Known quantities of the room CO2 balance. Series hold one value per timestep.
struct Co2Environment {
  double room_volume = 50.0;   // m^3
  Eigen::VectorXd flow;        // m^3/s
  Eigen::VectorXd inflow_ppm;  // ppm
  Eigen::VectorXd occupants;   // persons
  double emission_rate = 5.0;  // ppm m^3/s per person
  double initial_ppm = 400.0;
  double dt = 60.0;

  void validate(Index length) const;
  /// Per-step flow volume v * dt, shared by inflow and outflow terms.
  Eigen::VectorXd flow_volume() const;
  /// CO2 mass entering per step: c_in v dt + n q dt.
  Eigen::VectorXd external_mass() const;
};

struct HvacEnvironment {
  Eigen::VectorXd mass_flow;      // kg/s
  Eigen::VectorXd specific_heat;  // J/(kg K)
  double dt = 60.0;

  void validate(Index length) const;
  Eigen::VectorXd heat_capacity_rate() const;  // m c, W/K
};

/// Which residual family applies, which window channels play which role,
/// and the environment constants not carried as channels.
///
/// Environment series (CO2 flow/c_in/occupants/c0, HVAC m_dot/cp) are read
/// from a channel when the role is mapped and the window has it, otherwise
/// from `constants` as a per-window constant.
struct PhysicsSpec {
  PhysicsFamily family = PhysicsFamily::Ins;
  std::map<std::string, std::string> channel_map;
  std::map<std::string, double> constants;

  static PhysicsSpec ins();
  static PhysicsSpec co2(double room_volume, double emission_rate);
  static PhysicsSpec hvac();

  /// Roles whose channels the model denoises, in model row order.
  std::vector<std::string> signal_roles() const;
  std::vector<std::string> signal_channels() const;
  /// Roles that are known environment inputs, never denoised.
  std::vector<std::string> auxiliary_roles() const;

  bool maps(const std::string& role) const { return channel_map.count(role) > 0; }
  const std::string& channel(const std::string& role) const;
  double constant(const std::string& key) const;  // throws SpecError naming the key

  InsEnvironment ins_environment(const SampleWindow& window) const;
  Co2Environment co2_environment(const SampleWindow& window) const;
  HvacEnvironment hvac_environment(const SampleWindow& window) const;
};

std::vector<std::string> ins_channel_names();

// ---- differentiable residuals -------------------------------------------

namespace detail {

template <typename Scalar>
QuaternionT<Var<Scalar>> normalized_rows(const Var<Scalar>& q) {
  if (q.rows() != 4) throw DimensionError("quaternion series must have 4 rows, got " + std::to_string(q.rows()));
  const Var<Scalar> w = row(q, 0), x = row(q, 1), y = row(q, 2), z = row(q, 3);
  const Var<Scalar> n = sqrt(w * w + x * x + y * y + z * z);
  return {w / n, x / n, y / n, z / n};
}

template <typename Scalar>
void require_series(const Var<Scalar>& v, Index rows, Index length, const char* what) {
  if (v.value().rank() != 2 || v.rows() != rows || v.cols() != length) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(length) +
                         ", got " + shape_string(v.shape()));
  }
}

template <typename Scalar, typename Derived>
Var<Scalar> constant_row(Tape<Scalar>& tape, const Eigen::MatrixBase<Derived>& values) {
  typename Tensor<Scalar>::Vector v = values.template cast<Scalar>();
  const Index n = v.size();
  return tape.constant(Tensor<Scalar>(Shape{1, n}, std::move(v)));
}

}  // namespace detail

/// Specific-force residual a - R(q)^T (p'' - g0) on interior timesteps: 3 x (T-2).
template <typename Scalar>
Var<Scalar> residual_ins_accel(const Var<Scalar>& p, const Var<Scalar>& q, const Var<Scalar>& a,
                               const InsEnvironment& env) {
  env.validate();
  const Index len = p.cols();
  detail::require_series(p, 3, len, "residual_ins_accel position");
  detail::require_series(q, 4, len, "residual_ins_accel orientation");
  detail::require_series(a, 3, len, "residual_ins_accel acceleration");

  const auto qn = detail::normalized_rows(q);
  const QuaternionT<Var<Scalar>> qi{interior(qn.w), interior(qn.x), interior(qn.y), interior(qn.z)};
  const Var<Scalar> pdd = time_derivative(p, Scalar(env.dt), 2);
  const std::array<Var<Scalar>, 3> world{row(pdd, 0) - Scalar(env.gravity[0]), row(pdd, 1) - Scalar(env.gravity[1]),
                                         row(pdd, 2) - Scalar(env.gravity[2])};
  const auto body = rotate_to_body(qi, world);
  const Var<Scalar> ai = interior(a);
  return concat_rows<Scalar>({row(ai, 0) - body[0], row(ai, 1) - body[1], row(ai, 2) - body[2]});
}

/// Orientation kinematics residual q' - 1/2 q (x) (0, w) on interior timesteps: 4 x (T-2).
template <typename Scalar>
Var<Scalar> residual_ins_quat(const Var<Scalar>& q, const Var<Scalar>& w, const InsEnvironment& env) {
  env.validate();
  const Index len = q.cols();
  detail::require_series(q, 4, len, "residual_ins_quat orientation");
  detail::require_series(w, 3, len, "residual_ins_quat angular velocity");

  const auto qn = detail::normalized_rows(q);
  const Var<Scalar> qdot = time_derivative(concat_rows<Scalar>({qn.w, qn.x, qn.y, qn.z}), Scalar(env.dt), 1);
  const QuaternionT<Var<Scalar>> qi{interior(qn.w), interior(qn.x), interior(qn.y), interior(qn.z)};
  const Var<Scalar> wi = interior(w);
  const Var<Scalar> zero = detail::constant_row(*q.tape(), Eigen::VectorXd::Zero(len - 2));
  const auto rate = quat_mul(qi, pure(row(wi, 0), row(wi, 1), row(wi, 2), zero));
  return concat_rows<Scalar>({row(qdot, 0) - rate.w * Scalar(0.5), row(qdot, 1) - rate.x * Scalar(0.5),
                              row(qdot, 2) - rate.y * Scalar(0.5), row(qdot, 3) - rate.z * Scalar(0.5)});
}

/// Room CO2 mass balance residual c_t V - (c0 V + sum_{s<t} (c_in v + n q - c_out v) dt): 1 x T.
/// Evaluated as V (c_t - B_t / V) with B_t the bracketed balance, so a series
/// built as c_t = B_t / V gives exactly zero.
template <typename Scalar>
Var<Scalar> residual_co2(const Var<Scalar>& c_room, const Var<Scalar>& c_out, const Co2Environment& env) {
  const Index len = c_room.cols();
  detail::require_series(c_room, 1, len, "residual_co2 room concentration");
  detail::require_series(c_out, 1, len, "residual_co2 outflow concentration");
  env.validate(len);
  auto& tape = *c_room.tape();
  const Var<Scalar> outflow = c_out * detail::constant_row(tape, env.flow_volume());
  const Var<Scalar> net = detail::constant_row(tape, env.external_mass()) - outflow;
  const Var<Scalar> balance = cumsum_exclusive(net) + Scalar(env.room_volume * env.initial_ppm);
  return (c_room - balance / Scalar(env.room_volume)) * Scalar(env.room_volume);
}

/// AHU coil power balance residual dQ - m c (T_sa - T_mix): 1 x T.
template <typename Scalar>
Var<Scalar> residual_hvac(const Var<Scalar>& t_sa, const Var<Scalar>& t_mix, const Var<Scalar>& dq,
                          const HvacEnvironment& env) {
  const Index len = t_sa.cols();
  detail::require_series(t_sa, 1, len, "residual_hvac supply temperature");
  detail::require_series(t_mix, 1, len, "residual_hvac mix temperature");
  detail::require_series(dq, 1, len, "residual_hvac coil power");
  env.validate(len);
  const Var<Scalar> mc = detail::constant_row(*t_sa.tape(), env.heat_capacity_rate());
  return dq - mc * (t_sa - t_mix);
}

// ---- binding a spec to a window ------------------------------------------

/// A PhysicsSpec resolved against one window: channel rows and environment.
/// Residuals take the window's signal channels (physical units, rows in
/// signal_channels() order) as one c x T variable.
class PhysicsBinding {
 public:
  PhysicsBinding(const PhysicsSpec& spec, const SampleWindow& window);

  const std::vector<std::string>& signal_channels() const { return signal_; }
  PhysicsFamily family() const { return family_; }
  /// Names of the residual blocks returned by residuals(), e.g. {"accel", "quat"}.
  std::vector<std::string> component_names() const;

  std::vector<Var64> residuals(const Var64& signal) const;
  /// Mean of squared residual entries over all blocks.
  Var64 loss(const Var64& signal) const;

 private:
  PhysicsFamily family_;
  std::vector<std::string> signal_;
  bool has_c_out_ = false;
  InsEnvironment ins_;
  Co2Environment co2_;
  HvacEnvironment hvac_;
};

/// Residual blocks of `spec` evaluated on the window's own values.
std::vector<RowMatrixd> residual_values(const SampleWindow& window, const PhysicsSpec& spec);

/// Mean of squared residual entries (the physics loss value).
double physics_loss(const SampleWindow& window, const PhysicsSpec& spec);

}  // namespace physden
