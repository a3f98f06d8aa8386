#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "physden/physics.hpp"
#include "physden/window.hpp"

namespace physden {

/// offset + sum_k A_k sin(omega_k t + phi_k), with exact derivatives of any order.
struct SmoothSignal {
  double offset = 0.0;
  std::vector<double> amplitude, omega, phase;

  double operator()(double t, int derivative = 0) const;
  /// Upper bound on |d^k/dt^k| over all t (k >= 1).
  double derivative_bound(int derivative) const;
};

/// `components` sinusoids with amplitudes amplitude * U(0.5, 1.5) / components
/// and frequencies in [0.2, 1] * max_frequency_hz.
SmoothSignal random_smooth_signal(double amplitude, double max_frequency_hz, int components, std::mt19937_64& rng);

/// Band-limited motion of the simulated device. Zero amplitudes give a
/// device at rest with identity orientation.
struct MotionParams {
  double position_amplitude = 1.0;  // m, per axis
  double angular_rate = 0.5;        // rad/s, per axis
  double max_frequency = 0.5;       // Hz
  int components = 4;
};

/// 13 channels p_x..p_z, q_w..q_z, w_x..w_z, a_x..a_z over `steps` samples.
///
/// Orientation is integrated with the exact increment q[t+1] = q[t] (x)
/// exp(w[t] dt / 2), holding the rate w[t] = w(t dt) over each step; the
/// specific force a = R(q)^T (p'' - g0) uses the analytic p''.
SampleWindow simulate_ins(Index steps, double dt, const MotionParams& motion, std::uint64_t seed,
                          const InsEnvironment& env = {});

/// Bound on the INS physics_loss of simulate_ins output that holds for any
/// seed: twice the leading truncation terms dt^2 |w'|^2 / 16 (orientation
/// stencil against the held rate) and (dt^2 |p''''| / 12)^2 (second
/// difference), averaged over the 7 residual rows.
double ins_truncation_bound(double dt, const MotionParams& motion);

struct Co2SimConfig {
  double room_volume = 50.0;     // m^3
  double emission_rate = 5.0;    // ppm m^3/s per person
  double initial_ppm = 400.0;
  double inflow_ppm = 400.0;
  double base_flow = 0.05;       // m^3/s
  int max_occupants = 8;
  double occupancy_change = 0.05;  // per-step probability of a new head count
  double outflow_offset = 0.0;   // c_out - c_room, ppm
};

/// Random flow and occupancy schedules for a CO2 simulation.
Co2Environment random_co2_environment(const Co2SimConfig& cfg, Index steps, double dt, std::mt19937_64& rng);

/// Channels c_room, c_out, flow, c_in, occupants, c0. The room concentration
/// follows the discrete balance in the same floating-point order as
/// residual_co2, so the clean residual is exactly zero.
SampleWindow simulate_co2(const Co2Environment& env, Index steps, double outflow_offset = 0.0);
SampleWindow simulate_co2(Index steps, double dt, const Co2SimConfig& cfg, std::uint64_t seed);

struct HvacSimConfig {
  double mix_temperature = 18.0;  // degC
  double mix_swing = 4.0;         // K
  double coil_power = 6000.0;     // W amplitude
  double mass_flow = 1.2;         // kg/s
  double specific_heat = 1006.0;  // J/(kg K)
  double max_frequency = 1.0 / 3600.0;  // Hz
};

/// Channels t_sa, t_mix, dQ, m_dot, cp with t_sa = t_mix + dQ / (m c). dQ is
/// then recomputed as m c (t_sa - t_mix) so the clean residual is exactly zero.
/// Throws DegenerateInputError when m c == 0 at any step.
SampleWindow simulate_hvac(const HvacEnvironment& env, const Eigen::VectorXd& t_mix, const Eigen::VectorXd& coil_power);
SampleWindow simulate_hvac(Index steps, double dt, const HvacSimConfig& cfg, std::uint64_t seed);

}  // namespace physden
