#include "physden/simulate.hpp"

#include <cmath>
#include <numbers>

#include "physden/quaternion.hpp"

namespace physden {

double SmoothSignal::operator()(double t, int derivative) const {
  double v = derivative == 0 ? offset : 0.0;
  const double shift = derivative * std::numbers::pi / 2;
  for (std::size_t k = 0; k < amplitude.size(); ++k) {
    v += amplitude[k] * std::pow(omega[k], derivative) * std::sin(omega[k] * t + phase[k] + shift);
  }
  return v;
}

double SmoothSignal::derivative_bound(int derivative) const {
  double b = 0;
  for (std::size_t k = 0; k < amplitude.size(); ++k) b += std::abs(amplitude[k]) * std::pow(omega[k], derivative);
  return b;
}

SmoothSignal random_smooth_signal(double amplitude, double max_frequency_hz, int components, std::mt19937_64& rng) {
  SmoothSignal s;
  if (components < 1) return s;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < components; ++k) {
    s.amplitude.push_back(amplitude * (0.5 + unit(rng)) / components);
    s.omega.push_back(2 * std::numbers::pi * max_frequency_hz * (0.2 + 0.8 * unit(rng)));
    s.phase.push_back(2 * std::numbers::pi * unit(rng));
  }
  return s;
}

SampleWindow simulate_ins(Index steps, double dt, const MotionParams& motion, std::uint64_t seed,
                          const InsEnvironment& env) {
  if (!(dt > 0)) throw ValidationError("simulate_ins: dt must be positive");
  if (steps < 3) throw ValidationError("simulate_ins: need at least 3 steps");
  std::mt19937_64 rng(seed);
  std::array<SmoothSignal, 3> pos, rate;
  for (auto& s : pos) s = random_smooth_signal(motion.position_amplitude, motion.max_frequency, motion.components, rng);
  for (auto& s : rate) s = random_smooth_signal(motion.angular_rate, motion.max_frequency, motion.components, rng);

  RowMatrixd v(13, steps);
  Quaternion q{1, 0, 0, 0};
  for (Index t = 0; t < steps; ++t) {
    const double time = static_cast<double>(t) * dt;
    const Eigen::Vector3d w(rate[0](time), rate[1](time), rate[2](time));
    std::array<double, 3> world{};
    for (int i = 0; i < 3; ++i) {
      v(i, t) = pos[i](time);
      world[i] = pos[i](time, 2) - env.gravity[i];
    }
    const auto a = rotate_to_body(q, world);
    v.col(t).segment<4>(3) << q.w, q.x, q.y, q.z;
    v.col(t).segment<3>(7) = w;
    v.col(t).segment<3>(10) << a[0], a[1], a[2];
    q = normalized(quat_mul(q, rotation_increment(w * dt)));
  }
  std::vector<std::string> units{"m", "m", "m", "1", "1", "1", "1", "rad/s", "rad/s", "rad/s", "m/s^2", "m/s^2", "m/s^2"};
  return SampleWindow(ins_channel_names(), std::move(v), dt, std::move(units));
}

double ins_truncation_bound(double dt, const MotionParams& motion) {
  // Per-axis worst case of random_smooth_signal: amplitudes sum to at most 1.5x.
  const double omega = 2 * std::numbers::pi * motion.max_frequency;
  const double rate_slope = 1.5 * motion.angular_rate * omega;
  const double snap = 1.5 * motion.position_amplitude * std::pow(omega, 4);
  const double quat = dt * dt / 16 * 3 * rate_slope * rate_slope;
  const double accel = 3 * std::pow(dt * dt / 12 * snap, 2);
  return 2 * (quat + accel) / 7;
}

Co2Environment random_co2_environment(const Co2SimConfig& cfg, Index steps, double dt, std::mt19937_64& rng) {
  Co2Environment env;
  env.room_volume = cfg.room_volume;
  env.emission_rate = cfg.emission_rate;
  env.initial_ppm = cfg.initial_ppm;
  env.dt = dt;
  const SmoothSignal flow = [&] {
    auto s = random_smooth_signal(0.3 * cfg.base_flow, 1.0 / (40 * dt), 3, rng);
    s.offset = cfg.base_flow;
    return s;
  }();
  env.flow.resize(steps);
  env.inflow_ppm = Eigen::VectorXd::Constant(steps, cfg.inflow_ppm);
  env.occupants.resize(steps);
  std::uniform_int_distribution<int> heads(0, std::max(cfg.max_occupants, 0));
  std::bernoulli_distribution change(cfg.occupancy_change);
  int n = heads(rng);
  for (Index t = 0; t < steps; ++t) {
    env.flow[t] = std::max(0.0, flow(static_cast<double>(t) * dt));
    if (t > 0 && change(rng)) n = heads(rng);
    env.occupants[t] = n;
  }
  return env;
}

SampleWindow simulate_co2(const Co2Environment& env, Index steps, double outflow_offset) {
  if (steps < 3) throw ValidationError("simulate_co2: need at least 3 steps");
  env.validate(steps);
  const Eigen::VectorXd vdt = env.flow_volume();
  const Eigen::VectorXd ext = env.external_mass();
  const double volume = env.room_volume;
  const double initial = volume * env.initial_ppm;

  RowMatrixd v(6, steps);
  double acc = 0;
  for (Index t = 0; t < steps; ++t) {
    // Same operation order as residual_co2: c = (prefix + c0 V) / V.
    const double c = (acc + initial) / volume;
    const double c_out = c + outflow_offset;
    acc += ext[t] - c_out * vdt[t];
    v(0, t) = c;
    v(1, t) = c_out;
  }
  v.row(2) = env.flow.transpose();
  v.row(3) = env.inflow_ppm.transpose();
  v.row(4) = env.occupants.transpose();
  v.row(5).setConstant(env.initial_ppm);
  return SampleWindow({"c_room", "c_out", "flow", "c_in", "occupants", "c0"}, std::move(v), env.dt,
                      {"ppm", "ppm", "m^3/s", "ppm", "persons", "ppm"});
}

SampleWindow simulate_co2(Index steps, double dt, const Co2SimConfig& cfg, std::uint64_t seed) {
  if (!(dt > 0)) throw ValidationError("simulate_co2: dt must be positive");
  std::mt19937_64 rng(seed);
  return simulate_co2(random_co2_environment(cfg, steps, dt, rng), steps, cfg.outflow_offset);
}

SampleWindow simulate_hvac(const HvacEnvironment& env, const Eigen::VectorXd& t_mix, const Eigen::VectorXd& coil_power) {
  const Index steps = t_mix.size();
  if (steps < 3) throw ValidationError("simulate_hvac: need at least 3 steps");
  if (coil_power.size() != steps) throw DimensionError("simulate_hvac: coil power and mix temperature lengths differ");
  env.validate(steps);
  const Eigen::VectorXd mc = env.heat_capacity_rate();
  for (Index t = 0; t < steps; ++t) {
    if (mc[t] == 0) {
      throw DegenerateInputError("simulate_hvac: m c is zero at step " + std::to_string(t));
    }
  }
  RowMatrixd v(5, steps);
  for (Index t = 0; t < steps; ++t) {
    const double t_sa = t_mix[t] + coil_power[t] / mc[t];
    v(0, t) = t_sa;
    v(1, t) = t_mix[t];
    v(2, t) = mc[t] * (t_sa - t_mix[t]);
  }
  v.row(3) = env.mass_flow.transpose();
  v.row(4) = env.specific_heat.transpose();
  return SampleWindow({"t_sa", "t_mix", "dQ", "m_dot", "cp"}, std::move(v), env.dt,
                      {"degC", "degC", "W", "kg/s", "J/(kg K)"});
}

SampleWindow simulate_hvac(Index steps, double dt, const HvacSimConfig& cfg, std::uint64_t seed) {
  if (!(dt > 0)) throw ValidationError("simulate_hvac: dt must be positive");
  if (steps < 3) throw ValidationError("simulate_hvac: need at least 3 steps");
  std::mt19937_64 rng(seed);
  auto mix = random_smooth_signal(cfg.mix_swing, cfg.max_frequency, 3, rng);
  mix.offset = cfg.mix_temperature;
  const auto power = random_smooth_signal(cfg.coil_power, cfg.max_frequency, 3, rng);
  auto mass = random_smooth_signal(0.2 * cfg.mass_flow, cfg.max_frequency, 2, rng);
  mass.offset = cfg.mass_flow;
  auto heat = random_smooth_signal(0.005 * cfg.specific_heat, cfg.max_frequency, 2, rng);
  heat.offset = cfg.specific_heat;

  HvacEnvironment env;
  env.dt = dt;
  env.mass_flow.resize(steps);
  env.specific_heat.resize(steps);
  Eigen::VectorXd t_mix(steps), dq(steps);
  for (Index t = 0; t < steps; ++t) {
    const double time = static_cast<double>(t) * dt;
    env.mass_flow[t] = mass(time);
    env.specific_heat[t] = heat(time);
    t_mix[t] = mix(time);
    dq[t] = power(time);
  }
  return simulate_hvac(env, t_mix, dq);
}

}  // namespace physden
