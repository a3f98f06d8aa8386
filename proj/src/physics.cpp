#include "physden/physics.hpp"

#include <algorithm>

namespace physden {

std::string to_string(PhysicsFamily family) {
  switch (family) {
    case PhysicsFamily::Ins: return "ins";
    case PhysicsFamily::Co2: return "co2";
    case PhysicsFamily::Hvac: return "hvac";
  }
  return "unknown";
}

PhysicsFamily parse_family(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "ins") return PhysicsFamily::Ins;
  if (lower == "co2") return PhysicsFamily::Co2;
  if (lower == "hvac") return PhysicsFamily::Hvac;
  throw SpecError("unknown physics family '" + name + "' (expected ins, co2 or hvac)");
}

void InsEnvironment::validate() const {
  if (!(dt > 0)) throw SpecError("ins environment: dt must be positive");
}

void Co2Environment::validate(Index length) const {
  if (!(room_volume > 0)) throw SpecError("co2 environment: room volume must be positive");
  if (!(dt > 0)) throw SpecError("co2 environment: dt must be positive");
  if (flow.size() != length || inflow_ppm.size() != length || occupants.size() != length) {
    throw DimensionError("co2 environment: series lengths (" + std::to_string(flow.size()) + ", " +
                         std::to_string(inflow_ppm.size()) + ", " + std::to_string(occupants.size()) +
                         ") do not match window length " + std::to_string(length));
  }
  if ((occupants.array() < 0).any()) throw SpecError("co2 environment: occupant count must be non-negative");
}

Eigen::VectorXd Co2Environment::flow_volume() const { return flow * dt; }

Eigen::VectorXd Co2Environment::external_mass() const {
  const Eigen::VectorXd vdt = flow_volume();
  return inflow_ppm.cwiseProduct(vdt) + (occupants * emission_rate) * dt;
}

void HvacEnvironment::validate(Index length) const {
  if (mass_flow.size() != length || specific_heat.size() != length) {
    throw DimensionError("hvac environment: series lengths (" + std::to_string(mass_flow.size()) + ", " +
                         std::to_string(specific_heat.size()) + ") do not match window length " +
                         std::to_string(length));
  }
  if ((mass_flow.array() < 0).any()) throw SpecError("hvac environment: mass flow must be non-negative");
  if ((specific_heat.array() <= 0).any()) throw SpecError("hvac environment: specific heat must be positive");
}

Eigen::VectorXd HvacEnvironment::heat_capacity_rate() const { return mass_flow.cwiseProduct(specific_heat); }

std::vector<std::string> ins_channel_names() {
  return {"p_x", "p_y", "p_z", "q_w", "q_x", "q_y", "q_z", "w_x", "w_y", "w_z", "a_x", "a_y", "a_z"};
}

namespace {

std::map<std::string, std::string> identity_map(const std::vector<std::string>& roles) {
  std::map<std::string, std::string> m;
  for (const auto& r : roles) m[r] = r;
  return m;
}

}  // namespace

PhysicsSpec PhysicsSpec::ins() {
  PhysicsSpec spec;
  spec.family = PhysicsFamily::Ins;
  spec.channel_map = identity_map(ins_channel_names());
  spec.constants = {{"g_x", 0.0}, {"g_y", 0.0}, {"g_z", -kStandardGravity}};
  return spec;
}

PhysicsSpec PhysicsSpec::co2(double room_volume, double emission_rate) {
  PhysicsSpec spec;
  spec.family = PhysicsFamily::Co2;
  spec.channel_map = identity_map({"c_room", "c_out", "flow", "c_in", "occupants", "c0"});
  spec.constants = {{"volume", room_volume}, {"emission_rate", emission_rate}};
  return spec;
}

PhysicsSpec PhysicsSpec::hvac() {
  PhysicsSpec spec;
  spec.family = PhysicsFamily::Hvac;
  spec.channel_map = identity_map({"t_sa", "t_mix", "dQ", "m_dot", "cp"});
  return spec;
}

std::vector<std::string> PhysicsSpec::signal_roles() const {
  switch (family) {
    case PhysicsFamily::Ins: return ins_channel_names();
    case PhysicsFamily::Co2:
      if (maps("c_out")) return {"c_room", "c_out"};
      return {"c_room"};
    case PhysicsFamily::Hvac: return {"t_sa", "t_mix", "dQ"};
  }
  return {};
}

std::vector<std::string> PhysicsSpec::auxiliary_roles() const {
  switch (family) {
    case PhysicsFamily::Ins: return {};
    case PhysicsFamily::Co2: return {"flow", "c_in", "occupants", "c0"};
    case PhysicsFamily::Hvac: return {"m_dot", "cp"};
  }
  return {};
}

std::vector<std::string> PhysicsSpec::signal_channels() const {
  std::vector<std::string> out;
  for (const auto& role : signal_roles()) out.push_back(channel(role));
  return out;
}

const std::string& PhysicsSpec::channel(const std::string& role) const {
  auto it = channel_map.find(role);
  if (it == channel_map.end()) {
    throw SpecError(to_string(family) + " physics spec has no channel mapped for role '" + role + "'");
  }
  return it->second;
}

double PhysicsSpec::constant(const std::string& key) const {
  auto it = constants.find(key);
  if (it == constants.end()) throw SpecError(to_string(family) + " physics spec is missing constant '" + key + "'");
  return it->second;
}

namespace {

// Series for an environment role: the mapped channel if the window has it,
// else the spec constant broadcast over the window.
Eigen::VectorXd environment_series(const PhysicsSpec& spec, const SampleWindow& window, const std::string& role) {
  if (spec.maps(role)) {
    if (auto idx = window.find(spec.channel(role))) return window.values.row(*idx).transpose();
  }
  if (spec.constants.count(role)) return Eigen::VectorXd::Constant(window.length(), spec.constants.at(role));
  throw SpecError(to_string(spec.family) + " physics needs '" + role + "' as a window channel or a constant");
}

}  // namespace

InsEnvironment PhysicsSpec::ins_environment(const SampleWindow& window) const {
  InsEnvironment env;
  env.dt = window.dt;
  auto get = [&](const char* key, double fallback) {
    auto it = constants.find(key);
    return it == constants.end() ? fallback : it->second;
  };
  env.gravity = {get("g_x", 0.0), get("g_y", 0.0), get("g_z", -kStandardGravity)};
  return env;
}

Co2Environment PhysicsSpec::co2_environment(const SampleWindow& window) const {
  Co2Environment env;
  env.dt = window.dt;
  env.room_volume = constant("volume");
  env.emission_rate = constant("emission_rate");
  env.flow = environment_series(*this, window, "flow");
  env.inflow_ppm = environment_series(*this, window, "c_in");
  env.occupants = environment_series(*this, window, "occupants");
  env.initial_ppm = environment_series(*this, window, "c0")[0];
  env.validate(window.length());
  return env;
}

HvacEnvironment PhysicsSpec::hvac_environment(const SampleWindow& window) const {
  HvacEnvironment env;
  env.dt = window.dt;
  env.mass_flow = environment_series(*this, window, "m_dot");
  env.specific_heat = environment_series(*this, window, "cp");
  env.validate(window.length());
  return env;
}

PhysicsBinding::PhysicsBinding(const PhysicsSpec& spec, const SampleWindow& window) : family_(spec.family) {
  signal_ = spec.signal_channels();
  std::vector<std::string> missing;
  for (const auto& name : signal_) {
    if (!window.has(name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw SpecError(to_string(family_) + " physics: window is missing channel(s) " + list);
  }
  switch (family_) {
    case PhysicsFamily::Ins: ins_ = spec.ins_environment(window); break;
    case PhysicsFamily::Co2:
      co2_ = spec.co2_environment(window);
      has_c_out_ = spec.maps("c_out");
      break;
    case PhysicsFamily::Hvac: hvac_ = spec.hvac_environment(window); break;
  }
}

std::vector<std::string> PhysicsBinding::component_names() const {
  switch (family_) {
    case PhysicsFamily::Ins: return {"accel", "quat"};
    case PhysicsFamily::Co2: return {"co2"};
    case PhysicsFamily::Hvac: return {"hvac"};
  }
  return {};
}

std::vector<Var64> PhysicsBinding::residuals(const Var64& signal) const {
  if (signal.rows() != static_cast<Index>(signal_.size())) {
    throw DimensionError("physics residual: expected " + std::to_string(signal_.size()) + " signal rows, got " +
                         std::to_string(signal.rows()));
  }
  switch (family_) {
    case PhysicsFamily::Ins: {
      const Var64 p = rows(signal, 0, 3), q = rows(signal, 3, 4), w = rows(signal, 7, 3), a = rows(signal, 10, 3);
      return {residual_ins_accel(p, q, a, ins_), residual_ins_quat(q, w, ins_)};
    }
    case PhysicsFamily::Co2: {
      const Var64 c_room = row(signal, 0);
      const Var64 c_out = has_c_out_ ? row(signal, 1) : c_room;
      return {residual_co2(c_room, c_out, co2_)};
    }
    case PhysicsFamily::Hvac:
      return {residual_hvac(row(signal, 0), row(signal, 1), row(signal, 2), hvac_)};
  }
  return {};
}

Var64 PhysicsBinding::loss(const Var64& signal) const {
  const auto blocks = residuals(signal);
  if (blocks.size() == 1) return mean_square(blocks.front());
  // Blocks differ in row count but share the column count, so stack them.
  return mean_square(concat_rows(std::span<const Var64>(blocks)));
}

std::vector<RowMatrixd> residual_values(const SampleWindow& window, const PhysicsSpec& spec) {
  const PhysicsBinding binding(spec, window);
  Tape64 tape;
  const Var64 signal = tape.constant(Tensord::from_matrix(window.select(binding.signal_channels())));
  std::vector<RowMatrixd> out;
  for (const auto& block : binding.residuals(signal)) out.emplace_back(block.value().matrix());
  return out;
}

double physics_loss(const SampleWindow& window, const PhysicsSpec& spec) {
  const PhysicsBinding binding(spec, window);
  Tape64 tape;
  const Var64 signal = tape.constant(Tensord::from_matrix(window.select(binding.signal_channels())));
  return binding.loss(signal).value().item();
}

}  // namespace physden
