#include "physden/config.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>

namespace physden {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"data",
       {"manifest", "windows", "steps", "dt", "seed", "noise_kind", "noise_scale", "mask_fraction", "bias_fraction",
        "position_amplitude", "angular_rate", "max_frequency", "components", "base_flow", "inflow_ppm",
        "initial_ppm", "max_occupants", "occupancy_change", "outflow_offset", "mix_temperature", "mix_swing",
        "coil_power"}},
      {"model", {"widths", "seed", "residual"}},
      {"train",
       {"lr", "batch_size", "epochs", "pretrain_fraction", "lambda", "noise_kind", "noise_scale", "mask_fraction",
        "seed", "deterministic", "threads"}},
      {"physics", {"family", "g_x", "g_y", "g_z", "volume", "emission_rate", "mass_flow", "specific_heat"}},
      {"output", {"dir"}},
  };
  return keys;
}

pt::ptree::path_type key_path(const std::string& dotted) { return pt::ptree::path_type(dotted, '.'); }

double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw ValidationError("config: " + key + " = '" + text + "' is not a number");
  }
  return v;
}

}  // namespace

RunConfig RunConfig::load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (file) {
    if (!std::filesystem::exists(*file)) throw ValidationError("config file " + file->string() + " does not exist");
    try {
      pt::read_ini(file->string(), cfg.tree_);
    } catch (const pt::ini_parser_error& e) {
      throw ValidationError("config " + file->string() + ":" + std::to_string(e.line()) + ": " + e.message());
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + o + "' is not of the form section.key=value");
    cfg.set(o.substr(0, eq), o.substr(eq + 1));
  }
  cfg.validate_keys();
  return cfg;
}

void RunConfig::set(const std::string& dotted_key, const std::string& value) {
  if (dotted_key.find('.') == std::string::npos) {
    throw ValidationError("config key '" + dotted_key + "' must be written as section.key");
  }
  tree_.put(key_path(dotted_key), value);
}

bool RunConfig::has(const std::string& dotted_key) const {
  return tree_.get_optional<std::string>(key_path(dotted_key)).has_value();
}

std::string RunConfig::get(const std::string& dotted_key, const std::string& fallback) const {
  return tree_.get<std::string>(key_path(dotted_key), fallback);
}

double RunConfig::get_double(const std::string& dotted_key, double fallback) const {
  const auto v = tree_.get_optional<std::string>(key_path(dotted_key));
  return v ? to_double(dotted_key, *v) : fallback;
}

long RunConfig::get_int(const std::string& dotted_key, long fallback) const {
  const double v = get_double(dotted_key, static_cast<double>(fallback));
  if (v != std::floor(v)) throw ValidationError("config: " + dotted_key + " must be an integer");
  return static_cast<long>(v);
}

bool RunConfig::get_bool(const std::string& dotted_key, bool fallback) const {
  const auto v = tree_.get_optional<std::string>(key_path(dotted_key));
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ValidationError("config: " + dotted_key + " = '" + *v + "' is not a boolean");
}

double RunConfig::require_double(const std::string& dotted_key) const {
  if (!has(dotted_key)) throw ValidationError("config: missing required key " + dotted_key);
  return get_double(dotted_key, 0.0);
}

std::string RunConfig::require(const std::string& dotted_key) const {
  if (!has(dotted_key)) throw ValidationError("config: missing required key " + dotted_key);
  return get(dotted_key, "");
}

PhysicsFamily RunConfig::family() const {
  try {
    return parse_family(require("physics.family"));
  } catch (const SpecError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

SimulationConfig RunConfig::simulation() const {
  SimulationConfig s;
  s.family = family();
  s.windows = get_int("data.windows", s.windows);
  s.steps = get_int("data.steps", s.steps);
  s.seed = static_cast<std::uint64_t>(get_int("data.seed", static_cast<long>(s.seed)));
  s.inherent.kind = parse_noise_kind(get("data.noise_kind", to_string(s.inherent.kind)));
  s.inherent.scale = get_double("data.noise_scale", s.inherent.scale);
  s.inherent.mask_fraction = get_double("data.mask_fraction", s.inherent.mask_fraction);
  s.bias_fraction = get_double("data.bias_fraction", s.bias_fraction);
  switch (s.family) {
    case PhysicsFamily::Ins:
      s.dt = get_double("data.dt", 0.1);
      s.motion.position_amplitude = get_double("data.position_amplitude", s.motion.position_amplitude);
      s.motion.angular_rate = get_double("data.angular_rate", s.motion.angular_rate);
      s.motion.max_frequency = get_double("data.max_frequency", s.motion.max_frequency);
      s.motion.components = static_cast<int>(get_int("data.components", s.motion.components));
      s.ins.gravity = {get_double("physics.g_x", 0.0), get_double("physics.g_y", 0.0),
                       get_double("physics.g_z", -kStandardGravity)};
      break;
    case PhysicsFamily::Co2:
      s.dt = get_double("data.dt", 60.0);
      s.co2.room_volume = require_double("physics.volume");
      s.co2.emission_rate = require_double("physics.emission_rate");
      s.co2.base_flow = get_double("data.base_flow", s.co2.base_flow);
      s.co2.inflow_ppm = get_double("data.inflow_ppm", s.co2.inflow_ppm);
      s.co2.initial_ppm = get_double("data.initial_ppm", s.co2.initial_ppm);
      s.co2.max_occupants = static_cast<int>(get_int("data.max_occupants", s.co2.max_occupants));
      s.co2.occupancy_change = get_double("data.occupancy_change", s.co2.occupancy_change);
      s.co2.outflow_offset = get_double("data.outflow_offset", s.co2.outflow_offset);
      if (!(s.co2.room_volume > 0)) throw ValidationError("config: physics.volume must be positive");
      break;
    case PhysicsFamily::Hvac:
      s.dt = get_double("data.dt", 60.0);
      s.hvac.mass_flow = require_double("physics.mass_flow");
      s.hvac.specific_heat = require_double("physics.specific_heat");
      s.hvac.mix_temperature = get_double("data.mix_temperature", s.hvac.mix_temperature);
      s.hvac.mix_swing = get_double("data.mix_swing", s.hvac.mix_swing);
      s.hvac.coil_power = get_double("data.coil_power", s.hvac.coil_power);
      s.hvac.max_frequency = get_double("data.max_frequency", s.hvac.max_frequency);
      if (!(s.hvac.mass_flow > 0) || !(s.hvac.specific_heat > 0)) {
        throw ValidationError("config: physics.mass_flow and physics.specific_heat must be positive");
      }
      break;
  }
  if (s.windows < 1) throw ValidationError("config: data.windows must be at least 1");
  if (s.steps < 3) throw ValidationError("config: data.steps must be at least 3");
  if (!(s.dt > 0)) throw ValidationError("config: data.dt must be positive");
  s.inherent.validate();
  return s;
}

Widths parse_widths(const std::string& text) {
  Widths w{};
  std::istringstream is(text);
  std::string part;
  std::size_t n = 0;
  while (std::getline(is, part, ',')) {
    if (n == 3) throw ValidationError("model.widths needs exactly three values, got '" + text + "'");
    const double v = to_double("model.widths", part);
    if (v < 1 || v != std::floor(v)) throw ValidationError("model.widths entries must be positive integers");
    w[n++] = static_cast<Index>(v);
  }
  if (n != 3) throw ValidationError("model.widths needs exactly three values, got '" + text + "'");
  return w;
}

TrainConfig RunConfig::training() const {
  TrainConfig t;
  t.lr = get_double("train.lr", t.lr);
  t.batch_size = get_int("train.batch_size", t.batch_size);
  t.epochs = static_cast<int>(get_int("train.epochs", t.epochs));
  t.pretrain_fraction = get_double("train.pretrain_fraction", t.pretrain_fraction);
  t.lambda = parse_lambda(get("train.lambda", "adaptive"));
  t.noise.kind = parse_noise_kind(get("train.noise_kind", to_string(t.noise.kind)));
  t.noise.scale = get_double("train.noise_scale", t.noise.scale);
  t.noise.mask_fraction = get_double("train.mask_fraction", t.noise.mask_fraction);
  t.seed = seed();
  if (has("model.seed")) t.model_seed = static_cast<std::uint64_t>(get_int("model.seed", 0));
  t.deterministic = get_bool("train.deterministic", t.deterministic);
  t.threads = static_cast<int>(get_int("train.threads", t.threads));
  if (has("model.widths")) t.widths = parse_widths(get("model.widths", ""));
  t.residual = get_bool("model.residual", t.residual);
  t.validate();
  return t;
}

std::map<std::string, double> RunConfig::physics_constants() const {
  std::map<std::string, double> out;
  if (auto section = tree_.get_child_optional("physics")) {
    for (const auto& [key, node] : *section) {
      if (key != "family") out[key] = to_double("physics." + key, node.data());
    }
  }
  return out;
}

std::filesystem::path RunConfig::output_dir() const { return get("output.dir", "runs"); }

std::uint64_t RunConfig::seed() const {
  const long s = get_int("train.seed", 0);
  if (s < 0) throw ValidationError("config: train.seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

void RunConfig::validate_keys() const {
  const auto& known = known_keys();
  for (const auto& [section, node] : tree_) {
    auto it = known.find(section);
    if (it == known.end()) throw ValidationError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : node) {
      if (!it->second.count(key)) throw ValidationError("config: unknown key " + section + "." + key);
      if (!value.empty()) throw ValidationError("config: " + section + "." + key + " must be a plain value");
    }
  }
}

}  // namespace physden
