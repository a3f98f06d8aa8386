#include "physden/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace physden {

namespace pt = boost::property_tree;

std::vector<RowMatrixd> Dataset::signal_blocks(const std::vector<std::size_t>& indices, bool use_clean) const {
  const auto& source = use_clean ? clean : windows;
  const auto names = spec.signal_channels();
  std::vector<RowMatrixd> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(source.at(i).select(names));
  return out;
}

std::vector<double> alignment_scores(const std::vector<SampleWindow>& windows, const PhysicsSpec& spec) {
  std::vector<double> scores;
  scores.reserve(windows.size());
  for (const auto& w : windows) {
    double a = 0;
    for (const auto& block : residual_values(w, spec)) a += block.squaredNorm();
    scores.push_back(a);
  }
  return scores;
}

Split split_by_alignment(const std::vector<double>& scores) {
  if (scores.size() < 2) throw ValidationError("split_by_alignment needs at least 2 windows");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  const std::size_t n_train = (scores.size() + 1) / 2;
  Split split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Split split_by_alignment(const std::vector<SampleWindow>& windows, const PhysicsSpec& spec) {
  return split_by_alignment(alignment_scores(windows, spec));
}

void prepare(Dataset& dataset) {
  dataset.split = split_by_alignment(dataset.windows, dataset.spec);
  dataset.norm = NormStats::fit(dataset.signal_blocks(dataset.split.train));
}

PhysicsSpec simulated_spec(const SimulationConfig& cfg) {
  switch (cfg.family) {
    case PhysicsFamily::Ins: {
      PhysicsSpec spec = PhysicsSpec::ins();
      spec.constants = {{"g_x", cfg.ins.gravity.x()}, {"g_y", cfg.ins.gravity.y()}, {"g_z", cfg.ins.gravity.z()}};
      return spec;
    }
    case PhysicsFamily::Co2: return PhysicsSpec::co2(cfg.co2.room_volume, cfg.co2.emission_rate);
    case PhysicsFamily::Hvac: return PhysicsSpec::hvac();
  }
  return {};
}

Dataset simulate_dataset(const SimulationConfig& cfg) {
  if (cfg.windows < 1) throw ValidationError("simulation: windows must be at least 1");
  if (cfg.steps < 3) throw ValidationError("simulation: steps must be at least 3");
  if (!(cfg.dt > 0)) throw ValidationError("simulation: dt must be positive");
  cfg.inherent.validate();

  Dataset ds;
  ds.spec = simulated_spec(cfg);
  // Each window gets its own seed stream derived from the run seed.
  std::seed_seq seq{cfg.seed};
  std::vector<std::uint32_t> seeds(static_cast<std::size_t>(2 * cfg.windows));
  seq.generate(seeds.begin(), seeds.end());
  for (Index i = 0; i < cfg.windows; ++i) {
    const std::uint64_t s = seeds[static_cast<std::size_t>(2 * i)];
    switch (cfg.family) {
      case PhysicsFamily::Ins: ds.clean.push_back(simulate_ins(cfg.steps, cfg.dt, cfg.motion, s, cfg.ins)); break;
      case PhysicsFamily::Co2: ds.clean.push_back(simulate_co2(cfg.steps, cfg.dt, cfg.co2, s)); break;
      case PhysicsFamily::Hvac: ds.clean.push_back(simulate_hvac(cfg.steps, cfg.dt, cfg.hvac, s)); break;
    }
  }

  const auto names = ds.spec.signal_channels();
  const NormStats pooled = NormStats::fit(ds.signal_blocks([&] {
    std::vector<std::size_t> all(ds.clean.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }(), /*use_clean=*/true));
  const Eigen::VectorXd bias = cfg.bias_fraction * pooled.std;
  for (Index i = 0; i < cfg.windows; ++i) {
    NoiseSpec inherent = cfg.inherent;
    inherent.seed = seeds[static_cast<std::size_t>(2 * i + 1)];
    ds.windows.push_back(corrupt(ds.clean[static_cast<std::size_t>(i)], inherent, bias, names, pooled.std));
  }
  return ds;
}

namespace {

std::string window_key(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "window_%04zu", i);
  return buf;
}

std::string format_constant(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + dir.string() + ": " + ec.message());

  pt::ptree tree;
  tree.put("dataset.family", to_string(dataset.spec.family));
  tree.put("dataset.windows", dataset.windows.size());
  for (const auto& [key, value] : dataset.spec.constants) tree.put(pt::ptree::path_type("physics/" + key, '/'), format_constant(value));
  for (const auto& [role, channel] : dataset.spec.channel_map) tree.put(pt::ptree::path_type("channels/" + role, '/'), channel);
  for (std::size_t i = 0; i < dataset.windows.size(); ++i) {
    const std::string key = window_key(i);
    save_csv(dataset.windows[i], dir / (key + "_noisy.csv"));
    tree.put(pt::ptree::path_type(key + "/noisy", '/'), key + "_noisy.csv");
    if (dataset.has_clean()) {
      save_csv(dataset.clean[i], dir / (key + "_clean.csv"));
      tree.put(pt::ptree::path_type(key + "/clean", '/'), key + "_clean.csv");
    }
  }
  const auto path = dir / "manifest.ini";
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  pt::write_ini(os, tree);
  if (!os) throw ValidationError("error while writing " + path.string());
  return path;
}

Dataset read_manifest(const std::filesystem::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("manifest " + path.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  const auto base = path.parent_path();
  Dataset ds;
  const auto family = tree.get_optional<std::string>("dataset.family");
  if (!family) throw ValidationError("manifest " + path.string() + ": missing key dataset.family");
  ds.spec.family = parse_family(*family);

  if (auto physics = tree.get_child_optional("physics")) {
    for (const auto& [key, node] : *physics) {
      const auto value = node.get_value_optional<double>();
      if (!value) throw ValidationError("manifest: physics." + key + " is not a number");
      ds.spec.constants[key] = *value;
    }
  }
  const auto channels = tree.get_child_optional("channels");
  if (!channels || channels->empty()) throw ValidationError("manifest " + path.string() + ": missing [channels] section");
  for (const auto& [role, node] : *channels) ds.spec.channel_map[role] = node.data();

  std::vector<std::string> schema = ds.spec.signal_channels();
  for (const auto& [key, node] : tree) {
    if (key.rfind("window_", 0) != 0) continue;
    const auto noisy = node.get_optional<std::string>(pt::ptree::path_type("noisy", '/'));
    if (!noisy) throw ValidationError("manifest: " + key + " has no 'noisy' entry");
    ds.windows.push_back(load_csv(base / *noisy, schema));
    const auto clean = node.get_optional<std::string>(pt::ptree::path_type("clean", '/'));
    if (clean) {
      if (ds.clean.size() + 1 != ds.windows.size()) throw ValidationError("manifest: clean references must be given for all windows or none");
      ds.clean.push_back(load_csv(base / *clean, schema));
    } else if (!ds.clean.empty()) {
      throw ValidationError("manifest: clean references must be given for all windows or none");
    }
  }
  if (ds.windows.empty()) throw ValidationError("manifest " + path.string() + " lists no windows");
  if (auto n = tree.get_optional<std::size_t>("dataset.windows"); n && *n != ds.windows.size()) {
    throw ValidationError("manifest: dataset.windows = " + std::to_string(*n) + " but " +
                          std::to_string(ds.windows.size()) + " windows are listed");
  }
  return ds;
}

}  // namespace physden
