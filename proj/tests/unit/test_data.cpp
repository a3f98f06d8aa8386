#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "physden/dataset.hpp"
#include "physden/noise.hpp"
#include "physden/simulate.hpp"

using namespace physden;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("physden_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SampleWindow random_window(Index c, Index t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 3);
  RowMatrixd v(c, t);
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = n(rng);
  std::vector<std::string> names;
  for (Index i = 0; i < c; ++i) names.push_back("ch" + std::to_string(i));
  return SampleWindow(names, v, 0.25);
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("simulate_ins at rest") {
  MotionParams still;
  still.position_amplitude = 0;
  still.angular_rate = 0;
  const SampleWindow w = simulate_ins(50, 0.01, still, 3);
  CHECK(w.channels() == 13);
  const RowMatrixd p = w.select({"p_x", "p_y", "p_z"});
  CHECK((p.colwise() - p.col(0)).isZero(0));
  const RowMatrixd q = w.select({"q_w", "q_x", "q_y", "q_z"});
  CHECK((q.row(0).array() == 1).all());
  CHECK(q.bottomRows(3).isZero(0));
  CHECK(w.select({"w_x", "w_y", "w_z"}).isZero(0));
  const RowMatrixd a = w.select({"a_x", "a_y", "a_z"});
  CHECK(a.topRows(2).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((a.row(2).array() - 9.80665).abs().maxCoeff() < 1e-12);
}

TEST_CASE("simulate_ins keeps quaternions unit norm") {
  const SampleWindow w = simulate_ins(200, 0.05, MotionParams{}, 12);
  const RowMatrixd q = w.select({"q_w", "q_x", "q_y", "q_z"});
  CHECK((q.colwise().norm().array() - 1).abs().maxCoeff() < 1e-12);
}

TEST_CASE("simulate_co2: balanced room stays at c0") {
  Co2Environment env;
  const Index n = 40;
  env.flow = Eigen::VectorXd::Constant(n, 0.08);
  env.inflow_ppm = Eigen::VectorXd::Constant(n, 410);
  env.occupants = Eigen::VectorXd::Zero(n);
  env.initial_ppm = 410;
  const SampleWindow w = simulate_co2(env, n);
  CHECK((w.row("c_room").array() - 410).abs().maxCoeff() < 1e-9);
  CHECK(w.row("c_out") == w.row("c_room"));
}

TEST_CASE("simulate_co2: sealed room ramps at n q / V per second") {
  Co2Environment env;
  const Index n = 30;
  env.room_volume = 40;
  env.emission_rate = 5;
  env.dt = 60;
  env.flow = Eigen::VectorXd::Zero(n);
  env.inflow_ppm = Eigen::VectorXd::Constant(n, 400);
  env.occupants = Eigen::VectorXd::Constant(n, 3);
  env.initial_ppm = 400;
  const SampleWindow w = simulate_co2(env, n);
  const double slope = 3 * 5.0 / 40.0;
  for (Index t = 0; t < n; ++t) {
    CHECK(w.row("c_room")[t] == doctest::Approx(400 + slope * 60.0 * static_cast<double>(t)).epsilon(1e-13));
  }
}

TEST_CASE("simulate_co2 with an outflow offset") {
  Co2SimConfig cfg;
  cfg.outflow_offset = 12.5;
  const SampleWindow w = simulate_co2(64, 60, cfg, 4);
  CHECK(((w.row("c_out") - w.row("c_room")).array() - 12.5).abs().maxCoeff() < 1e-9);
}

TEST_CASE("simulate_hvac examples") {
  HvacEnvironment env;
  env.mass_flow = Eigen::VectorXd::Ones(5);
  env.specific_heat = Eigen::VectorXd::Constant(5, 1006);
  const Eigen::VectorXd mix = Eigen::VectorXd::LinSpaced(5, 15, 19);

  const SampleWindow idle = simulate_hvac(env, mix, Eigen::VectorXd::Zero(5));
  CHECK(idle.row("t_sa") == idle.row("t_mix"));

  const SampleWindow heat = simulate_hvac(env, mix, Eigen::VectorXd::Constant(5, 2012));
  CHECK(((heat.row("t_sa") - heat.row("t_mix")).array() - 2.0).abs().maxCoeff() < 1e-12);

  env.mass_flow[2] = 0;
  CHECK_THROWS_AS(simulate_hvac(env, mix, Eigen::VectorXd::Zero(5)), DegenerateInputError);
}

TEST_CASE("noise: zero scale, full mask, Gaussian moments") {
  const SampleWindow w = random_window(3, 50, 1);
  std::mt19937_64 rng(2);
  CHECK(inject_noise(w, {NoiseKind::Gaussian, 0.0, 0.0, 0}, rng).values == w.values);
  CHECK(inject_noise(w, {NoiseKind::ZeroMask, 0.0, 1.0, 0}, rng).values.isZero(0));

  const SampleWindow half = inject_noise(w, {NoiseKind::ZeroMask, 0.0, 0.5, 0}, rng);
  for (Index r = 0; r < 3; ++r) CHECK((half.values.row(r).array() == 0).count() == 25);

  // One channel of 10^6 samples with std 2: noise std 0.2.
  RowMatrixd big(1, 1000000);
  std::mt19937_64 fill(3);
  std::normal_distribution<double> base(0, 2);
  for (Index i = 0; i < big.size(); ++i) big.data()[i] = base(fill);
  const SampleWindow src({"x"}, big, 1.0);
  const double sd = channel_std(big)[0];
  std::mt19937_64 nrng(4);
  const RowMatrixd eps = inject_noise(src, {NoiseKind::Gaussian, 0.1, 0.0, 0}, nrng).values - big;
  const double m = eps.mean();
  const double s = std::sqrt((eps.array() - m).square().mean());
  CHECK(std::abs(m) < 4 * 0.1 * sd / 1e3);
  CHECK(std::abs(s - 0.1 * sd) < 0.01 * 0.1 * sd);
}

TEST_CASE("noise is reproducible from the rng state and validates its spec") {
  const SampleWindow w = random_window(2, 30, 5);
  std::mt19937_64 a(9), b(9);
  const NoiseSpec spec{NoiseKind::Uniform, 0.3, 0.0, 0};
  CHECK(inject_noise(w, spec, a).values == inject_noise(w, spec, b).values);
  CHECK_THROWS_AS((NoiseSpec{NoiseKind::Gaussian, -1, 0, 0}.validate()), ValidationError);
  CHECK_THROWS_AS(parse_noise_kind("pink"), ValidationError);
  CHECK(parse_noise_kind("zero-mask") == NoiseKind::ZeroMask);
}

TEST_CASE("corrupt: identity, bias shift, shape") {
  const SampleWindow w = random_window(3, 400, 6);
  const NoiseSpec none{NoiseKind::Gaussian, 0.0, 0.0, 1};
  CHECK(corrupt(w, none, Eigen::Vector3d::Zero()).values == w.values);

  const SampleWindow shifted = corrupt(w, none, Eigen::Vector3d(5, 0, 0));
  CHECK(shifted.values.rows() == 3);
  CHECK(shifted.values.cols() == 400);
  CHECK(((shifted.values.row(0) - w.values.row(0)).array() - 5).abs().maxCoeff() < 1e-12);
  CHECK(shifted.values.bottomRows(2) == w.values.bottomRows(2));

  const NoiseSpec noisy{NoiseKind::Gaussian, 0.2, 0.0, 8};
  const SampleWindow y = corrupt(w, noisy, Eigen::Vector3d(5, 0, 0));
  const Eigen::VectorXd sd = channel_std(w.values);
  const Eigen::VectorXd shift = (y.values - w.values).rowwise().mean();
  // Sample-mean noise is about 0.2 sd / sqrt(400) = 0.01 sd; allow 5 of those.
  CHECK(std::abs(shift[0] - 5) < 0.05 * sd[0]);
  CHECK(std::abs(shift[1]) < 0.05 * sd[1]);
  CHECK(std::abs(shift[2]) < 0.05 * sd[2]);

  CHECK_THROWS_AS(corrupt(w, none, Eigen::Vector2d::Zero()), DimensionError);
}

TEST_CASE("split_by_alignment examples") {
  const Split s = split_by_alignment(std::vector<double>{3, 1, 4, 2});
  CHECK(s.train == std::vector<std::size_t>{1, 3});
  CHECK(s.test == std::vector<std::size_t>{0, 2});

  const Split ties = split_by_alignment(std::vector<double>(5, 7.0));
  CHECK(ties.train == std::vector<std::size_t>{0, 1, 2});
  CHECK(ties.test == std::vector<std::size_t>{3, 4});

  CHECK_THROWS_AS(split_by_alignment(std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("split_by_alignment partitions 200 random datasets") {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 60)(rng);
    std::vector<double> a(n);
    // Coarse values so that ties occur regularly.
    for (auto& x : a) x = static_cast<double>(std::uniform_int_distribution<int>(0, 12)(rng));
    const Split s = split_by_alignment(a);
    CHECK(s.train.size() == (n + 1) / 2);
    CHECK(s.train.size() + s.test.size() == n);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == n);
    CHECK(*all.rbegin() == n - 1);

    double max_train = -1, min_test = 1e300;
    for (auto i : s.train) max_train = std::max(max_train, a[i]);
    for (auto i : s.test) min_test = std::min(min_test, a[i]);
    CHECK(max_train <= min_test);
    // Within a tied score, train takes the lower indices.
    for (auto i : s.train) {
      for (auto j : s.test) {
        if (a[i] == a[j]) CHECK(i < j);
      }
    }
  }
}

TEST_CASE("split on windows ranks by physics residual") {
  SimulationConfig cfg;
  cfg.family = PhysicsFamily::Co2;
  cfg.windows = 6;
  cfg.steps = 32;
  cfg.dt = 60;
  Dataset ds = simulate_dataset(cfg);
  // Make window 4 clean: its residual is exactly zero, so it must train.
  ds.windows[4] = ds.clean[4];
  const auto scores = alignment_scores(ds.windows, ds.spec);
  CHECK(scores[4] == 0);
  const Split s = split_by_alignment(ds.windows, ds.spec);
  CHECK(std::find(s.train.begin(), s.train.end(), 4u) != s.train.end());
}

TEST_CASE("prepare normalizes the train split") {
  SimulationConfig cfg;
  cfg.windows = 8;
  cfg.steps = 40;
  Dataset ds = simulate_dataset(cfg);
  prepare(ds);
  CHECK(ds.split.train.size() == 4);
  const auto blocks = ds.signal_blocks(ds.split.train);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(7), sq = Eigen::VectorXd::Zero(7);
  double n = 0;
  for (const auto& b : blocks) {
    sum += ds.norm.normalize(b).rowwise().sum();
    n += static_cast<double>(b.cols());
  }
  const Eigen::VectorXd mean = sum / n;
  for (const auto& b : blocks) {
    sq += (ds.norm.normalize(b).colwise() - mean).array().square().matrix().rowwise().sum();
  }
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(((sq / n).cwiseSqrt().array() - 1).abs().maxCoeff() < 1e-12);
}

TEST_CASE("csv round trip reproduces values exactly") {
  const fs::path dir = scratch_dir("csv");
  SampleWindow w = random_window(4, 25, 7);
  w.values(1, 3) = 0.1 + 0.2;
  w.values(2, 5) = -1e-310;
  save_csv(w, dir / "w.csv");
  const SampleWindow back = load_csv(dir / "w.csv", {"ch2", "ch0"});
  CHECK(back.names == w.names);
  CHECK(back.values == w.values);
  CHECK(back.dt == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("csv errors carry the line and the missing channels") {
  const fs::path dir = scratch_dir("csv_err");
  write_text(dir / "gap.csv", "t,a\n0,1\n1,2\n2,3\n4,4\n");
  try {
    load_csv(dir / "gap.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":5:") != std::string::npos);
  }

  write_text(dir / "ragged.csv", "t,a,b\n0,1,2\n1,2\n");
  try {
    load_csv(dir / "ragged.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }

  write_text(dir / "ok.csv", "t,a\n0,1\n1,2\n2,3\n");
  try {
    load_csv(dir / "ok.csv", {"a", "b", "c"});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('b') != std::string::npos);
    CHECK(msg.find('c') != std::string::npos);
  }

  write_text(dir / "nan.csv", "t,a\n0,1\n1,x\n2,3\n");
  CHECK_THROWS_AS(load_csv(dir / "nan.csv"), ParseError);
}

TEST_CASE("dataset manifest round trip") {
  const fs::path dir = scratch_dir("manifest");
  SimulationConfig cfg;
  cfg.family = PhysicsFamily::Hvac;
  cfg.windows = 3;
  cfg.steps = 20;
  cfg.dt = 60;
  const Dataset ds = simulate_dataset(cfg);
  const fs::path manifest = write_dataset(ds, dir);
  const Dataset back = read_manifest(manifest);
  REQUIRE(back.size() == 3);
  REQUIRE(back.has_clean());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.windows[i].values == ds.windows[i].values);
    CHECK(back.clean[i].values == ds.clean[i].values);
  }
  CHECK(back.spec.family == PhysicsFamily::Hvac);
  CHECK(back.spec.signal_channels() == ds.spec.signal_channels());
  CHECK(physics_loss(back.clean[0], back.spec) == 0);
}

TEST_CASE("simulated datasets are reproducible and have the requested bias") {
  SimulationConfig cfg;
  cfg.family = PhysicsFamily::Co2;
  cfg.windows = 4;
  cfg.steps = 64;
  cfg.dt = 60;
  cfg.inherent.scale = 0;
  cfg.bias_fraction = 0.3;
  const Dataset a = simulate_dataset(cfg), b = simulate_dataset(cfg);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a.windows[i].values == b.windows[i].values);
  const auto names = a.spec.signal_channels();
  const NormStats pooled = NormStats::fit(a.signal_blocks({0, 1, 2, 3}, true));
  const RowMatrixd d = a.windows[0].select(names) - a.clean[0].select(names);
  CHECK(((d.colwise() - 0.3 * pooled.std).cwiseAbs().maxCoeff()) < 1e-9);
}
