#include "physden/checks.hpp"

#include <functional>
#include <random>

#include "physden/gradcheck.hpp"
#include "physden/model.hpp"
#include "physden/physics.hpp"

namespace physden {

namespace {

using Rng = std::mt19937_64;

Tensord random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensord t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

// sum(out * probe): a random linear functional exercises every output entry.
Var64 probe(Tape64& tape, const Var64& out, const Tensord& weights) {
  return sum(out * tape.constant(weights));
}

Eigen::VectorXd random_series(Index n, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

using Instance = std::function<double(Rng&)>;

double check_conv1d(Rng& rng) {
  std::uniform_int_distribution<Index> ch(1, 3), len(4, 10), kernel(0, 2);
  const Index cin = ch(rng), cout = ch(rng), t = len(rng), k = 2 * kernel(rng) + 1;
  const Tensord r = random_tensor({cout, t}, rng);
  auto graph = [&](Tape64& tape, std::span<const Var64> v) { return probe(tape, conv1d(v[0], v[1], v[2]), r); };
  return gradient_check(graph, {random_tensor({cin, t}, rng), random_tensor({cout, cin, k}, rng),
                                random_tensor({cout}, rng)})
      .max_relative_error;
}

double check_relu(Rng& rng) {
  Tensord x = random_tensor({3, 6}, rng);
  // Keep entries away from the kink so the finite difference is well defined.
  for (Index i = 0; i < x.size(); ++i) x[i] = x[i] < 0 ? x[i] - 0.05 : x[i] + 0.05;
  const Tensord r = random_tensor({3, 6}, rng);
  auto graph = [&](Tape64& tape, std::span<const Var64> v) { return probe(tape, relu(v[0]), r); };
  return gradient_check(graph, {x}).max_relative_error;
}

double check_mse(Rng& rng) {
  auto graph = [](Tape64&, std::span<const Var64> v) { return mse(v[0], v[1]); };
  return gradient_check(graph, {random_tensor({2, 7}, rng), random_tensor({2, 7}, rng)}).max_relative_error;
}

double check_ins_accel(Rng& rng) {
  const Index t = std::uniform_int_distribution<Index>(4, 9)(rng);
  InsEnvironment env;
  env.dt = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
  const Tensord r = random_tensor({3, t - 2}, rng);
  auto graph = [&](Tape64& tape, std::span<const Var64> v) {
    return probe(tape, residual_ins_accel(v[0], v[1], v[2], env), r);
  };
  Tensord q = random_tensor({4, t}, rng);
  q.matrix().row(0).array() += 2.0;  // keep the norm away from zero
  return gradient_check(graph, {random_tensor({3, t}, rng), q, random_tensor({3, t}, rng, -10, 10)})
      .max_relative_error;
}

double check_ins_quat(Rng& rng) {
  const Index t = std::uniform_int_distribution<Index>(4, 9)(rng);
  InsEnvironment env;
  env.dt = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
  const Tensord r = random_tensor({4, t - 2}, rng);
  auto graph = [&](Tape64& tape, std::span<const Var64> v) { return probe(tape, residual_ins_quat(v[0], v[1], env), r); };
  Tensord q = random_tensor({4, t}, rng);
  q.matrix().row(0).array() += 2.0;
  return gradient_check(graph, {q, random_tensor({3, t}, rng, -3, 3)}).max_relative_error;
}

double check_co2(Rng& rng) {
  const Index t = std::uniform_int_distribution<Index>(3, 9)(rng);
  Co2Environment env;
  env.room_volume = std::uniform_real_distribution<double>(20, 100)(rng);
  env.dt = 60;
  env.flow = random_series(t, rng, 0.01, 0.1);
  env.inflow_ppm = random_series(t, rng, 380, 420);
  env.occupants = random_series(t, rng, 0, 5);
  env.initial_ppm = 400;
  const Tensord r = random_tensor({1, t}, rng);
  auto graph = [&](Tape64& tape, std::span<const Var64> v) { return probe(tape, residual_co2(v[0], v[1], env), r); };
  return gradient_check(graph, {random_tensor({1, t}, rng, 400, 1200), random_tensor({1, t}, rng, 400, 1200)})
      .max_relative_error;
}

double check_hvac(Rng& rng) {
  const Index t = std::uniform_int_distribution<Index>(3, 9)(rng);
  HvacEnvironment env;
  env.dt = 60;
  env.mass_flow = random_series(t, rng, 0.5, 2.0);
  env.specific_heat = random_series(t, rng, 1000, 1010);
  const Tensord r = random_tensor({1, t}, rng);
  auto graph = [&](Tape64& tape, std::span<const Var64> v) {
    return probe(tape, residual_hvac(v[0], v[1], v[2], env), r);
  };
  return gradient_check(graph, {random_tensor({1, t}, rng, 10, 30), random_tensor({1, t}, rng, 10, 30),
                                random_tensor({1, t}, rng, -5000, 5000)})
      .max_relative_error;
}

double check_model(Rng& rng) {
  const Index c = 2, t = 16;
  ModelParams init = init_params(c, {3, 4, 3}, rng());
  // Zero biases put whole dead regions exactly on the relu kink; move off it.
  for (std::size_t l = 0; l < 4; ++l) init.bias(l) = random_tensor(init.bias(l).shape(), rng, -0.2, 0.2);
  const Tensord x = random_tensor({c, t}, rng), y = random_tensor({c, t}, rng);
  auto graph = [&](Tape64& tape, std::span<const Var64> v) {
    BoundParams p;
    for (std::size_t i = 0; i < 8; ++i) p.vars[i] = v[i];
    return mse(forward(p, tape.constant(x)), tape.constant(y));
  };
  return gradient_check(graph, init.tensors).max_relative_error;
}

}  // namespace

std::vector<GradientSuiteEntry> run_gradient_suite(int instances, double tolerance, std::uint64_t seed) {
  const std::vector<std::pair<std::string, Instance>> ops{
      {"conv1d", check_conv1d},           {"relu", check_relu},           {"mse", check_mse},
      {"residual_ins_accel", check_ins_accel}, {"residual_ins_quat", check_ins_quat}, {"residual_co2", check_co2},
      {"residual_hvac", check_hvac},      {"model", check_model},
  };
  std::vector<GradientSuiteEntry> out;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    Rng rng(seed * 1000003u + i);
    GradientSuiteEntry e;
    e.operation = ops[i].first;
    for (int k = 0; k < instances; ++k) {
      e.worst_error = std::max(e.worst_error, ops[i].second(rng));
      ++e.instances;
    }
    e.passed = e.worst_error < tolerance;
    out.push_back(e);
  }
  return out;
}

}  // namespace physden
