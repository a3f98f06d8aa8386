#include <doctest.h>

#include <sstream>

#include "physden/gradcheck.hpp"
#include "physden/training.hpp"

using namespace physden;

namespace {

Dataset small_co2(std::uint64_t seed = 3, Index windows = 12) {
  SimulationConfig cfg;
  cfg.family = PhysicsFamily::Co2;
  cfg.windows = windows;
  cfg.steps = 32;
  cfg.dt = 60;
  cfg.seed = seed;
  Dataset ds = simulate_dataset(cfg);
  prepare(ds);
  return ds;
}

TrainConfig small_train() {
  TrainConfig t;
  t.widths = {4, 6, 4};
  t.epochs = 5;
  t.batch_size = 3;
  t.lr = 1e-3;
  t.seed = 11;
  return t;
}

}  // namespace

TEST_CASE("parse_lambda") {
  CHECK(parse_lambda("adaptive").mode == LambdaMode::Adaptive);
  CHECK(parse_lambda("2.5").value == 2.5);
  CHECK(parse_lambda("fixed(0)").mode == LambdaMode::Fixed);
  CHECK_THROWS_AS(parse_lambda("-1"), ValidationError);
  CHECK_THROWS_AS(parse_lambda("lots"), ValidationError);
}

TEST_CASE("balance_lambda ratio and clamps") {
  CHECK(balance_lambda(0.5, 0.005) == doctest::Approx(100).epsilon(1e-14));
  CHECK(balance_lambda(1.0, 0.0) == kLambdaMax);
  CHECK(balance_lambda(1e-20, 1.0) == kLambdaMin);
  CHECK(balance_lambda(1e20, 1.0) == kLambdaMax);
}

TEST_CASE("combined_loss examples") {
  // Single-channel HVAC-like window with a known residual: dQ = 0, t_sa - t_mix = 1.
  const std::vector<std::string> names{"t_sa", "t_mix", "dQ", "m_dot", "cp"};
  RowMatrixd v(5, 4);
  v.row(0).setConstant(21);
  v.row(1).setConstant(20);
  v.row(2).setZero();
  v.row(3).setOnes();
  v.row(4).setConstant(1006);
  const SampleWindow out(names, v, 60);
  RowMatrixd tv = v;
  tv.row(0).array() += 0.5;
  const SampleWindow target(names, tv, 60);
  const PhysicsSpec spec = PhysicsSpec::hvac();

  const LossTerms zero = combined_loss(out, target, spec, LambdaSetting::fixed(0));
  CHECK(zero.total == zero.l_rec);
  CHECK(zero.l_phy == doctest::Approx(1006.0 * 1006.0));

  const LossTerms fixed = combined_loss(out, target, spec, LambdaSetting::fixed(2));
  CHECK(fixed.total == doctest::Approx(fixed.l_rec + 2 * fixed.l_phy));

  const LossTerms ad = combined_loss(out, target, spec, LambdaSetting::adaptive());
  CHECK(ad.lambda * ad.l_phy / ad.l_rec == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ad.total == doctest::Approx(2 * ad.l_rec).epsilon(1e-12));
}

TEST_CASE("adaptive lambda: l_rec 0.5 and l_phy 0.005 give lambda 100 and total 1") {
  const double lambda = balance_lambda(0.5, 0.005);
  CHECK(lambda == doctest::Approx(100).epsilon(1e-14));
  CHECK(0.5 + lambda * 0.005 == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("total gradient is the rec gradient plus lambda times the physics gradient") {
  const Dataset ds = small_co2();
  const SampleWindow& w = ds.windows[ds.split.train[0]];
  const PhysicsBinding binding(ds.spec, w);
  const RowMatrixd y = ds.norm.normalize(w.select(ds.spec.signal_channels()));
  ModelParams p = init_params(2, {3, 3, 3}, 5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (std::size_t l = 0; l < 4; ++l) {
    for (Index i = 0; i < p.bias(l).size(); ++i) p.bias(l)[i] = u(rng);
  }
  RowMatrixd z = y;
  for (Index i = 0; i < z.size(); ++i) z.data()[i] += u(rng);

  auto terms = [&](Tape64& tape, std::span<const Var64> v) {
    BoundParams b;
    for (std::size_t i = 0; i < 8; ++i) b.vars[i] = v[i];
    const Var64 out = forward(b, tape.constant(Tensord::from_matrix(z)));
    return std::pair{mse(out, tape.constant(Tensord::from_matrix(y))),
                     binding.loss(affine_rows(out, ds.norm.std, ds.norm.mean))};
  };
  // lambda taken at the base point and held fixed for every perturbation.
  Tape64 base;
  std::vector<Var64> vars;
  for (const auto& t : p.tensors) vars.push_back(base.leaf(t, true));
  const auto [r0, f0] = terms(base, vars);
  const double lambda = r0.value().item() / f0.value().item();

  auto total = [&](Tape64& tape, std::span<const Var64> v) {
    const auto [rec, phy] = terms(tape, v);
    return rec + phy * lambda;
  };
  CHECK(gradient_check(total, p.tensors).max_relative_error < 1e-5);
}

TEST_CASE("training is deterministic, also with worker threads") {
  const Dataset ds = small_co2();
  TrainConfig cfg = small_train();
  const TrainResult a = train(ds, cfg), b = train(ds, cfg);
  CHECK(a.model.params == b.model.params);
  cfg.threads = 3;
  CHECK(train(ds, cfg).model.params == a.model.params);
  cfg.threads = 1;
  cfg.seed = 12;
  CHECK_FALSE(train(ds, cfg).model.params == a.model.params);
}

TEST_CASE("pretrain_fraction 1 follows the rec-only trajectory") {
  const Dataset ds = small_co2();
  TrainConfig pre = small_train();
  pre.pretrain_fraction = 1.0;
  TrainConfig naive = small_train();
  naive.lambda = LambdaSetting::fixed(0);
  naive.pretrain_fraction = 0.0;
  const TrainResult a = train(ds, pre), b = train(ds, naive);
  CHECK(a.model.params == b.model.params);
  for (const auto& r : a.log.rows) {
    CHECK(r.phase == 1);
    CHECK_FALSE(r.lambda.has_value());
  }
  // lambda = 0 still reports the physics loss it ignores.
  for (const auto& r : b.log.rows) {
    CHECK(r.l_phy.has_value());
    CHECK(*r.lambda == 0);
    CHECK(r.total == r.l_rec);
  }
}

TEST_CASE("training log: phases, absent lambda in phase 1, balanced adaptive lambda") {
  const Dataset ds = small_co2();
  TrainConfig cfg = small_train();
  cfg.epochs = 10;
  const TrainResult r = train(ds, cfg);
  CHECK(cfg.pretrain_epochs() == 2);
  const auto per_epoch = (ds.split.train.size() + 2) / 3;
  CHECK(r.log.rows.size() == per_epoch * 10);
  int transitions = 0;
  for (std::size_t i = 0; i < r.log.rows.size(); ++i) {
    const LogRow& row = r.log.rows[i];
    CHECK(row.iter == static_cast<long>(i));
    CHECK(row.phase == (row.epoch < 2 ? 1 : 2));
    if (i > 0 && r.log.rows[i - 1].phase != row.phase) ++transitions;
    if (row.phase == 1) {
      CHECK_FALSE(row.l_phy.has_value());
      CHECK_FALSE(row.lambda.has_value());
    } else if (*row.lambda > kLambdaMin && *row.lambda < kLambdaMax) {
      CHECK(std::abs(*row.lambda * *row.l_phy / row.l_rec - 1) <= 1e-9);
    }
  }
  CHECK(transitions == 1);

  std::ostringstream os;
  r.log.write_csv(os);
  std::string header;
  std::getline(std::istringstream(os.str()) >> std::ws, header);
  CHECK(header == "epoch,iter,phase,l_rec,l_phy,lambda,total");
  CHECK(os.str().find("\n0,0,1,") != std::string::npos);
}

TEST_CASE("invalid training configurations are rejected") {
  const Dataset ds = small_co2();
  TrainConfig cfg = small_train();
  cfg.lr = 0;
  CHECK_THROWS_AS(train(ds, cfg), ValidationError);
  cfg = small_train();
  cfg.pretrain_fraction = 1.5;
  CHECK_THROWS_AS(train(ds, cfg), ValidationError);
  Dataset unprepared = ds;
  unprepared.split = {};
  CHECK_THROWS_AS(train(unprepared, small_train()), ValidationError);
}

TEST_CASE("INS fixture with default optimizer settings reduces l_rec and l_phy") {
  SimulationConfig sim;  // 64 windows, T = 128, seed 7
  sim.bias_fraction = 0.3;
  Dataset ds = simulate_dataset(sim);
  prepare(ds);
  double noisy = 0;
  for (auto i : ds.split.train) noisy += physics_loss(ds.windows[i], ds.spec);
  noisy /= static_cast<double>(ds.split.train.size());

  TrainConfig cfg;
  cfg.widths = {16, 32, 16};
  cfg.epochs = 30;
  cfg.seed = 7;
  const TrainResult r = train(ds, cfg);
  const auto& rows = r.log.rows;
  INFO("l_rec " << rows.front().l_rec << " -> " << rows.back().l_rec << ", l_phy " << *rows.back().l_phy
                << " vs noisy " << noisy);
  CHECK(rows.back().l_rec < rows.front().l_rec);
  CHECK(*rows.back().l_phy < noisy);
}

TEST_CASE("denoise_windows replaces only the signal channels") {
  const Dataset ds = small_co2(4, 4);
  TrainConfig cfg = small_train();
  cfg.epochs = 1;
  const TrainResult r = train(ds, cfg);
  const auto out = denoise_windows(r.model, ds.windows);
  REQUIRE(out.size() == ds.windows.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].row("flow") == ds.windows[i].row("flow"));
    CHECK(out[i].select(r.model.channels) == r.model.apply(ds.windows[i].select(r.model.channels)));
  }
}

TEST_CASE("INS fixture: trailing-10-epoch mean total is below the leading-10-epoch mean") {
  SimulationConfig sim;
  sim.bias_fraction = 0.3;
  Dataset ds = simulate_dataset(sim);
  prepare(ds);
  TrainConfig cfg;
  cfg.widths = {16, 32, 16};
  cfg.epochs = 30;
  cfg.seed = 7;
  cfg.lr = 1e-3;
  cfg.batch_size = 4;
  cfg.residual = true;
  const TrainResult r = train(ds, cfg);
  const double lead = r.log.mean_total(0, 10), trail = r.log.mean_total(20, 30);
  INFO("leading " << lead << ", trailing " << trail);
  CHECK(trail < lead);
}
