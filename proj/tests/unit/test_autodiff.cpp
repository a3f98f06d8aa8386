#include <doctest.h>

#include <random>

#include "physden/adam.hpp"
#include "physden/autodiff.hpp"
#include "physden/checks.hpp"
#include "physden/gradcheck.hpp"

using namespace physden;

namespace {

// Direct zero-padded sliding-window sum, written independently of conv1d_values.
RowMatrixd naive_conv(const Tensord& x, const Tensord& w, const Tensord& b) {
  const Index cin = x.dim(0), t = x.dim(1), cout = w.dim(0), k = w.dim(2), half = k / 2;
  RowMatrixd out(cout, t);
  for (Index o = 0; o < cout; ++o) {
    for (Index s = 0; s < t; ++s) {
      double acc = b[o];
      for (Index i = 0; i < cin; ++i) {
        for (Index j = 0; j < k; ++j) {
          const Index src = s + j - half;
          if (src >= 0 && src < t) acc += w[(o * cin + i) * k + j] * x[i * t + src];
        }
      }
      out(o, s) = acc;
    }
  }
  return out;
}

Tensord random_tensor(Shape shape, std::mt19937_64& rng) {
  Tensord t(std::move(shape));
  std::uniform_real_distribution<double> u(-1, 1);
  for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

}  // namespace

TEST_CASE("conv1d identity and delta kernels pass the input through") {
  const Tensord x({1, 3}, {1, 2, 3});
  CHECK(conv1d_values(x, Tensord({1, 1, 1}, {1}), Tensord({1}, {0})) == x.matrix());
  const Tensord y({1, 3}, {4, 5, 6});
  CHECK(conv1d_values(y, Tensord({1, 1, 3}, {0, 1, 0}), Tensord({1}, {0})) == y.matrix());
}

TEST_CASE("conv1d box kernel uses zero padding") {
  const RowMatrixd out = conv1d_values(Tensord({1, 3}, {1, 2, 3}), Tensord({1, 1, 3}, {1, 1, 1}), Tensord({1}, {0}));
  CHECK(out(0, 0) == 3);
  CHECK(out(0, 1) == 6);
  CHECK(out(0, 2) == 5);
}

TEST_CASE("conv1d matches a direct loop on random shapes") {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 20; ++n) {
    const Index cin = 1 + n % 3, cout = 1 + (n / 3) % 3, t = 5 + n, k = 2 * (n % 3) + 1;
    const Tensord x = random_tensor({cin, t}, rng), w = random_tensor({cout, cin, k}, rng), b = random_tensor({cout}, rng);
    CHECK((conv1d_values(x, w, b) - naive_conv(x, w, b)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("conv1d rejects even kernels and mismatched channels") {
  const Tensord x({2, 5});
  CHECK_THROWS_AS(conv1d_values(x, Tensord({1, 2, 2}), Tensord({1})), UnsupportedKernelError);
  CHECK_THROWS_AS(conv1d_values(x, Tensord({1, 3, 3}), Tensord({1})), DimensionError);
  CHECK_THROWS_AS(conv1d_values(x, Tensord({1, 2, 3}), Tensord({2})), DimensionError);
}

TEST_CASE("conv1d is linear in its input") {
  std::mt19937_64 rng(3);
  const Tensord w = random_tensor({4, 3, 5}, rng), zero({4});
  for (int n = 0; n < 10; ++n) {
    const Tensord x = random_tensor({3, 17}, rng), y = random_tensor({3, 17}, rng);
    const double a = 1.7, c = -0.4;
    Tensord mix({3, 17});
    mix.data() = a * x.data() + c * y.data();
    const RowMatrixd lhs = conv1d_values(mix, w, zero);
    const RowMatrixd rhs = a * conv1d_values(x, w, zero) + c * conv1d_values(y, w, zero);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("relu values and subgradient") {
  Tape64 tape;
  const Var64 x = tape.leaf(Tensord({3}, {-1, 0, 2}), true);
  const Var64 r = relu(x);
  CHECK(r.value() == Tensord({3}, {0, 0, 2}));

  const Var64 pos = tape.constant(Tensord({2}, {0.5, 3}));
  CHECK(relu(pos).value() == pos.value());

  Tape64 t2;
  const Var64 z = t2.leaf(Tensord({2}, {-1, 2}), true);
  t2.backward(sum(relu(z)));
  CHECK(t2.grad(z) == Tensord({2}, {0, 1}));
}

TEST_CASE("mse values and gradient") {
  Tape64 tape;
  const Var64 a = tape.leaf(Tensord({2}, {0, 0}), true);
  const Var64 b = tape.constant(Tensord({2}, {3, 4}));
  CHECK(mse(a, a).value().item() == 0);
  CHECK(mse(a, b).value().item() == doctest::Approx(12.5).epsilon(1e-15));

  Tape64 t2;
  const Var64 one = t2.leaf(Tensord({1}, {1}), true);
  t2.backward(mse(one, t2.constant(Tensord({1}, {0}))));
  CHECK(t2.grad(one)[0] == 2);
}

TEST_CASE("backward of a sum gives ones, repeats identically, and needs a scalar") {
  Tape64 tape;
  const Var64 x = tape.leaf(Tensord({2, 3}, {1, 2, 3, 4, 5, 6}), true);
  const Var64 loss = sum(x * x);
  tape.backward(sum(x));
  CHECK(tape.grad(x) == Tensord::constant({2, 3}, 1.0));

  tape.backward(loss);
  const Tensord first = tape.grad(x);
  tape.backward(loss);
  CHECK(tape.grad(x) == first);

  CHECK_THROWS_AS(tape.backward(x), ContractViolation);
}

TEST_CASE("mse of conv1d agrees with finite differences") {
  std::mt19937_64 rng(5);
  const Tensord y = random_tensor({2, 9}, rng);
  auto graph = [&](Tape64& tape, std::span<const Var64> v) { return mse(conv1d(v[0], v[1], v[2]), tape.constant(y)); };
  const auto r =
      gradient_check(graph, {random_tensor({3, 9}, rng), random_tensor({2, 3, 5}, rng), random_tensor({2}, rng)});
  CHECK(r.max_relative_error < 1e-5);
}

TEST_CASE("gradient suite covers every differentiable operation") {
  const auto results = run_gradient_suite(20, 1e-5, 1);
  CHECK(results.size() == 8);
  for (const auto& r : results) {
    INFO(r.operation << " worst " << r.worst_error);
    CHECK(r.instances == 20);
    CHECK(r.passed);
  }
}

TEST_CASE("gradient check notices a wrong backward") {
  // Forward x*x, but backward reports x instead of 2x.
  auto graph = [](Tape64& tape, std::span<const Var64> v) {
    const Var64 sq = tape.record(Tensord::scalar(v[0].value().item() * v[0].value().item()), {v[0].id()},
                                 [](Tape64& t, std::size_t self) {
                                   const auto in = t.input(self, 0);
                                   t.accumulate(in, t.grad_of(self) * t.value(in)[0]);
                                 });
    return sq;
  };
  CHECK(gradient_check(graph, {Tensord({1}, {1.5})}).max_relative_error > 0.4);
}

TEST_CASE("cumsum_exclusive and time_derivative values") {
  Tape64 tape;
  const Var64 x = tape.constant(Tensord({1, 4}, {1, 2, 3, 4}));
  CHECK(cumsum_exclusive(x).value() == Tensord({1, 4}, {0, 1, 3, 6}));

  RowMatrixd c = RowMatrixd::Constant(2, 6, 3.5);
  CHECK(time_derivative_values<double>(c, 0.1, 1).cwiseAbs().maxCoeff() == 0);

  RowMatrixd sq(1, 6);
  for (Index t = 0; t < 6; ++t) sq(0, t) = static_cast<double>(t * t);
  CHECK((time_derivative_values<double>(sq, 1.0, 2).array() == 2.0).all());
  CHECK_THROWS_AS(time_derivative_values<double>(RowMatrixd::Zero(1, 2), 1.0, 1), DimensionError);
}

TEST_CASE("second difference of a sinusoid stays within its truncation bound") {
  for (double dt : {0.1, 0.05, 0.01}) {
    const double omega = 2.3;
    const Index n = 200;
    RowMatrixd x(1, n);
    for (Index t = 0; t < n; ++t) x(0, t) = std::sin(omega * static_cast<double>(t) * dt);
    const RowMatrixd d2 = time_derivative_values<double>(x, dt, 2);
    double worst = 0;
    for (Index t = 1; t + 1 < n; ++t) {
      worst = std::max(worst, std::abs(d2(0, t - 1) + omega * omega * x(0, t)));
    }
    CHECK(worst <= std::pow(omega, 4) * dt * dt / 12 * 1.0);
  }
}

TEST_CASE("adam: zero gradient leaves parameters, first step moves by lr") {
  Adam<double> adam(AdamConfig<double>{1e-3});
  std::vector<Tensord> p{Tensord({2}, {0.5, -1})};
  std::vector<Tensord> g{Tensord({2}, {0, 0})};
  adam.step(p, g);
  CHECK(p[0] == Tensord({2}, {0.5, -1}));

  Adam<double> fresh(AdamConfig<double>{1e-3});
  std::vector<Tensord> q{Tensord::scalar(2.0)};
  std::vector<Tensord> gq{Tensord::scalar(-0.37)};
  fresh.step(q, gq);
  // t=1: m_hat = g, v_hat = g^2, step = lr g / (|g| + eps).
  const double expected = 2.0 + 1e-3 * 0.37 / (0.37 + 1e-8);
  CHECK(std::abs(q[0].item() - 2.0) == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(q[0].item() == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("adam steps are deterministic and refuse non-finite gradients") {
  auto run = [] {
    Adam<double> adam(AdamConfig<double>{1e-2});
    std::vector<Tensord> p{Tensord({3}, {1, 2, 3})};
    for (int i = 0; i < 5; ++i) {
      std::vector<Tensord> g{Tensord({3}, {0.1 * i, -0.2, 0.3})};
      adam.step(p, g);
    }
    return p[0];
  };
  CHECK(run() == run());

  Adam<double> adam;
  std::vector<Tensord> p{Tensord({2}, {1, 2})};
  std::vector<Tensord> bad{Tensord({2}, {0.0, std::nan("")})};
  CHECK_THROWS_AS(adam.step(p, bad), NumericalError);
}
