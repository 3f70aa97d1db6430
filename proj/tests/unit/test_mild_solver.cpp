#include <doctest.h>

#include "oracles.hpp"
#include "semiflow/errors.hpp"
#include "semiflow/mild_solver.hpp"

#include <cmath>

using namespace semiflow;

namespace {

Nonlinearity square() {
  Nonlinearity p([](double, const StateVector& x) { return x.with_values(x.values().array().square().matrix()); },
                 [](double, const StateVector& x, const Direction& y) {
                   return y.with_values(2.0 * x.values().cwiseProduct(y.values()));
                 },
                 [](double, const StateVector&, const Direction& a, const Direction& b) {
                   return a.with_values(2.0 * a.values().cwiseProduct(b.values()));
                 });
  p.smoothness_class = 2;
  return p;
}

Nonlinearity identity_map() {
  Nonlinearity p([](double, const StateVector& x) { return x; }, [](double, const StateVector&, const Direction& y) { return y; });
  p.lipschitz_hint = 1.0;
  return p;
}

StateVector scalar(double v) { return StateVector(Grid::index(1), Eigen::VectorXd::Constant(1, v)); }

}  // namespace

TEST_CASE("quadrature weights integrate cubics exactly") {
  for (int k = 1; k <= 9; ++k) {
    const double dt = 0.1;
    const auto w = detail::quadrature_weights(k, dt);
    double s1 = 0, s3 = 0;
    for (int l = 0; l <= k; ++l) {
      s1 += w[static_cast<std::size_t>(l)];
      s3 += w[static_cast<std::size_t>(l)] * std::pow(l * dt, 3);
    }
    CHECK(s1 == doctest::Approx(k * dt).epsilon(1e-13));
    if (k >= 2) CHECK(s3 == doctest::Approx(std::pow(k * dt, 4) / 4).epsilon(1e-12));
  }
}

TEST_CASE("truncate") {
  auto p = square();
  auto pt = truncate(p, 2.0);
  auto inside = scalar(1.0);
  CHECK(pt.eval(0, inside)[0] == 1.0);
  auto outside = scalar(4.0);
  CHECK(pt.eval(0, outside)[0] == 4.0);
  auto z = truncate(Nonlinearity::zero(), 1.0);
  CHECK(z.eval(0, outside)[0] == 0.0);
  CHECK_THROWS_AS(truncate(p, 0.0), ConfigError);
}

TEST_CASE("solve with zero nonlinearity follows the semigroup") {
  auto g = Grid::uniform(0, 3, 121, 1.0);
  auto s = Semigroup::shift(g);
  auto x0 = StateVector::sample(g, [](double t) { return std::exp(-t); });
  SolverOptions o;
  o.n_steps = 20;
  auto r = solve(s, Nonlinearity::zero(), x0, 0.8, o);
  CHECK(r.trajectory.front().values() == x0.values());
  CHECK(r.times.size() == 41);
  for (std::size_t k = 0; k < r.times.size(); ++k)
    CHECK(norm(r.trajectory[k] - s.apply(r.times[k], x0)) <= 1e-10);
  CHECK(r.horizon == 0.8);
}

TEST_CASE("linear cancellation stays constant") {
  auto s = Semigroup::diagonal(Eigen::VectorXd::Ones(1));
  auto r = solve(s, identity_map(), scalar(1.0), 1.0);
  for (const auto& x : r.trajectory) CHECK(std::abs(x[0] - 1.0) <= 1e-10);
}

TEST_CASE("riccati against closed form and RK4") {
  auto s = Semigroup::diagonal(Eigen::VectorXd::Zero(1));
  SolverOptions o;
  o.n_steps = 200;
  o.truncation_radius = 2.0;
  auto r = solve(s, square(), scalar(0.5), 1.0, o);
  double err = 0;
  for (std::size_t k = 0; k < r.times.size(); ++k)
    err = std::max(err, std::abs(r.trajectory[k][0] - oracle::riccati(0.5, r.times[k])));
  CHECK(err <= 1e-6);
  const Eigen::VectorXd rk = oracle::rk4([](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.array().square()); },
                                         Eigen::VectorXd::Constant(1, 0.5), 1.0, 4000);
  CHECK(std::abs(rk[0] - 1.0) <= 1e-10);
  CHECK(std::abs(r.final_state()[0] - rk[0]) <= 1e-6);
}

TEST_CASE("riccati default truncation radius reaches the horizon") {
  auto s = Semigroup::diagonal(Eigen::VectorXd::Zero(1));
  SolverOptions o;
  o.n_steps = 200;
  auto r = solve(s, square(), scalar(0.5), 1.0, o);
  CHECK(r.truncation_radius == 1.0);
  CHECK_FALSE(r.stopped_early);
}

TEST_CASE("early stop when leaving the ball") {
  auto s = Semigroup::diagonal(Eigen::VectorXd::Zero(1));
  SolverOptions o;
  o.n_steps = 100;
  auto r = solve(s, square(), scalar(0.5), 1.5, o);
  CHECK(r.stopped_early);
  CHECK(r.horizon < 1.0 + 1e-12);
  CHECK(r.horizon > 0.9);
  CHECK_THROWS_AS(flow(s, square(), scalar(0.5), 1.5, o), HorizonExceededError);
}

TEST_CASE("step refinement") {
  auto s = Semigroup::diagonal(Eigen::VectorXd::Zero(1));
  double prev = 0;
  for (int n : {10, 20, 40}) {
    SolverOptions o;
    o.n_steps = n;
    o.truncation_radius = 2.0;
    auto r = solve(s, square(), scalar(0.5), 1.0, o);
    double err = 0;
    for (std::size_t k = 0; k < r.times.size(); ++k)
      err = std::max(err, std::abs(r.trajectory[k][0] - oracle::riccati(0.5, r.times[k])));
    if (prev > 0) CHECK(prev / err >= 3.0);
    prev = err;
  }
}

TEST_CASE("fixed point property") {
  auto g = Grid::uniform(0, 3, 61, 1.0);
  auto s = Semigroup::shift(g);
  Nonlinearity p([](double, const StateVector& x) { return x.with_values(0.2 * x.values().array().sin().matrix()); },
                 [](double, const StateVector& x, const Direction& y) {
                   return y.with_values(0.2 * x.values().array().cos().matrix().cwiseProduct(y.values()));
                 });
  auto x0 = StateVector::sample(g, [](double t) { return std::exp(-t) + 0.5; });
  SolverOptions o;
  o.n_steps = 10;
  auto r = solve(s, p, x0, 0.5, o);
  const double dt = r.times[1];
  for (std::size_t k = 1; k < r.times.size(); ++k) {
    CHECK(norm(s.apply(r.times[k], x0) + r.forcing[k] - r.trajectory[k]) <= 2 * o.tol + 1e-13);
    if (k < 2) continue;
    const auto w = detail::quadrature_weights(static_cast<int>(k), dt);
    StateVector rhs = s.apply(r.times[k], x0);
    for (std::size_t l = 0; l <= k; ++l)
      rhs = axpy(w[l], s.apply(r.times[k] - r.times[l], p.eval(0, r.trajectory[l])), rhs);
    CHECK(norm(rhs - r.trajectory[k]) <= 2 * o.tol + 1e-13);
  }
}

TEST_CASE("semiflow defect") {
  auto s = Semigroup::diagonal(Eigen::VectorXd::Zero(1));
  SolverOptions o;
  o.n_steps = 100;
  CHECK(semiflow_defect(s, square(), scalar(0.5), 0.0, 0.5, o) == 0.0);
  CHECK(semiflow_defect(s, square(), scalar(0.5), 0.5, 0.0, o) == 0.0);
  CHECK(semiflow_defect(s, square(), scalar(0.5), 0.25, 0.25, o) <= 1e-6);
}

TEST_CASE("gronwall certificate") {
  auto s = Semigroup::diagonal(Eigen::VectorXd::Zero(1));
  auto same = gronwall_certificate(s, square(), scalar(0.5), scalar(0.5), 0.5);
  CHECK(same.lhs == 0.0);
  CHECK(same.holds);

  auto dg = Semigroup::diagonal(Eigen::Vector2d(1, 2));
  StateVector a(Grid::index(2), Eigen::Vector2d(1, 1)), b(Grid::index(2), Eigen::Vector2d(0.5, 2));
  auto c0 = gronwall_certificate(dg, Nonlinearity::zero(), a, b, 1.0);
  CHECK(c0.M == 1.0);
  CHECK(c0.C == 0.0);
  CHECK(c0.bound == doctest::Approx(norm(a - b)));
  CHECK(c0.lhs == doctest::Approx(norm(a - b)));
  CHECK(c0.holds);

  SolverOptions o;
  o.truncation_radius = 2.0;
  auto cr = gronwall_certificate(s, square(), scalar(0.5), scalar(0.51), 1.0, o);
  const double exact = oracle::riccati(0.51, 1.0) - oracle::riccati(0.5, 1.0);
  CHECK(cr.lhs == doctest::Approx(exact).epsilon(1e-5));
  CHECK(cr.holds);
  CHECK(cr.lhs / cr.bound < 1.0);
}

TEST_CASE("lipschitz estimate is seeded and bounded") {
  auto p = square();
  auto a = estimate_lipschitz(p, scalar(0.5), 1.0, 200, 3);
  auto b = estimate_lipschitz(p, scalar(0.5), 1.0, 200, 3);
  CHECK(a == b);
  CHECK(a <= 2.0);
  CHECK(a > 1.5);
}

TEST_CASE("solver configuration errors") {
  auto s = Semigroup::diagonal(Eigen::VectorXd::Zero(1));
  SolverOptions o;
  o.n_steps = 1;
  CHECK_THROWS_AS(solve(s, square(), scalar(0.5), 1.0, o), ConfigError);
  CHECK_THROWS_AS(solve(s, square(), scalar(0.5), -1.0), ConfigError);
  auto g = Grid::uniform(0, 3, 61, 1.0);
  CHECK_THROWS_AS(solve(Semigroup::shift(g), Nonlinearity::zero(), StateVector::zeros(g), 1.5),
                  HorizonExceededError);
  SolverOptions tight;
  tight.max_picard = 1;
  CHECK_THROWS_AS(solve(s, square(), scalar(0.5), 1.0, tight), ConvergenceError);
}
