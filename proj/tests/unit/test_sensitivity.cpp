#include <doctest.h>

#include "oracles.hpp"
#include "semiflow/errors.hpp"
#include "semiflow/models.hpp"
#include "semiflow/sensitivity.hpp"

#include <cmath>

using namespace semiflow;

namespace {

StateVector scalar(double v) { return StateVector(Grid::index(1), Eigen::VectorXd::Constant(1, v)); }

SolverOptions fine(int n = 100) {
  SolverOptions so;
  so.n_steps = n;
  so.tol = 1e-13;
  return so;
}

}  // namespace

TEST_CASE("first and second variation of the riccati flow") {
  auto m = instantiate("riccati_scalar");
  const auto js = propagate_jet(m.semigroup, m.p, m.x0, {scalar(1.0)}, 1.0, 2, fine(200));
  double e1 = 0, e2 = 0;
  for (std::size_t k = 0; k < js.size(); ++k) {
    const double t = js.times()[k];
    e1 = std::max(e1, std::abs(js.first[0][k][0] - oracle::riccati_dx(0.5, t)));
    e2 = std::max(e2, std::abs(js.second[0][0][k][0] - oracle::riccati_dxx(0.5, t)));
  }
  CHECK(e1 < 1e-6);
  CHECK(e2 < 1e-5);
  const auto jet = js.at(js.size() - 1);
  CHECK(jet.time == doctest::Approx(1.0));
  CHECK(jet.second.has_value());
}

TEST_CASE("linear model: psi is the flow itself and psi2 vanishes") {
  auto m = instantiate("diagonal_linear");
  const auto dirs = m.default_directions();
  const auto js = propagate_jet(m.semigroup, m.p, m.x0, dirs, 0.5, 2, fine(50));
  // x' = (-diag(lambda) + B) x
  Eigen::Matrix2d a;
  a << -1.0, 0.5, -0.5, -2.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Eigen::VectorXd want =
        oracle::rk4([&](const Eigen::VectorXd& y) { return Eigen::VectorXd(a * y); }, dirs[i].values(), 0.5, 2000);
    CHECK((js.first[i].back().values() - want).lpNorm<Eigen::Infinity>() < 1e-9);
    for (std::size_t j = 0; j < dirs.size(); ++j)
      for (const auto& s : js.second[i][j]) CHECK(norm(s) <= 1e-12);
  }
}

TEST_CASE("second order needs a hessian") {
  auto m = instantiate("riccati_scalar");
  Nonlinearity no_hess([](double, const StateVector& x) { return x; },
                       [](double, const StateVector&, const Direction& y) { return y; });
  CHECK_THROWS_AS(propagate_jet(m.semigroup, no_hess, m.x0, {scalar(1.0)}, 0.5, 2, fine(10)), CapabilityError);
}

TEST_CASE("fd_check converges at second order") {
  auto m = instantiate("riccati_scalar");
  const auto r = fd_check(m.semigroup, m.p, m.x0, scalar(1.0), 1.0, {4e-3, 2e-3, 1e-3, 5e-4}, fine(200));
  CHECK(r.best_error < 1e-5);
  CHECK(r.observed_order == doctest::Approx(2.0).epsilon(0.05));
  CHECK(r.points_used == 4);
}

TEST_CASE("time derivative reconstruction recovers mu(x0)") {
  auto m = instantiate("riccati_scalar");
  const auto js = propagate_jet(m.semigroup, m.p, m.x0, {scalar(1.0)}, 0.2, 1, fine(20));
  for (double h : {0.02, 0.1, 0.2}) {
    const auto td = time_derivative_reconstruct(js, h);
    // integral of riccati_dx over [0, h] is h / (1 - 0.5 h)
    const double integral = h / (1.0 - 0.5 * h);
    const double v = (oracle::riccati(0.5, h) - 0.5) / integral;
    CHECK(td.derivative[0] == doctest::Approx(v).epsilon(1e-7));
    CHECK(td.residual < 1e-8);
  }
  CHECK_THROWS_AS(time_derivative_reconstruct(js, 0.013), DomainError);
}

TEST_CASE("restricted differential is the identity at t = 0") {
  auto m = instantiate("pure_shift");
  const auto basis = m.chart->jacobian(m.chart->box().center());
  const auto js = propagate_jet(m.semigroup, m.p, m.x0, basis, 0.1, 1, fine(4));
  const auto prof = restricted_differential_invertibility(js, basis);
  CHECK(prof.sigma_min.front() == 1.0);
  // psi(t) b = S_t b: (1, e^{-xi}) -> (1, e^{-t} e^{-xi})
  CHECK(prof.sigma_min.back() == doctest::Approx(std::exp(-0.1)).epsilon(1e-6));
  CHECK_FALSE(prof.first_below.has_value());
}

TEST_CASE("backward embedding round trip and boundary failure") {
  auto m = instantiate("pure_shift");
  const Chart& c = *m.chart;
  const Eigen::Vector2d u(1.1, 0.9);
  const double t = 0.1;
  const auto y = flow(m.semigroup, m.p, c.embed(u), t, fine(20));
  const auto e = backward_embed(m.semigroup, m.p, y, t, c, fine(20));
  CHECK((e.params - u).norm() < 1e-7);
  CHECK(norm(e.point - c.embed(u)) < 1e-6);

  auto b = instantiate("pure_shift", {{"boundary_chart", true}});
  const Chart& bc = *b.chart;
  // y = Fl(t, x) with x on the face v = 0 pulled further out; no preimage
  // with v >= 0 exists
  Eigen::Vector2d face(1.0, 0.0);
  const auto yb = flow(b.semigroup, b.p, bc.embed(face), t, fine(20));
  const auto beyond = yb + 0.05 * (yb - flow(b.semigroup, b.p, bc.embed(Eigen::Vector2d(1.0, 0.1)), t, fine(20)));
  CHECK_THROWS_AS(backward_embed(b.semigroup, b.p, beyond, t, bc, fine(20)), NoEmbeddingError);
}
