#include <doctest.h>

#include "oracles.hpp"
#include "semiflow/errors.hpp"
#include "semiflow/models.hpp"

#include <cmath>

using namespace semiflow;

TEST_CASE("every shipped model instantiates") {
  for (const auto& name : model_names()) {
    auto m = instantiate(name);
    CHECK(m.name == name);
    CHECK(m.x0.size() > 0);
    CHECK_FALSE(m.default_directions().empty());
  }
  CHECK_THROWS_AS(instantiate("nope"), ConfigError);
  CHECK_THROWS_AS(instantiate("pure_shift", {{"lamda", 1.0}}), ConfigError);
}

TEST_CASE("invariant charts satisfy the tangency condition") {
  for (const char* name : {"pure_shift", "hjm_constant_vol"}) {
    auto m = instantiate(name);
    REQUIRE(m.chart);
    CHECK(m.chart_invariant);
    const auto t = nagumo_check(*m.chart, m.chart->box().center(), m.semigroup, m.p);
    CHECK(t.residual <= 1e-5);
  }
}

TEST_CASE("riccati model matches its closed form") {
  auto m = instantiate("riccati_scalar", {{"x0", 0.25}});
  CHECK(m.expected.at("blowup_time") == doctest::Approx(4.0));
  SolverOptions so;
  so.n_steps = 100;
  so.tol = 1e-13;
  CHECK(flow(m.semigroup, m.p, m.x0, 1.0, so)[0] == doctest::Approx(oracle::riccati(0.25, 1.0)).epsilon(1e-9));
}

TEST_CASE("hjm drift is sigma0^2 xi") {
  auto m = instantiate("hjm_constant_vol", {{"sigma0", 0.2}});
  const auto p = m.p.eval(0.0, m.x0);
  for (int i = 0; i < p.size(); i += 20) CHECK(p[i] == doctest::Approx(0.04 * m.grid->node(i)));
}
