#include "semiflow/mild_solver.hpp"

#include "semiflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace semiflow {

namespace {

constexpr double kBallSlack = 1e-9;

}  // namespace

int SolverOptions::steps_for(double horizon) const {
  int n = n_steps;
  if (max_step) {
    if (!(*max_step > 0.0)) throw ConfigError("max_step must be positive");
    const double need = std::ceil(horizon / *max_step - 1e-9);
    n = std::max(n, static_cast<int>(need));
  }
  return n;
}

std::size_t SolveReport::node_index(double t) const {
  const double scale = 1e-9 * (1.0 + std::abs(requested_horizon));
  for (std::size_t k = 0; k < times.size(); ++k)
    if (std::abs(times[k] - t) <= scale) return k;
  throw DomainError("time " + std::to_string(t) + " is not a quadrature node of the solve");
}

double SolveReport::gronwall_factor() const {
  if (!M || !C) throw ConfigError("solve was run without certify_constants");
  return *M * std::exp(*M * *C * horizon);
}

namespace detail {

std::vector<double> quadrature_weights(int k, double dt) {
  std::vector<double> w(static_cast<std::size_t>(k + 1), 0.0);
  if (k == 0) return w;
  if (k == 1) {
    w[0] = w[1] = 0.5 * dt;
    return w;
  }
  const int simpson_end = (k % 2 == 0) ? k : k - 3;
  for (int i = 0; i < simpson_end; i += 2) {
    w[static_cast<std::size_t>(i)] += dt / 3.0;
    w[static_cast<std::size_t>(i + 1)] += 4.0 * dt / 3.0;
    w[static_cast<std::size_t>(i + 2)] += dt / 3.0;
  }
  if (k % 2 == 1) {
    const double c = 3.0 * dt / 8.0;
    w[static_cast<std::size_t>(k - 3)] += c;
    w[static_cast<std::size_t>(k - 2)] += 3.0 * c;
    w[static_cast<std::size_t>(k - 1)] += 3.0 * c;
    w[static_cast<std::size_t>(k)] += c;
  }
  return w;
}

MarchResult march(const Semigroup& s, const StateVector& u0, int n_steps, double dt, const Integrand& integrand,
                  double tol, int max_picard, const std::function<bool(const StateVector&)>& inside) {
  const bool shift = s.kind() == SemigroupKind::shift;
  const int n_nodes = 2 * n_steps + 1;
  std::optional<CubicSpline> u0_spline;
  if (shift) u0_spline.emplace(u0);

  auto homogeneous = [&](int k) {
    if (k == 0) return u0;
    return shift ? s.apply(k * dt, u0, *u0_spline) : s.apply(k * dt, u0);
  };

  std::vector<StateVector> g;
  std::vector<std::optional<CubicSpline>> g_spline;
  g.reserve(static_cast<std::size_t>(n_nodes));
  g_spline.reserve(static_cast<std::size_t>(n_nodes));
  auto propagate = [&](double tau, int l) -> Eigen::VectorXd {
    const auto& gl = g[static_cast<std::size_t>(l)];
    if (tau == 0.0) return gl.values();
    return (shift ? s.apply(tau, gl, *g_spline[static_cast<std::size_t>(l)]) : s.apply(tau, gl)).values();
  };
  auto push_g = [&](StateVector v) {
    if (shift) g_spline.emplace_back(std::in_place, v);
    else g_spline.emplace_back();
    g.push_back(std::move(v));
  };

  MarchResult out;
  out.states.push_back(u0);
  out.forcing.push_back(u0.with_values(Eigen::VectorXd::Zero(u0.size())));
  push_g(integrand(0, u0));

  for (int j = 0; j < n_steps; ++j) {
    const int k1 = 2 * j + 1;
    const int k2 = 2 * j + 2;
    const auto w1 = quadrature_weights(k1, dt);
    const auto w2 = quadrature_weights(k2, dt);
    const StateVector h1 = homogeneous(k1);
    const StateVector h2 = homogeneous(k2);
    Eigen::VectorXd hist1 = Eigen::VectorXd::Zero(u0.size());
    Eigen::VectorXd hist2 = Eigen::VectorXd::Zero(u0.size());
    for (int l = 0; l <= 2 * j; ++l) {
      const auto ul = static_cast<std::size_t>(l);
      if (w1[ul] != 0.0) hist1 += w1[ul] * propagate((k1 - l) * dt, l);
      if (w2[ul] != 0.0) hist2 += w2[ul] * propagate((k2 - l) * dt, l);
    }

    // The first node gets Simpson on [0, dt] through an auxiliary node at
    // dt / 2 instead of the trapezoid rule.
    const bool first = j == 0;
    const StateVector& prev = out.states.back();
    std::optional<StateVector> hh, xh;
    if (first) {
      hh = shift ? s.apply(0.5 * dt, u0, *u0_spline) : s.apply(0.5 * dt, u0);
      xh = hh->with_values(prev.values());
    }
    const Eigen::VectorXd g0_half = first ? propagate(0.5 * dt, 0) : Eigen::VectorXd();
    const Eigen::VectorXd g0_full = first ? propagate(dt, 0) : Eigen::VectorXd();

    StateVector x1 = h1.with_values(prev.values());
    StateVector x2 = h2.with_values(prev.values());
    double diff = std::numeric_limits<double>::infinity();
    int it = 0;
    Eigen::VectorXd f1, f2, fh;
    std::optional<StateVector> gh;
    StateVector g1 = x1, g2 = x2;
    auto evaluate = [&] {
      g1 = integrand(k1, x1);
      g2 = integrand(k2, x2);
      const Eigen::VectorXd g1_shifted = shift ? s.apply(dt, g1, CubicSpline(g1)).values() : s.apply(dt, g1).values();
      f2 = hist2 + w2[static_cast<std::size_t>(k1)] * g1_shifted + w2[static_cast<std::size_t>(k2)] * g2.values();
      if (first) {
        gh = integrand(-1, *xh);
        const Eigen::VectorXd gh_shifted =
            shift ? s.apply(0.5 * dt, *gh, CubicSpline(*gh)).values() : s.apply(0.5 * dt, *gh).values();
        fh = 0.25 * dt * (g0_half + gh->values());
        f1 = dt / 6.0 * (g0_full + 4.0 * gh_shifted + g1.values());
      } else {
        f1 = hist1 + w1[static_cast<std::size_t>(k1)] * g1.values();
      }
    };
    while (true) {
      ++it;
      evaluate();
      StateVector n1 = h1.with_values(h1.values() + f1);
      StateVector n2 = h2.with_values(h2.values() + f2);
      diff = std::max(norm(n1 - x1), norm(n2 - x2));
      if (first) {
        StateVector nh = hh->with_values(hh->values() + fh);
        diff = std::max(diff, norm(nh - *xh));
        xh = std::move(nh);
      }
      x1 = std::move(n1);
      x2 = std::move(n2);
      if (!std::isfinite(diff)) throw ConvergenceError("Picard iteration produced non-finite values", diff);
      if (diff < tol) break;
      if (it >= max_picard)
        throw ConvergenceError("Picard iteration did not contract within " + std::to_string(max_picard) +
                                   " iterations (step " + std::to_string(j) + ", residual " +
                                   std::to_string(diff) + ")",
                               diff);
    }

    if (inside && (!inside(x1) || !inside(x2) || (first && !inside(*xh)))) {
      out.stopped_early = true;
      break;
    }

    evaluate();
    if (first) {
      out.half_state = *xh;
      out.half_forcing = hh->with_values(fh);
    }
    out.forcing.push_back(h1.with_values(f1));
    out.forcing.push_back(h2.with_values(f2));
    out.states.push_back(std::move(x1));
    out.states.push_back(std::move(x2));
    push_g(std::move(g1));
    push_g(std::move(g2));
    out.iterations.push_back(it);
    out.residual = std::max(out.residual, diff);
  }
  return out;
}

}  // namespace detail

SolveReport solve(const Semigroup& s, const Nonlinearity& p, const StateVector& x0, double horizon,
                  const SolverOptions& opts) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("solve horizon must be positive");
  if (!(opts.tol > 0.0)) throw ConfigError("solver tolerance must be positive");
  const int n_steps = opts.steps_for(horizon);
  if (n_steps < 2) throw ConfigError("solver needs n_steps >= 2");
  if (s.kind() == SemigroupKind::shift) {
    const double have = s.remaining_horizon(x0);
    if (horizon > have + 1e-12 * (1.0 + have))
      throw HorizonExceededError("solve horizon " + std::to_string(horizon) + " exceeds remaining shift horizon " +
                                     std::to_string(have),
                                 horizon, have);
  }

  double radius = opts.truncation_radius.value_or(2.0 * norm(x0));
  if (!(radius > 0.0)) radius = 1.0;
  const Nonlinearity pt = truncate(p, radius);
  const double dt = horizon / (2.0 * n_steps);

  auto result = detail::march(
      s, x0, n_steps, dt, [&](int l, const StateVector& x) { return pt.eval(l < 0 ? 0.5 * dt : l * dt, x); }, opts.tol,
      opts.max_picard, [&](const StateVector& x) { return norm(x) <= radius * (1.0 + kBallSlack); });

  SolveReport r;
  r.requested_horizon = horizon;
  r.n_steps = n_steps;
  r.truncation_radius = radius;
  r.stopped_early = result.stopped_early;
  r.picard_iterations_per_step = std::move(result.iterations);
  r.residual = result.residual;
  r.trajectory = std::move(result.states);
  r.forcing = std::move(result.forcing);
  r.half_state = std::move(result.half_state);
  r.times.resize(r.trajectory.size());
  for (std::size_t k = 0; k < r.times.size(); ++k) r.times[k] = static_cast<double>(k) * dt;
  if (!r.stopped_early) r.times.back() = horizon;
  r.horizon = r.times.back();
  r.remaining_horizon = s.remaining_horizon(r.trajectory.back());
  if (opts.certify_constants) {
    r.M = s.operator_norm(r.times);
    r.C = p.lipschitz_hint ? *p.lipschitz_hint
                           : estimate_lipschitz(p, x0, radius, opts.lipschitz_samples, opts.seed);
  }
  return r;
}

StateVector flow(const Semigroup& s, const Nonlinearity& p, const StateVector& x0, double t,
                 const SolverOptions& opts) {
  if (t == 0.0) return x0;
  auto r = solve(s, p, x0, t, opts);
  if (r.stopped_early)
    throw HorizonExceededError("mild solution left the truncation ball at t = " + std::to_string(r.horizon),
                               t, r.horizon);
  return std::move(r.trajectory.back());
}

double estimate_lipschitz(const Nonlinearity& p, const StateVector& like, double radius, int samples,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int m = like.size();
  auto draw = [&] {
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; ++i) v[i] = radius * unif(rng);
    StateVector x = like.with_values(std::move(v));
    const double n = norm(x);
    return n > radius ? (radius / n) * x : x;
  };
  double best = 0.0;
  for (int i = 0; i < samples; ++i) {
    const StateVector u = draw();
    const StateVector v = draw();
    const double d = norm(u - v);
    if (d == 0.0) continue;
    best = std::max(best, norm(p.eval(0.0, u) - p.eval(0.0, v)) / d);
  }
  return best;
}

double semiflow_defect(const Semigroup& sg, const Nonlinearity& p, const StateVector& x0, double s, double t,
                       const SolverOptions& opts) {
  if (!(s >= 0.0) || !(t >= 0.0)) throw DomainError("semiflow defect needs s, t >= 0");
  const double total = s + t;
  if (total == 0.0) return 0.0;
  const double dt = total / opts.steps_for(total);
  auto with_steps = [&](double tau) {
    SolverOptions o = opts;
    o.max_step.reset();
    o.n_steps = std::max(2, static_cast<int>(std::lround(tau / dt)));
    return o;
  };
  const StateVector inner = flow(sg, p, x0, t, with_steps(t));
  const StateVector composed = flow(sg, p, inner, s, with_steps(s));
  const StateVector direct = flow(sg, p, x0, total, with_steps(total));
  return norm(composed - direct);
}

GronwallCertificate gronwall_certificate(const Semigroup& s, const Nonlinearity& p, const StateVector& x0,
                                         const StateVector& y0, double horizon, const SolverOptions& opts) {
  require_same_grid(x0, y0, "gronwall certificate");
  SolverOptions o = opts;
  const bool fixed_ball = o.truncation_radius.has_value();
  if (!fixed_ball) {
    double radius = 2.0 * std::max(norm(x0), norm(y0));
    o.truncation_radius = radius > 0.0 ? radius : 1.0;
  }
  o.certify_constants = false;
  // Without a caller-supplied ball, grow it until both solutions stay inside;
  // a ball containing both trajectories leaves them unchanged.
  SolveReport rx, ry;
  for (int grow = 0;; ++grow) {
    rx = solve(s, p, x0, horizon, o);
    ry = solve(s, p, y0, horizon, o);
    if (!rx.stopped_early && !ry.stopped_early) break;
    if (fixed_ball || grow == 30)
      throw HorizonExceededError("a solution left the truncation ball before the certificate horizon", horizon,
                                 std::min(rx.horizon, ry.horizon));
    *o.truncation_radius *= 2.0;
  }
  GronwallCertificate c;
  c.horizon = horizon;
  for (std::size_t k = 0; k < rx.trajectory.size(); ++k)
    c.lhs = std::max(c.lhs, norm(rx.trajectory[k] - ry.trajectory[k]));
  c.M = s.operator_norm(rx.times);
  c.C = p.lipschitz_hint ? *p.lipschitz_hint
                         : estimate_lipschitz(p, x0, *o.truncation_radius, o.lipschitz_samples, o.seed);
  c.bound = c.M * std::exp(c.M * c.C * horizon) * norm(x0 - y0);
  c.holds = c.lhs <= c.bound * (1.0 + 1e-8);
  return c;
}

}  // namespace semiflow
