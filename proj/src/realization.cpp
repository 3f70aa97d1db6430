#include "semiflow/realization.hpp"

#include "semiflow/errors.hpp"

#include <algorithm>
#include <cmath>

namespace semiflow {

namespace {

[[noreturn]] void rethrow_at(int coordinate, const Error& e) {
  const std::string msg = "alpha coordinate " + std::to_string(coordinate) + ": " + e.what();
  if (auto* h = dynamic_cast<const HorizonExceededError*>(&e)) throw HorizonExceededError(msg, h->requested(), h->available());
  if (auto* c = dynamic_cast<const ConvergenceError*>(&e)) throw ConvergenceError(msg, c->residual());
  if (dynamic_cast<const BlowUpError*>(&e)) throw BlowUpError(msg);
  if (dynamic_cast<const DomainError*>(&e)) throw DomainError(msg);
  throw Error(msg);
}

// All points of a grid_per_dim^n tensor grid over the box.
std::vector<Eigen::VectorXd> box_grid(const ParamBox& box, int per_dim) {
  const int n = box.dim();
  std::vector<Eigen::VectorXd> pts;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i) {
      const double f = per_dim == 1 ? 0.5 : static_cast<double>(idx[static_cast<std::size_t>(i)]) / (per_dim - 1);
      u[i] = box.lower[i] + f * (box.upper[i] - box.lower[i]);
    }
    pts.push_back(std::move(u));
    int i = 0;
    while (i < n && ++idx[static_cast<std::size_t>(i)] == per_dim) idx[static_cast<std::size_t>(i++)] = 0;
    if (i == n) break;
  }
  return pts;
}

// Center plus four half-way corners with alternating sign patterns.
std::vector<Eigen::VectorXd> order_sample_points(const ParamBox& box) {
  const int n = box.dim();
  const Eigen::VectorXd c = box.center();
  const Eigen::VectorXd half = 0.5 * box.width();
  std::vector<Eigen::VectorXd> pts{c};
  for (int pattern = 0; pattern < 4; ++pattern) {
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i) {
      double sign = (pattern < 2) ? 1.0 : ((i % 2 == 0) ? 1.0 : -1.0);
      if (pattern % 2 == 1) sign = -sign;
      u[i] = c[i] + 0.5 * sign * half[i];
    }
    pts.push_back(std::move(u));
  }
  return pts;
}

CheckResult make_check(std::string name, double margin, double threshold, bool upper_bound, std::string note = {}) {
  CheckResult c;
  c.name = std::move(name);
  c.margin = margin;
  c.threshold = threshold;
  c.sense = upper_bound ? "<=" : ">=";
  c.pass = upper_bound ? margin <= threshold : margin >= threshold;
  c.note = std::move(note);
  return c;
}

}  // namespace

double independence_check(const VectorFieldSet& fields, const StateVector& x) {
  if (fields.sigmas.empty()) throw ConfigError("independence check needs at least one sigma field");
  std::vector<Direction> cols{fields.mu(x)};
  for (const auto& s : fields.sigmas) cols.push_back(s.eval(0.0, x));
  for (std::size_t i = 0; i < cols.size(); ++i)
    if (norm(cols[i]) == 0.0)
      throw DegenerateFieldError(i == 0 ? "mu vanishes at the point" : "sigma_" + std::to_string(i) + " vanishes at the point");
  return normalized_sigma_min(as_columns(cols));
}

StateVector sigma_flow(const Nonlinearity& sigma, const StateVector& x0, double t, const SigmaFlowOptions& opts) {
  if (!std::isfinite(t)) throw DomainError("sigma flow time must be finite");
  if (t == 0.0) return x0;
  if (!(opts.max_step > 0.0)) throw ConfigError("sigma flow step must be positive");
  const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / opts.max_step - 1e-12)));
  const double h = t / steps;
  const double limit = opts.blowup_factor * (1.0 + norm(x0));
  Eigen::VectorXd x = x0.values();
  auto f = [&](const Eigen::VectorXd& v) { return sigma.eval(0.0, x0.with_values(v)).values(); };
  for (int i = 0; i < steps; ++i) {
    const Eigen::VectorXd k1 = f(x);
    const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
    const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
    const Eigen::VectorXd k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite() || norm(x0.with_values(x)) > limit)
      throw BlowUpError("sigma flow blew up at step " + std::to_string(i + 1) + " of " + std::to_string(steps));
  }
  return x0.with_values(std::move(x));
}

Chart build_alpha(const VectorFieldSet& fields, const StateVector& x0, const ParamBox& box, bool boundary,
                  const AlphaOptions& opts) {
  const int d = fields.d();
  if (box.dim() != d + 1) throw ShapeError("alpha box must have d + 1 coordinates");
  if (box.lower[d] < 0.0) throw ConfigError("the mu coordinate of alpha only runs forward (lower bound >= 0)");
  const double margin = independence_check(fields, x0);
  if (!(margin > opts.chart.rank_tol))
    throw DegenerateFieldError("fields are not independent at the base point (margin " + std::to_string(margin) + ")");

  auto embed = [fields, x0, opts, d](const Eigen::VectorXd& u) {
    StateVector x = x0;
    if (u[d] < 0.0) throw DomainError("alpha coordinate " + std::to_string(d + 1) + ": mu flow needs t >= 0");
    try {
      x = flow(fields.semigroup, fields.p, x, u[d], opts.solver);
    } catch (const Error& e) {
      rethrow_at(d + 1, e);
    }
    for (int i = d - 1; i >= 0; --i) {
      try {
        x = sigma_flow(fields.sigmas[static_cast<std::size_t>(i)], x, u[i], opts.sigma);
      } catch (const Error& e) {
        rethrow_at(i + 1, e);
      }
    }
    return x;
  };
  return Chart(box, boundary, embed, opts.chart);
}

OrbitFn solver_orbit(const VectorFieldSet& fields, const StateVector& x0, double horizon, double node_spacing,
                     const SolverOptions& opts) {
  SolverOptions o = opts;
  o.max_step.reset();
  o.n_steps = std::max(2, static_cast<int>(std::lround(horizon / node_spacing)));
  if (!o.truncation_radius) o.truncation_radius = 10.0 * (1.0 + norm(x0));
  auto r = std::make_shared<SolveReport>(solve(fields.semigroup, fields.p, x0, horizon, o));
  if (r->stopped_early)
    throw HorizonExceededError("orbit solve left the truncation ball", horizon, r->horizon);
  return [r](double t) {
    const std::size_t k = r->node_index(t);
    return r->trajectory[k] - r->forcing[k];
  };
}

RegularityReport certify(const VectorFieldSet& fields, const StateVector& x0, const Chart* chart,
                         const CertifyOptions& opts) {
  const Thresholds& th = opts.thresholds;
  RegularityReport rep;
  rep.sampled_region = "parameter box of the chart only";

  std::optional<Chart> built;
  std::string chart_note;
  Eigen::VectorXd base_u;
  if (chart) {
    base_u = chart->box().center();
  } else {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(fields.d() + 1);
    ParamBox box(c.array() - opts.alpha_radius, c.array() + opts.alpha_radius);
    box.lower[fields.d()] = 0.0;
    AlphaOptions ao = opts.alpha;
    ao.chart.rank_tol = th.rank_tol;
    try {
      built.emplace(build_alpha(fields, x0, box, opts.alpha_boundary, ao));
      chart = &*built;
    } catch (const RankError& e) {
      chart_note = e.what();
    } catch (const DegenerateFieldError& e) {
      chart_note = e.what();
    }
    base_u = c;
  }

  // independence
  {
    double margin = 1.0;
    std::vector<StateVector> pts;
    if (chart) {
      for (const auto& u : box_grid(chart->box(), opts.grid_per_dim)) pts.push_back(chart->embed(u));
    } else {
      pts.push_back(x0);
    }
    for (const auto& x : pts) {
      try {
        margin = std::min(margin, independence_check(fields, x));
      } catch (const DegenerateFieldError&) {
        margin = 0.0;
      }
    }
    rep.independence_margin = margin;
    auto c = make_check("independence", margin, th.rank_tol, false);
    c.pass = margin > th.rank_tol;
    rep.checks.push_back(std::move(c));
  }

  if (!chart) {
    for (const char* name : {"rank", "tangency", "invertibility", "boundary_sigma_parallel", "domain_order"}) {
      CheckResult c;
      c.name = name;
      c.sense = "";
      c.note = "not run: no chart (" + chart_note + ")";
      rep.checks.push_back(std::move(c));
    }
    rep.certified = false;
    for (const auto& c : rep.checks)
      if (!c.pass) {
        rep.failure = c.name;
        break;
      }
    return rep;
  }

  // rank
  {
    double margin = 0.0;
    try {
      margin = tangent_basis(*chart, base_u).sigma_min;
    } catch (const DegenerateChartError&) {
      margin = normalized_sigma_min(as_columns(chart->jacobian(base_u)));
    }
    rep.alpha_rank_margin = margin;
    auto c = make_check("rank", margin, th.rank_tol, false);
    c.pass = margin > th.rank_tol;
    rep.checks.push_back(std::move(c));
  }

  // tangency
  {
    double worst = 0.0;
    bool ok = true;
    const auto grid = box_grid(chart->box(), opts.grid_per_dim);
    for (const auto& u : grid) {
      auto t = nagumo_check(*chart, u, fields.semigroup, fields.p, {th.tangency_tol});
      worst = std::max(worst, t.residual);
      ok = ok && t.verdict != TangencyVerdict::violating;
      rep.tangency.push_back(std::move(t));
    }
    auto c = make_check("tangency", worst, th.tangency_tol, true);
    c.pass = ok;
    if (ok && worst > th.tangency_tol) c.note = "inconsistent";
    if (!ok && worst <= th.tangency_tol) c.note = "outward pointing on the boundary";
    rep.checks.push_back(std::move(c));
  }

  // invertibility of the restricted differential
  {
    const Eigen::VectorXd uc = chart->box().center();
    const StateVector xc = chart->embed(uc);
    const auto basis = tangent_basis(*chart, uc).columns;
    SolverOptions so = opts.solver;
    so.max_step.reset();
    so.n_steps = opts.invertibility_steps;
    const JetSequence js = propagate_jet(fields.semigroup, fields.p, xc, basis, opts.invertibility_horizon, 1, so);
    InvertibilityOptions io;
    io.threshold = th.invertibility;
    io.frame_at = [&](std::size_t k) {
      if (k == 0) return basis;
      const Projection pr = project(*chart, js.base.trajectory[k], uc);
      return tangent_basis(*chart, pr.u).columns;
    };
    const auto prof = restricted_differential_invertibility(js, basis, io);
    rep.invertibility = prof.sigma_min;
    const double margin = *std::min_element(prof.sigma_min.begin(), prof.sigma_min.end());
    rep.checks.push_back(make_check("invertibility", margin, th.invertibility, false));
  }

  // sigma fields parallel to the boundary
  {
    if (chart->boundary()) {
      double worst = 0.0;
      const int last = chart->param_dim() - 1;
      for (const auto& u : box_grid(chart->box(), opts.grid_per_dim)) {
        if (!chart->on_boundary(u)) continue;
        const StateVector x = chart->embed(u);
        const auto basis = tangent_basis(*chart, u).columns;
        for (const auto& sigma : fields.sigmas) {
          const StateVector v = sigma.eval(0.0, x);
          const auto t = tangency_of(*chart, u, v, {th.tangency_tol});
          const double scale = std::max(norm(v), 1e-12 * (1.0 + norm(x)));
          const double normal = std::abs(t.coefficients[last]) * norm(basis.back()) / scale;
          worst = std::max({worst, t.residual, normal});
        }
      }
      rep.boundary_sigma_parallel = worst;
      rep.checks.push_back(make_check("boundary_sigma_parallel", worst, th.tangency_tol, true));
    } else {
      rep.checks.push_back(make_check("boundary_sigma_parallel", 0.0, th.tangency_tol, true, "chart has no boundary"));
    }
  }

  // D(A^k) orders along the solver identity
  {
    const double hmax = opts.order_ladder.front();
    const double hmin = opts.order_ladder.back();
    int worst = opts.k_max;
    for (const auto& u : order_sample_points(chart->box())) {
      const StateVector x = chart->embed(u);
      const OrbitFn orbit = solver_orbit(fields, x, opts.k_max * hmax, hmin, opts.solver);
      DomainOrderOptions dopts;
      dopts.ratio_bound = th.ratio_bound;
      dopts.orbit_noise = 10.0 * opts.solver.tol * (1.0 + norm(x));
      auto est = domain_order_estimate(orbit, x, opts.k_max, opts.order_ladder, dopts);
      worst = std::min(worst, est.order_passed);
      rep.domain_orders.push_back(std::move(est));
    }
    rep.checks.push_back(make_check("domain_order", worst, opts.k_max, false));
  }

  rep.certified = true;
  for (const auto& c : rep.checks) {
    if (!c.pass) {
      rep.certified = false;
      rep.failure = c.name;
      break;
    }
  }
  return rep;
}

}  // namespace semiflow
