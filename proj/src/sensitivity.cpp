#include "semiflow/sensitivity.hpp"

#include "semiflow/errors.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace semiflow {

SensitivityJet JetSequence::at(std::size_t node) const {
  SensitivityJet j{base.times.at(node), base.trajectory.at(node), directions, {}, std::nullopt};
  for (const auto& f : first) j.first.push_back(f[node]);
  if (order >= 2) {
    std::vector<std::vector<Direction>> sec(second.size());
    for (std::size_t a = 0; a < second.size(); ++a)
      for (std::size_t b = 0; b < second[a].size(); ++b) sec[a].push_back(second[a][b][node]);
    j.second = std::move(sec);
  }
  return j;
}

JetSequence propagate_jet(const Semigroup& s, const Nonlinearity& p, const StateVector& x0,
                          const std::vector<Direction>& directions, double horizon, int order,
                          const SolverOptions& opts) {
  if (order != 1 && order != 2) throw ConfigError("jet order must be 1 or 2");
  if (order == 2 && !p.has_hessian())
    throw CapabilityError("second variation requested but the nonlinearity has no hessian");
  for (const auto& y : directions) require_same_grid(x0, y, "propagate_jet");

  JetSequence js;
  js.order = order;
  js.directions = directions;
  js.base = solve(s, p, x0, horizon, opts);
  if (js.base.stopped_early)
    throw HorizonExceededError("base solution left the truncation ball at t = " + std::to_string(js.base.horizon),
                               horizon, js.base.horizon);

  const Nonlinearity pt = truncate(p, js.base.truncation_radius);
  const int n = js.base.n_steps;
  const double dt = horizon / (2.0 * n);
  const auto& traj = js.base.trajectory;
  const StateVector& half = *js.base.half_state;
  auto time_of = [dt](int l) { return l < 0 ? 0.5 * dt : l * dt; };
  auto state_of = [&](int l) -> const StateVector& { return l < 0 ? half : traj[static_cast<std::size_t>(l)]; };

  for (const auto& y : directions) {
    auto m = detail::march(
        s, y, n, dt, [&](int l, const Direction& psi) { return pt.jacobian_apply(time_of(l), state_of(l), psi); },
        opts.tol * (1.0 + norm(y)), opts.max_picard);
    js.residual = std::max(js.residual, m.residual);
    js.first.push_back(std::move(m.states));
    js.first_half.push_back(std::move(*m.half_state));
  }

  if (order == 2) {
    const std::size_t d = directions.size();
    js.second.resize(d);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        auto psi_of = [&](std::size_t i, int l) -> const Direction& {
          return l < 0 ? js.first_half[i] : js.first[i][static_cast<std::size_t>(l)];
        };
        const Direction zero = directions[a].with_values(Eigen::VectorXd::Zero(x0.size()));
        auto m = detail::march(
            s, zero, n, dt,
            [&](int l, const Direction& phi) {
              return pt.jacobian_apply(time_of(l), state_of(l), phi) +
                     pt.hessian_apply(time_of(l), state_of(l), psi_of(a, l), psi_of(b, l));
            },
            opts.tol * (1.0 + norm(directions[a]) * norm(directions[b])), opts.max_picard);
        js.residual = std::max(js.residual, m.residual);
        js.second[a].push_back(std::move(m.states));
      }
    }
  }
  return js;
}

FdCheckResult fd_check(const Semigroup& s, const Nonlinearity& p, const StateVector& x0, const Direction& y, double t,
                       const std::vector<double>& eps_ladder, const SolverOptions& opts) {
  if (eps_ladder.empty()) throw ConfigError("fd_check needs at least one step");
  for (double e : eps_ladder)
    if (!(e > 0.0)) throw ConfigError("fd_check steps must be positive");
  SolverOptions o = opts;
  if (!o.truncation_radius) {
    // Perturbed solutions must stay inside the ball the base solution
    // occupies, so size it from the base trajectory rather than from x0.
    const SolveReport probe = solve(s, p, x0, t, opts);
    double sup = 0.0;
    for (const auto& x : probe.trajectory) sup = std::max(sup, norm(x));
    const double emax = *std::max_element(eps_ladder.begin(), eps_ladder.end());
    const double r = 2.0 * (sup + emax * norm(y));
    o.truncation_radius = r > 0.0 ? r : 1.0;
  }
  const JetSequence js = propagate_jet(s, p, x0, {y}, t, 1, o);
  const Direction& psi = js.first[0].back();

  FdCheckResult res;
  res.eps = eps_ladder;
  std::vector<double> lx, ly;
  for (double e : eps_ladder) {
    const StateVector plus = flow(s, p, axpy(e, y, x0), t, o);
    const StateVector minus = flow(s, p, axpy(-e, y, x0), t, o);
    const double err = norm((0.5 / e) * (plus - minus) - psi);
    res.errors.push_back(err);
    // Below this the error is Picard / rounding noise, not truncation.
    const double floor = 1e-12 * (1.0 + norm(psi)) + 10.0 * o.tol * (1.0 + norm(x0)) / (2.0 * e);
    if (err > floor) {
      lx.push_back(std::log(e));
      ly.push_back(std::log(err));
    }
  }
  res.best_error = *std::min_element(res.errors.begin(), res.errors.end());
  res.points_used = static_cast<int>(lx.size());
  if (lx.size() < 2) {
    res.observed_order = std::numeric_limits<double>::quiet_NaN();
    return res;
  }
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  res.observed_order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return res;
}

TimeDerivative time_derivative_reconstruct(const JetSequence& jets, double h) {
  if (!(h > 0.0)) throw DomainError("time derivative needs h > 0");
  if (jets.directions.empty()) throw ConfigError("time derivative needs at least one jet direction");
  const std::size_t kh = jets.base.node_index(h);
  const double dt = jets.base.times[1];
  const auto k = static_cast<int>(kh);
  const Eigen::Index m = jets.base.trajectory.front().size();
  const Eigen::Index d = static_cast<Eigen::Index>(jets.directions.size());

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto& psi = jets.first[static_cast<std::size_t>(i)];
    if (k == 1) {
      a.col(i) = dt / 6.0 * (psi[0].values() + 4.0 * jets.first_half[static_cast<std::size_t>(i)].values() +
                             psi[1].values());
    } else {
      const auto w = detail::quadrature_weights(k, dt);
      for (int l = 0; l <= k; ++l) a.col(i) += w[static_cast<std::size_t>(l)] * psi[static_cast<std::size_t>(l)].values();
    }
  }
  const StateVector& x = jets.base.trajectory.front();
  const Eigen::VectorXd rhs = jets.base.trajectory[kh].values() - x.values();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = sv.minCoeff() > 0.0 ? sv.maxCoeff() / sv.minCoeff() : std::numeric_limits<double>::infinity();
  if (!(cond < 1e6)) throw SingularityError("averaged differential is ill-conditioned", cond);

  TimeDerivative td{x.with_values(Eigen::VectorXd::Zero(m)), svd.solve(rhs), 0.0, cond};
  Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < d; ++i) v += td.coefficients[i] * jets.directions[static_cast<std::size_t>(i)].values();
  td.derivative = x.with_values(std::move(v));
  td.residual = norm(x.with_values(rhs - a * td.coefficients));
  return td;
}

InvertibilityProfile restricted_differential_invertibility(const JetSequence& jets,
                                                           const std::vector<Direction>& tangent_basis,
                                                           const InvertibilityOptions& opts) {
  if (tangent_basis.size() != jets.first.size())
    throw ShapeError("jets were not propagated along this tangent basis");
  const Eigen::MatrixXd b = as_columns(tangent_basis);
  Eigen::JacobiSVD<Eigen::MatrixXd> bsvd(b);
  const auto& bs = bsvd.singularValues();
  const double gram_cond = bs.minCoeff() > 0.0 ? std::pow(bs.maxCoeff() / bs.minCoeff(), 2)
                                               : std::numeric_limits<double>::infinity();
  if (!(gram_cond < 1e8)) throw RankError("tangent basis is degenerate (Gram condition " + std::to_string(gram_cond) + ")");

  std::vector<std::size_t> nodes = opts.nodes;
  if (nodes.empty())
    for (std::size_t k = 0; k < jets.size(); ++k) nodes.push_back(k);

  InvertibilityProfile prof;
  const auto n = static_cast<Eigen::Index>(tangent_basis.size());
  for (std::size_t k : nodes) {
    Eigen::MatrixXd psi(b.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) psi.col(i) = jets.first[static_cast<std::size_t>(i)].at(k).values();
    const Eigen::MatrixXd f = opts.frame_at ? as_columns(opts.frame_at(k)) : b;
    Eigen::MatrixXd coords;
    if (f.rows() == psi.rows() && f.cols() == psi.cols() && f == psi) {
      coords = Eigen::MatrixXd::Identity(n, n);
    } else {
      coords = f.colPivHouseholderQr().solve(psi);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(coords);
    const double smin = svd.singularValues().minCoeff();
    prof.times.push_back(jets.base.times[k]);
    prof.sigma_min.push_back(smin);
    if (!prof.first_below && smin < opts.threshold) prof.first_below = jets.base.times[k];
  }
  return prof;
}

EmbedResult backward_embed(const Semigroup& s, const Nonlinearity& p, const StateVector& y, double t,
                           const Chart& chart, const SolverOptions& solver, const EmbedOptions& opts) {
  if (t < 0.0) throw DomainError("backward embedding needs t >= 0");
  const Projection start = project(chart, y, chart.box().center());
  if (t == 0.0) return {y, start.u, 0.0, 0};

  const ParamBox& box = chart.box();
  const double target = opts.tol * (1.0 + norm(y));
  Eigen::VectorXd u = box.clamp(start.u);
  auto forward = [&](const Eigen::VectorXd& v) -> std::optional<StateVector> {
    try {
      return flow(s, p, chart.embed(v), t, solver);
    } catch (const HorizonExceededError&) {
      return std::nullopt;
    } catch (const ConvergenceError&) {
      return std::nullopt;
    }
  };

  for (int it = 0; it < opts.max_iterations; ++it) {
    const StateVector z = chart.embed(u);
    const JetSequence js = propagate_jet(s, p, z, chart.jacobian(u), t, 1, solver);
    const StateVector& fz = js.base.final_state();
    const Eigen::VectorXd r = fz.values() - y.values();
    const double defect = norm(y.with_values(r));
    if (defect <= target) return {z, u, defect, it};

    Eigen::MatrixXd j(r.size(), chart.param_dim());
    for (int i = 0; i < chart.param_dim(); ++i) j.col(i) = js.first[static_cast<std::size_t>(i)].back().values();
    const Eigen::VectorXd step = -j.colPivHouseholderQr().solve(r);
    if (!step.allFinite()) throw NoEmbeddingError("backward embedding produced a non-finite step");

    bool accepted = false;
    double scale = 1.0;
    for (int h = 0; h <= opts.max_halvings; ++h, scale *= 0.5) {
      const Eigen::VectorXd trial = box.clamp(u + scale * step);
      if (trial == u) continue;
      auto ft = forward(trial);
      if (ft && (ft->values() - y.values()).norm() < r.norm()) {
        u = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw NoEmbeddingError("backward embedding stalled at defect " + std::to_string(defect) +
                             (chart.on_boundary(u, 1e-9) ? " on the chart boundary" : ""));
  }
  throw NoEmbeddingError("backward embedding did not converge within " + std::to_string(opts.max_iterations) +
                         " iterations");
}

}  // namespace semiflow
