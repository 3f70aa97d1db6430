#include "semiflow/manifold.hpp"

#include "semiflow/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace semiflow {

ParamBox::ParamBox(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) throw ShapeError("parameter box bounds have different lengths");
  if (lower.size() == 0) throw ConfigError("parameter box needs at least one coordinate");
  if (!lower.allFinite() || !upper.allFinite()) throw ConfigError("parameter box bounds must be finite");
  if ((lower.array() >= upper.array()).any()) throw ConfigError("parameter box needs lower < upper");
}

ParamBox ParamBox::around(const Eigen::VectorXd& center, double radius) {
  return ParamBox(center.array() - radius, center.array() + radius);
}

bool ParamBox::contains(const Eigen::VectorXd& u, double slack) const {
  return u.size() == lower.size() && (u.array() >= lower.array() - slack).all() &&
         (u.array() <= upper.array() + slack).all();
}

bool ParamBox::interior(const Eigen::VectorXd& u) const {
  return u.size() == lower.size() && (u.array() > lower.array()).all() && (u.array() < upper.array()).all();
}

Eigen::VectorXd ParamBox::clamp(const Eigen::VectorXd& u) const { return u.cwiseMax(lower).cwiseMin(upper); }

Chart::Chart(ParamBox box, bool boundary, EmbedFn embed, ChartOptions opts, JacobianFn exact_jacobian)
    : box_(std::move(box)),
      boundary_(boundary),
      embed_(std::move(embed)),
      opts_(opts),
      exact_jacobian_(std::move(exact_jacobian)) {
  if (!embed_) throw ConfigError("chart needs an embedding");
  if (box_.dim() == 0) throw ConfigError("chart needs a parameter box");
  if (boundary_ && box_.lower[box_.dim() - 1] != 0.0)
    throw ConfigError("boundary chart needs the last box interval to start at 0");
  tangent_basis(*this, box_.center());
}

Chart Chart::linear(const StateVector& offset, std::vector<Direction> basis, ParamBox box, bool boundary) {
  if (static_cast<int>(basis.size()) != box.dim()) throw ShapeError("linear chart: basis size must match box");
  for (const auto& b : basis) require_same_grid(offset, b, "linear chart");
  auto embed = [offset, basis](const Eigen::VectorXd& u) {
    Eigen::VectorXd v = offset.values();
    for (std::size_t i = 0; i < basis.size(); ++i) v += u[static_cast<Eigen::Index>(i)] * basis[i].values();
    return offset.with_values(std::move(v));
  };
  auto jac = [basis](const Eigen::VectorXd&) { return basis; };
  return Chart(std::move(box), boundary, embed, {}, jac);
}

StateVector Chart::embed(const Eigen::VectorXd& u) const {
  if (u.size() != box_.dim()) throw ShapeError("chart parameter has the wrong dimension");
  return embed_(u);
}

std::vector<Direction> Chart::jacobian(const Eigen::VectorXd& u) const {
  if (exact_jacobian_) return exact_jacobian_(u);
  const int n = param_dim();
  std::vector<Direction> cols;
  cols.reserve(static_cast<std::size_t>(n));
  std::optional<StateVector> f0;
  for (int i = 0; i < n; ++i) {
    const double h = opts_.fd_step * std::max(1.0, box_.upper[i] - box_.lower[i]);
    auto at = [&](double off) {
      Eigen::VectorXd v = u;
      v[i] += off;
      return embed(v);
    };
    if (u[i] - h >= box_.lower[i] && u[i] + h <= box_.upper[i]) {
      cols.push_back((0.5 / h) * (at(h) - at(-h)));
      continue;
    }
    if (!f0) f0 = embed(u);
    const double dir = (u[i] + 2.0 * h <= box_.upper[i]) ? 1.0 : -1.0;
    const StateVector f1 = at(dir * h);
    const StateVector f2 = at(dir * 2.0 * h);
    cols.push_back((dir / (2.0 * h)) * (4.0 * f1 - 3.0 * *f0 - f2));
  }
  return cols;
}

bool Chart::on_boundary(const Eigen::VectorXd& u, double tol) const {
  return boundary_ && std::abs(u[param_dim() - 1]) <= tol;
}

double normalized_sigma_min(const Eigen::MatrixXd& columns) {
  if (columns.cols() == 0) return 0.0;
  if (columns.cols() > columns.rows()) return 0.0;
  Eigen::MatrixXd a = columns;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double n = a.col(j).norm();
    if (n == 0.0) return 0.0;
    a.col(j) /= n;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues().minCoeff();
}

TangentBasis tangent_basis(const Chart& chart, const Eigen::VectorXd& u) {
  TangentBasis tb;
  tb.columns = chart.jacobian(u);
  const Eigen::MatrixXd b = as_columns(tb.columns);
  tb.sigma_min = normalized_sigma_min(b);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b.transpose() * b, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  tb.gram_condition = lo > 0.0 ? eig.eigenvalues().maxCoeff() / lo : std::numeric_limits<double>::infinity();
  if (!(tb.sigma_min > chart.options().rank_tol))
    throw DegenerateChartError("chart Jacobian is rank deficient (normalized sigma_min " +
                               std::to_string(tb.sigma_min) + ")");
  return tb;
}

Projection project(const Chart& chart, const StateVector& x, const Eigen::VectorXd& u_start,
                   const ProjectionOptions& opts) {
  Projection pr;
  pr.u = u_start;
  auto residual = [&](const Eigen::VectorXd& u) -> std::optional<Eigen::VectorXd> {
    try {
      return Eigen::VectorXd(chart.embed(u).values() - x.values());
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  auto r = residual(pr.u);
  if (!r) throw OffManifoldError("projection start lies outside the chart domain", std::numeric_limits<double>::infinity());
  for (pr.iterations = 0; pr.iterations < opts.max_iterations; ++pr.iterations) {
    const Eigen::MatrixXd j = as_columns(chart.jacobian(pr.u));
    const Eigen::VectorXd step = -j.colPivHouseholderQr().solve(*r);
    if (!step.allFinite()) throw OffManifoldError("projection step is not finite", r->norm());
    double scale = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= 30; ++halving, scale *= 0.5) {
      const Eigen::VectorXd trial = pr.u + scale * step;
      auto rt = residual(trial);
      if (rt && rt->norm() <= r->norm() * (1.0 + 1e-14)) {
        pr.u = trial;
        r = std::move(rt);
        accepted = true;
        break;
      }
    }
    const double size = scale * step.lpNorm<Eigen::Infinity>();
    if (!accepted || size <= opts.step_tol * (1.0 + pr.u.lpNorm<Eigen::Infinity>())) break;
  }
  if (pr.iterations >= opts.max_iterations)
    throw OffManifoldError("projection did not converge", norm(x.with_values(*r)));
  pr.distance = norm(x.with_values(*r));
  return pr;
}

const char* to_string(TangencyVerdict v) {
  switch (v) {
    case TangencyVerdict::tangent: return "tangent";
    case TangencyVerdict::tangent_inward: return "tangent_inward";
    case TangencyVerdict::violating: return "violating";
  }
  return "?";
}

const char* to_string(ExitKind k) {
  switch (k) {
    case ExitKind::interior_ok: return "interior_ok";
    case ExitKind::left_chart_box: return "left_chart_box";
    case ExitKind::left_tolerance_tube: return "left_tolerance_tube";
  }
  return "?";
}

TangencyReport tangency_of(const Chart& chart, const Eigen::VectorXd& u, const StateVector& v,
                           const TangencyOptions& opts) {
  const TangentBasis tb = tangent_basis(chart, u);
  const Eigen::MatrixXd b = as_columns(tb.columns);
  TangencyReport rep;
  rep.point_params = u;
  rep.coefficients = b.colPivHouseholderQr().solve(v.values());
  const StateVector x = chart.embed(u);
  const double scale = std::max(norm(v), 1e-12 * (1.0 + norm(x)));
  rep.residual = norm(v.with_values(v.values() - b * rep.coefficients)) / scale;
  rep.on_boundary = chart.on_boundary(u);
  if (rep.residual > opts.tangency_tol) {
    rep.verdict = TangencyVerdict::violating;
  } else if (rep.on_boundary) {
    const int last = chart.param_dim() - 1;
    rep.inward_component = rep.coefficients[last];
    const double normal = rep.coefficients[last] * norm(tb.columns.back());
    rep.verdict = normal < -opts.tangency_tol * scale ? TangencyVerdict::violating : TangencyVerdict::tangent_inward;
  }
  return rep;
}

TangencyReport nagumo_check(const Chart& chart, const Eigen::VectorXd& u, const Semigroup& s, const Nonlinearity& p,
                            const TangencyOptions& opts) {
  const StateVector x = chart.embed(u);
  return tangency_of(chart, u, s.generator_apply(x) + p.eval(0.0, x), opts);
}

LifetimeReport lifetime_estimate(const Chart& chart, const Eigen::VectorXd& u0, const Semigroup& s,
                                 const Nonlinearity& p, const SolverOptions& solver, const LifetimeOptions& opts) {
  if (!chart.box().interior(u0)) throw DomainError("lifetime start must lie in the open parameter box");
  if (!(opts.tube_tol > 0.0)) throw ConfigError("tube tolerance must be positive");
  const SolveReport r = solve(s, p, chart.embed(u0), opts.horizon, solver);
  LifetimeReport rep;
  rep.horizon = r.horizon;
  rep.times.push_back(0.0);
  rep.params.push_back(u0);
  rep.distances.push_back(0.0);
  const ParamBox& box = chart.box();
  for (std::size_t k = 1; k < r.trajectory.size(); ++k) {
    const Projection pr = project(chart, r.trajectory[k], rep.params.back());
    const Eigen::VectorXd& prev = rep.params.back();
    const double t0 = r.times[k - 1];
    const double dt = r.times[k] - t0;
    rep.max_distance = std::max(rep.max_distance, pr.distance);
    if (!box.contains(pr.u)) {
      double theta = 1.0;
      for (int i = 0; i < box.dim(); ++i) {
        const double d = pr.u[i] - prev[i];
        if (pr.u[i] < box.lower[i]) theta = std::min(theta, (box.lower[i] - prev[i]) / d);
        if (pr.u[i] > box.upper[i]) theta = std::min(theta, (box.upper[i] - prev[i]) / d);
      }
      rep.T_exit = t0 + std::clamp(theta, 0.0, 1.0) * dt;
      rep.exit_kind = ExitKind::left_chart_box;
      return rep;
    }
    if (pr.distance > opts.tube_tol) {
      const double d0 = rep.distances.back();
      const double theta = (opts.tube_tol - d0) / (pr.distance - d0);
      rep.T_exit = t0 + std::clamp(theta, 0.0, 1.0) * dt;
      rep.exit_kind = ExitKind::left_tolerance_tube;
      return rep;
    }
    rep.times.push_back(r.times[k]);
    rep.params.push_back(pr.u);
    rep.distances.push_back(pr.distance);
  }
  rep.T_exit = r.horizon;
  rep.exit_kind = ExitKind::interior_ok;
  return rep;
}

}  // namespace semiflow
