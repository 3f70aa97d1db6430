#include "semiflow/semigroup.hpp"

#include "semiflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <limits>
#include <map>

namespace semiflow {

namespace {

constexpr int kStencil = 5;

// Fornberg's recursion for first-derivative weights at z on the given nodes.
std::array<double, kStencil> fornberg_first_derivative(double z, const double* x) {
  double c[kStencil][2] = {};
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < kStencil; ++i) {
    const int mn = std::min(i, 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::array<double, kStencil> w{};
  for (int i = 0; i < kStencil; ++i) w[static_cast<std::size_t>(i)] = c[i][1];
  return w;
}

double time_slack(double scale) { return 1e-12 * (1.0 + std::abs(scale)); }

}  // namespace

Semigroup Semigroup::shift(GridPtr grid) {
  if (!grid) throw ConfigError("shift semigroup needs a grid");
  if (!(grid->extension_margin() > 0.0))
    throw ConfigError("shift semigroup needs a positive extension margin");
  if (grid->size() < kStencil) throw ConfigError("shift semigroup needs at least five grid nodes");
  Semigroup s;
  s.kind_ = SemigroupKind::shift;
  s.grid_ = grid;
  const int m = grid->size();
  s.stencil_start_.resize(static_cast<std::size_t>(m));
  s.stencil_weights_.resize(m, kStencil);
  for (int i = 0; i < m; ++i) {
    const int start = std::clamp(i - 2, 0, m - kStencil);
    s.stencil_start_[static_cast<std::size_t>(i)] = start;
    const auto w = fornberg_first_derivative(grid->node(i), grid->nodes().data() + start);
    for (int j = 0; j < kStencil; ++j) s.stencil_weights_(i, j) = w[static_cast<std::size_t>(j)];
  }
  return s;
}

Semigroup Semigroup::diagonal(Eigen::VectorXd lambda) {
  if (lambda.size() == 0) throw ConfigError("diagonal semigroup needs at least one eigenvalue");
  if (!lambda.allFinite()) throw ConfigError("diagonal semigroup eigenvalues must be finite");
  if ((lambda.array() < 0.0).any()) throw ConfigError("diagonal semigroup eigenvalues must be nonnegative");
  Semigroup s;
  s.kind_ = SemigroupKind::diagonal;
  s.lambda_ = std::move(lambda);
  return s;
}

void Semigroup::check_state(const StateVector& x, const char* where) const {
  if (kind_ == SemigroupKind::diagonal) {
    if (x.size() != lambda_.size())
      throw ShapeError(std::string(where) + ": state dimension " + std::to_string(x.size()) +
                       " does not match " + std::to_string(lambda_.size()) + " eigenvalues");
  } else if (x.grid() != grid_ && x.grid()->nodes() != grid_->nodes()) {
    throw ShapeError(std::string(where) + ": state lives on a different grid");
  }
}

double Semigroup::remaining_horizon(const StateVector& x) const {
  if (kind_ == SemigroupKind::diagonal) return std::numeric_limits<double>::infinity();
  return grid_->extension_margin() - x.horizon_used();
}

StateVector Semigroup::apply(double t, const StateVector& x) const {
  check_state(x, "semigroup apply");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("semigroup time must be finite and >= 0");
  if (t == 0.0) return x;
  if (kind_ == SemigroupKind::diagonal) return x.with_values((-lambda_.array() * t).exp() * x.values().array());
  return apply(t, x, CubicSpline(x));
}

StateVector Semigroup::apply(double t, const StateVector& x, const CubicSpline& spline) const {
  check_state(x, "semigroup apply");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("semigroup time must be finite and >= 0");
  if (t == 0.0) return x;
  if (kind_ == SemigroupKind::diagonal) return x.with_values((-lambda_.array() * t).exp() * x.values().array());
  const double used = x.horizon_used() + t;
  const double margin = grid_->extension_margin();
  if (used > margin + time_slack(margin))
    throw HorizonExceededError("shift by " + std::to_string(t) + " exceeds remaining horizon " +
                                   std::to_string(margin - x.horizon_used()),
                               used, margin);
  const int m = x.size();
  Eigen::VectorXd out(m);
  const double end = grid_->extended_end();
  for (int i = 0; i < m; ++i) out[i] = spline(std::min(grid_->node(i) + t, end));
  return StateVector(x.grid(), std::move(out), x.norm_kind(), std::min(used, margin));
}

StateVector Semigroup::generator_apply(const StateVector& x) const {
  check_state(x, "generator apply");
  if (kind_ == SemigroupKind::diagonal) return x.with_values(-lambda_.cwiseProduct(x.values()));
  const int m = x.size();
  Eigen::VectorXd out(m);
  for (int i = 0; i < m; ++i) {
    const int start = stencil_start_[static_cast<std::size_t>(i)];
    out[i] = stencil_weights_.row(i).dot(x.values().segment(start, kStencil));
  }
  return x.with_values(std::move(out));
}

double Semigroup::operator_norm(std::span<const double> times) const {
  if (kind_ == SemigroupKind::diagonal) {
    // lambda >= 0, so sup_n exp(-lambda_n t) = exp(-min lambda * t) and the
    // maximum over t >= 0 is attained at the smallest time.
    double best = 0.0;
    for (double t : times) best = std::max(best, std::exp(-lambda_.minCoeff() * t));
    return times.empty() ? 1.0 : best;
  }
  const int m = grid_->size();
  // Column k holds the spline moments of the k-th cardinal function.
  Eigen::MatrixXd moments(m, m);
  for (int k = 0; k < m; ++k) moments.col(k) = grid_->spline_moments(Eigen::VectorXd::Unit(m, k));
  const double end = grid_->extended_end();
  double best = 0.0;
  Eigen::VectorXd row(m);
  for (double t : times) {
    if (t < 0.0) throw DomainError("operator norm at negative time");
    for (int i = 0; i < m; ++i) {
      const double xi = std::min(grid_->node(i) + t, end);
      const int j = grid_->locate(xi);
      const double x0 = grid_->node(j);
      const double x1 = grid_->node(j + 1);
      const double h = x1 - x0;
      const double a = x1 - xi;
      const double b = xi - x0;
      row = moments.row(j).transpose() * (a * a * a / (6.0 * h) - h * a / 6.0) +
            moments.row(j + 1).transpose() * (b * b * b / (6.0 * h) - h * b / 6.0);
      row[j] += a / h;
      row[j + 1] += b / h;
      best = std::max(best, row.cwiseAbs().sum());
    }
  }
  return best;
}

DomainOrderEstimate domain_order_estimate(const Semigroup& s, const StateVector& x, int k,
                                          std::span<const double> h_ladder, const DomainOrderOptions& opts) {
  if (k >= 1 && !h_ladder.empty() && s.kind() == SemigroupKind::shift) {
    const double need = k * h_ladder.front();
    const double have = s.remaining_horizon(x);
    if (need > have + time_slack(have))
      throw HorizonExceededError("difference quotients need horizon " + std::to_string(need), need, have);
  }
  if (s.kind() == SemigroupKind::shift && k >= 1) {
    const CubicSpline spline(x);
    return domain_order_estimate([&](double t) { return s.apply(t, x, spline); }, x, k, h_ladder, opts);
  }
  return domain_order_estimate([&](double t) { return s.apply(t, x); }, x, k, h_ladder, opts);
}

DomainOrderEstimate domain_order_estimate(const OrbitFn& orbit, const StateVector& x, int k,
                                          std::span<const double> h_ladder, const DomainOrderOptions& opts) {
  if (k < 1) throw ConfigError("domain order needs k >= 1");
  if (h_ladder.size() < 3) throw ConfigError("step ladder needs at least three steps");
  for (std::size_t i = 0; i < h_ladder.size(); ++i) {
    if (!(h_ladder[i] > 0.0)) throw ConfigError("step ladder entries must be positive");
    if (i > 0 && !(h_ladder[i] < h_ladder[i - 1])) throw ConfigError("step ladder must be strictly decreasing");
  }

  std::map<double, StateVector> cache;
  auto at = [&](double t) -> const StateVector& {
    auto it = cache.find(t);
    if (it == cache.end()) it = cache.emplace(t, t == 0.0 ? x : orbit(t)).first;
    return it->second;
  };

  DomainOrderEstimate est{x, k, 0, {}, {}};
  bool still_passing = true;
  for (int r = 1; r <= k; ++r) {
    std::vector<Eigen::VectorXd> q;
    std::vector<double> qn;
    for (double h : h_ladder) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.size());
      double binom = 1.0;
      for (int j = 0; j <= r; ++j) {
        const double sign = ((r - j) % 2 == 0) ? 1.0 : -1.0;
        acc += sign * binom * at(j * h).values();
        binom = binom * (r - j) / (j + 1);
      }
      acc /= std::pow(h, r);
      qn.push_back(norm(x.with_values(acc)));
      q.push_back(std::move(acc));
    }
    std::vector<double> diffs;
    for (std::size_t i = 1; i < q.size(); ++i) diffs.push_back(norm(x.with_values(q[i] - q[i - 1])));
    const double base_floor = opts.noise_floor * (1.0 + *std::max_element(qn.begin(), qn.end()));
    auto floor = [&](std::size_t i) {
      return base_floor + std::pow(2.0, r + 1) * opts.orbit_noise / std::pow(h_ladder[i + 1], r);
    };
    bool converges = true;
    for (std::size_t i = 1; i < diffs.size(); ++i) {
      if (diffs[i] <= floor(i)) continue;
      if (diffs[i - 1] <= floor(i - 1) || diffs[i] > opts.ratio_bound * diffs[i - 1]) {
        converges = false;
        break;
      }
    }
    est.divergence_profile.push_back(std::move(diffs));
    est.quotient_norms.push_back(std::move(qn));
    if (still_passing && converges) {
      est.order_passed = r;
    } else {
      still_passing = false;
    }
  }
  return est;
}

}  // namespace semiflow
