#pragma once

#include "semiflow/state_space.hpp"

#include <functional>
#include <span>
#include <vector>

namespace semiflow {

enum class SemigroupKind { shift, diagonal };

/// A strongly continuous semigroup S_t with access to its generator.
///
/// shift:    (S_t x)(xi) = x(xi + t), generator d/dxi. Each application
///           consumes t of the grid's extension margin.
/// diagonal: (S_t x)_n = exp(-lambda_n t) x_n, generator -diag(lambda).
class Semigroup {
 public:
  static Semigroup shift(GridPtr grid);
  static Semigroup diagonal(Eigen::VectorXd lambda);

  SemigroupKind kind() const { return kind_; }
  const Eigen::VectorXd& lambda() const { return lambda_; }
  const GridPtr& grid() const { return grid_; }

  StateVector apply(double t, const StateVector& x) const;
  /// Same as apply() but reuses a spline already built for x.
  StateVector apply(double t, const StateVector& x, const CubicSpline& spline) const;
  StateVector generator_apply(const StateVector& x) const;

  /// Extension margin still available to x (infinite for diagonal).
  double remaining_horizon(const StateVector& x) const;

  /// max over the given times of the sup-norm operator norm of S_t on the
  /// discretized space. Exact for diagonal semigroups; for the shift it is
  /// computed from the cardinal splines (spline overshoot included).
  double operator_norm(std::span<const double> times) const;

 private:
  Semigroup() = default;
  void check_state(const StateVector& x, const char* where) const;

  SemigroupKind kind_ = SemigroupKind::diagonal;
  Eigen::VectorXd lambda_;
  GridPtr grid_;
  // Five-point first-derivative stencils (start index, weights) per node.
  std::vector<int> stencil_start_;
  Eigen::MatrixXd stencil_weights_;
};

struct DomainOrderEstimate {
  StateVector point;
  int max_order_tested = 0;
  int order_passed = 0;
  /// divergence_profile[r-1][i] = ||q_r(h_{i+1}) - q_r(h_i)|| where q_r(h)
  /// is the r-th forward difference quotient of the orbit.
  std::vector<std::vector<double>> divergence_profile;
  /// quotient_norms[r-1][i] = ||q_r(h_i)||.
  std::vector<std::vector<double>> quotient_norms;
};

struct DomainOrderOptions {
  /// Successive differences of the quotients must shrink at least this fast.
  double ratio_bound = 0.75;
  /// Differences below noise_floor * (1 + max ||q||) count as converged.
  double noise_floor = 1e-9;
  /// Absolute error of the orbit values (e.g. a solver tolerance); adds
  /// 2^{r+1} orbit_noise / h^r to the floor of the order-r differences.
  double orbit_noise = 0.0;
};

/// Orbit t -> S_t x; lets callers supply the orbit through another route
/// (e.g. the mild solver identity) instead of applying S directly.
using OrbitFn = std::function<StateVector(double)>;

DomainOrderEstimate domain_order_estimate(const Semigroup& s, const StateVector& x, int k,
                                          std::span<const double> h_ladder, const DomainOrderOptions& opts = {});
DomainOrderEstimate domain_order_estimate(const OrbitFn& orbit, const StateVector& x, int k,
                                          std::span<const double> h_ladder, const DomainOrderOptions& opts = {});

}  // namespace semiflow
