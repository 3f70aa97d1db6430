#pragma once

#include "semiflow/manifold.hpp"
#include "semiflow/mild_solver.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace semiflow {

/// Value and first (optionally second) variations of the flow at one time.
struct SensitivityJet {
  double time = 0.0;
  StateVector base;
  std::vector<Direction> directions;
  /// first[i] = D_x Fl(t, x) y_i
  std::vector<Direction> first;
  /// second[i][j] = D^2_x Fl(t, x)(y_i, y_j)
  std::optional<std::vector<std::vector<Direction>>> second;
};

/// Jets at every quadrature node of one base solve.
struct JetSequence {
  SolveReport base;
  std::vector<Direction> directions;
  int order = 1;
  /// first[i][k] at node k.
  std::vector<std::vector<Direction>> first;
  /// first variations at the auxiliary node dt / 2.
  std::vector<Direction> first_half;
  /// second[i][j][k] at node k (order 2 only).
  std::vector<std::vector<std::vector<Direction>>> second;
  /// Largest Picard residual over the variational solves.
  double residual = 0.0;

  std::size_t size() const { return base.times.size(); }
  const std::vector<double>& times() const { return base.times; }
  SensitivityJet at(std::size_t node) const;
};

/// Solves the first (and for order 2 the second) variational mild
/// equations along the base trajectory with the same quadrature as solve().
/// Throws HorizonExceededError when the base solve stops early and
/// CapabilityError when order 2 is requested without a hessian.
JetSequence propagate_jet(const Semigroup& s, const Nonlinearity& p, const StateVector& x0,
                          const std::vector<Direction>& directions, double horizon, int order,
                          const SolverOptions& opts = {});

struct FdCheckResult {
  std::vector<double> eps;
  std::vector<double> errors;
  double best_error = 0.0;
  /// Least-squares slope of log error against log eps over the ladder
  /// entries above the noise floor; NaN when fewer than two remain.
  double observed_order = 0.0;
  int points_used = 0;
};

/// psi(t, x0, y) against central differences (Fl(t, x0 + eps y) - Fl(t, x0 - eps y)) / 2 eps.
FdCheckResult fd_check(const Semigroup& s, const Nonlinearity& p, const StateVector& x0, const Direction& y, double t,
                       const std::vector<double>& eps_ladder, const SolverOptions& opts = {});

struct TimeDerivative {
  /// d/dt Fl(t, x) at the start of the jet sequence, in span{y_i}.
  Direction derivative;
  Eigen::VectorXd coefficients;
  /// ||Fl(h, x) - x - (int_0^h D_x Fl(s, x) ds) v||
  double residual = 0.0;
  double condition = 0.0;
};

/// Inverts the averaged differential int_0^h D_x Fl(s, x) ds on the span of
/// the jet directions by least squares. h must be a node of the sequence.
/// Throws SingularityError when the condition number reaches 1e6.
TimeDerivative time_derivative_reconstruct(const JetSequence& jets, double h);

struct InvertibilityOptions {
  double threshold = 0.9;
  /// Frame in which D_x Fl(t, x) b_i is expressed at node k; defaults to
  /// the tangent basis itself.
  std::function<std::vector<Direction>(std::size_t node)> frame_at;
  /// Nodes to examine (all when empty).
  std::vector<std::size_t> nodes;
};

struct InvertibilityProfile {
  std::vector<double> times;
  std::vector<double> sigma_min;
  std::optional<double> first_below;
};

/// sigma_min of the coordinate matrix of [psi(t, x, b_1) ... psi(t, x, b_n)]
/// in the frame. The jets must have been propagated along the basis.
InvertibilityProfile restricted_differential_invertibility(const JetSequence& jets,
                                                           const std::vector<Direction>& tangent_basis,
                                                           const InvertibilityOptions& opts = {});

struct EmbedOptions {
  /// Convergence when ||Fl(t, z) - y|| <= tol (1 + ||y||).
  double tol = 1e-9;
  int max_iterations = 50;
  int max_halvings = 30;
};

struct EmbedResult {
  StateVector point;
  Eigen::VectorXd params;
  double defect = 0.0;
  int iterations = 0;
};

/// Solves Fl(t, embed(u)) = y for u by damped Gauss-Newton in chart
/// coordinates. Throws NoEmbeddingError when the iteration stalls.
EmbedResult backward_embed(const Semigroup& s, const Nonlinearity& p, const StateVector& y, double t,
                           const Chart& chart, const SolverOptions& solver = {}, const EmbedOptions& opts = {});

}  // namespace semiflow
