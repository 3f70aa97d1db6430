#pragma once

#include "semiflow/mild_solver.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace semiflow {

/// Closed box prod_i [lower_i, upper_i] of chart parameters.
struct ParamBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  ParamBox() = default;
  ParamBox(Eigen::VectorXd lo, Eigen::VectorXd hi);
  /// Box center +- radius in every coordinate.
  static ParamBox around(const Eigen::VectorXd& center, double radius);

  int dim() const { return static_cast<int>(lower.size()); }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
  Eigen::VectorXd width() const { return upper - lower; }
  bool contains(const Eigen::VectorXd& u, double slack = 0.0) const;
  bool interior(const Eigen::VectorXd& u) const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& u) const;
};

struct ChartOptions {
  /// Relative finite-difference step (scaled by max(1, box width)).
  double fd_step = 1e-5;
  double rank_tol = 1e-6;
};

/// A parametrization u -> embed(u) of a finite-dimensional submanifold,
/// optionally with boundary {u_last = 0} (then u_last >= 0 on the box).
class Chart {
 public:
  using EmbedFn = std::function<StateVector(const Eigen::VectorXd&)>;
  using JacobianFn = std::function<std::vector<Direction>(const Eigen::VectorXd&)>;

  /// Checks the Jacobian rank at the box center; throws DegenerateChartError.
  Chart(ParamBox box, bool boundary, EmbedFn embed, ChartOptions opts = {}, JacobianFn exact_jacobian = {});

  /// offset + sum_i u_i basis_i, with the exact Jacobian.
  static Chart linear(const StateVector& offset, std::vector<Direction> basis, ParamBox box, bool boundary = false);

  int param_dim() const { return box_.dim(); }
  bool boundary() const { return boundary_; }
  const ParamBox& box() const { return box_; }
  const ChartOptions& options() const { return opts_; }

  /// embed may also be evaluated outside the box where the family allows it.
  StateVector embed(const Eigen::VectorXd& u) const;
  /// Columns d embed / d u_i: exact when supplied, otherwise central
  /// differences (one-sided second order at box faces).
  std::vector<Direction> jacobian(const Eigen::VectorXd& u) const;
  bool on_boundary(const Eigen::VectorXd& u, double tol = 1e-12) const;

 private:
  ParamBox box_;
  bool boundary_;
  EmbedFn embed_;
  ChartOptions opts_;
  JacobianFn exact_jacobian_;
};

struct TangentBasis {
  std::vector<Direction> columns;
  /// Condition number of the Gram matrix of the raw columns.
  double gram_condition = 0.0;
  /// Smallest singular value after normalizing every column.
  double sigma_min = 0.0;
};

/// Throws DegenerateChartError when sigma_min <= rank_tol.
TangentBasis tangent_basis(const Chart& chart, const Eigen::VectorXd& u);

/// Smallest singular value of the column-normalized matrix. Zero columns
/// give 0.
double normalized_sigma_min(const Eigen::MatrixXd& columns);

struct Projection {
  Eigen::VectorXd u;
  /// Distance ||embed(u) - x|| in the state norm.
  double distance = 0.0;
  int iterations = 0;
};

struct ProjectionOptions {
  int max_iterations = 50;
  double step_tol = 1e-13;
};

/// Gauss-Newton on min_u ||embed(u) - x||_2. Throws OffManifoldError when
/// the iteration fails to settle.
Projection project(const Chart& chart, const StateVector& x, const Eigen::VectorXd& u_start,
                   const ProjectionOptions& opts = {});

enum class TangencyVerdict { tangent, tangent_inward, violating };
const char* to_string(TangencyVerdict v);

struct TangencyReport {
  Eigen::VectorXd point_params;
  double residual = 0.0;
  /// Least-squares coefficients of mu(x) in the tangent basis.
  Eigen::VectorXd coefficients;
  bool on_boundary = false;
  /// Coefficient of the boundary-normal coordinate (set on the boundary).
  std::optional<double> inward_component;
  TangencyVerdict verdict = TangencyVerdict::tangent;
};

struct TangencyOptions {
  double tangency_tol = 1e-3;
};

/// Relative distance of v to the tangent span at u, with the coefficients.
TangencyReport tangency_of(const Chart& chart, const Eigen::VectorXd& u, const StateVector& v,
                           const TangencyOptions& opts = {});

/// mu(x) = Ax + P(x) at x = embed(u) against the tangent space. On the
/// boundary face an outward mu (negative normal coefficient) is violating.
TangencyReport nagumo_check(const Chart& chart, const Eigen::VectorXd& u, const Semigroup& s, const Nonlinearity& p,
                            const TangencyOptions& opts = {});

enum class ExitKind { interior_ok, left_chart_box, left_tolerance_tube };
const char* to_string(ExitKind k);

struct LifetimeOptions {
  double horizon = 0.5;
  double tube_tol = 1e-3;
};

struct LifetimeReport {
  double T_exit = 0.0;
  ExitKind exit_kind = ExitKind::interior_ok;
  /// Horizon achieved by the underlying solve.
  double horizon = 0.0;
  double max_distance = 0.0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> params;
  std::vector<double> distances;
};

/// Follows Fl(t, embed(u0)) node by node, projecting back onto the chart.
LifetimeReport lifetime_estimate(const Chart& chart, const Eigen::VectorXd& u0, const Semigroup& s,
                                 const Nonlinearity& p, const SolverOptions& solver,
                                 const LifetimeOptions& opts = {});

}  // namespace semiflow
