#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace semiflow {

enum class NormKind { sup, l2_weighted };

/// Strictly increasing abscissae plus the extension margin a shift
/// semigroup may consume to the right of the last node.
///
/// Grids with at least four nodes carry a prefactored not-a-knot spline
/// system so that building a spline for new values costs O(m).
class Grid {
 public:
  explicit Grid(std::vector<double> nodes, double extension_margin = 0.0,
                std::vector<double> weights = {});

  static std::shared_ptr<const Grid> uniform(double a, double b, int n, double extension_margin);
  /// Coordinates 0..n-1 for spectral / diagonal state vectors.
  static std::shared_ptr<const Grid> index(int n);

  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<double>& nodes() const { return nodes_; }
  double node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  double front() const { return nodes_.front(); }
  double back() const { return nodes_.back(); }
  double extension_margin() const { return margin_; }
  double extended_end() const { return nodes_.back() + margin_; }
  const std::vector<double>& weights() const { return weights_; }
  bool supports_splines() const { return spline_solver_ != nullptr; }

  /// Index i of the interval [x_i, x_{i+1}] used to evaluate at xi; clamped
  /// to the first/last interval outside the node range.
  int locate(double xi) const;

  /// Second derivatives of the not-a-knot spline through `values`.
  Eigen::VectorXd spline_moments(const Eigen::VectorXd& values) const;

 private:
  std::vector<double> nodes_;
  double margin_;
  std::vector<double> weights_;
  bool uniform_ = false;
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> spline_solver_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// A discretized element of the state space: one value per grid node.
///
/// `horizon_used` records how much of the grid's extension margin the
/// value has already consumed through shift-semigroup applications.
class StateVector {
 public:
  StateVector(GridPtr grid, Eigen::VectorXd values, NormKind norm_kind = NormKind::sup,
              double horizon_used = 0.0);

  static StateVector zeros(GridPtr grid, NormKind norm_kind = NormKind::sup);
  /// Samples f at every node.
  template <typename F>
  static StateVector sample(GridPtr grid, F&& f, NormKind norm_kind = NormKind::sup) {
    Eigen::VectorXd v(grid->size());
    for (int i = 0; i < grid->size(); ++i) v[i] = f(grid->node(i));
    return StateVector(std::move(grid), std::move(v), norm_kind);
  }

  const GridPtr& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](int i) const { return values_[i]; }
  int size() const { return static_cast<int>(values_.size()); }
  NormKind norm_kind() const { return norm_kind_; }
  double horizon_used() const { return horizon_used_; }

  /// Same grid, norm kind and horizon bookkeeping, new values.
  StateVector with_values(Eigen::VectorXd values) const;
  StateVector with_horizon_used(double used) const;

 private:
  GridPtr grid_;
  Eigen::VectorXd values_;
  NormKind norm_kind_;
  double horizon_used_;
};

/// Tangent directions share the representation of states.
using Direction = StateVector;

double norm(const StateVector& x);
double norm(const StateVector& x, NormKind kind);

/// a*x + y. Throws ShapeError when the grids differ.
StateVector axpy(double a, const StateVector& x, const StateVector& y);
StateVector operator+(const StateVector& x, const StateVector& y);
StateVector operator-(const StateVector& x, const StateVector& y);
StateVector operator*(double a, const StateVector& x);

bool same_grid(const StateVector& x, const StateVector& y);
void require_same_grid(const StateVector& x, const StateVector& y, const char* where);

/// Not-a-knot cubic spline over a grid. Evaluation to the right of the last
/// node continues the last cubic piece up to the extended end of the grid.
class CubicSpline {
 public:
  explicit CubicSpline(const StateVector& x);

  /// Throws DomainError outside [front, extended_end].
  double operator()(double xi) const;
  double derivative(double xi) const;

 private:
  GridPtr grid_;
  Eigen::VectorXd y_;
  Eigen::VectorXd m_;
};

double interpolate(const StateVector& x, double xi);

/// CSV with header `xi,value`, one row per node.
void write_csv(std::ostream& out, const StateVector& x);
StateVector read_csv(std::istream& in, double extension_margin = 0.0);

/// Stacks directions as the columns of a matrix (values only).
Eigen::MatrixXd as_columns(std::span<const Direction> directions);

}  // namespace semiflow
