#include "semiflow/state_space.hpp"

#include "semiflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace semiflow {

namespace {

constexpr double kDomainSlack = 1e-12;

bool is_uniform(const std::vector<double>& nodes) {
  if (nodes.size() < 3) return true;
  const double h = (nodes.back() - nodes.front()) / static_cast<double>(nodes.size() - 1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (std::abs(nodes[i] - (nodes.front() + h * static_cast<double>(i))) > 1e-12 * (1.0 + std::abs(nodes.back())))
      return false;
  }
  return true;
}

}  // namespace

Grid::Grid(std::vector<double> nodes, double extension_margin, std::vector<double> weights)
    : nodes_(std::move(nodes)), margin_(extension_margin), weights_(std::move(weights)) {
  if (nodes_.empty()) throw InvalidStateError("grid needs at least one node");
  for (double v : nodes_)
    if (!std::isfinite(v)) throw InvalidStateError("grid nodes must be finite");
  for (std::size_t i = 1; i < nodes_.size(); ++i)
    if (!(nodes_[i] > nodes_[i - 1])) throw InvalidStateError("grid nodes must be strictly increasing");
  if (!(extension_margin >= 0.0) || !std::isfinite(extension_margin))
    throw InvalidStateError("extension margin must be finite and >= 0");
  if (weights_.empty()) weights_.assign(nodes_.size(), 1.0);
  if (weights_.size() != nodes_.size()) throw ShapeError("grid weights must match node count");
  for (double w : weights_)
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidStateError("grid weights must be positive");
  uniform_ = is_uniform(nodes_);

  const int m = size();
  if (m < 4) return;

  // Not-a-knot: third derivative continuous across the second and the
  // second-to-last node. Interior rows are the usual moment equations.
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(3 * m + 2));
  auto h = [&](int i) { return nodes_[static_cast<std::size_t>(i + 1)] - nodes_[static_cast<std::size_t>(i)]; };
  t.emplace_back(0, 0, h(1));
  t.emplace_back(0, 1, -(h(0) + h(1)));
  t.emplace_back(0, 2, h(0));
  for (int i = 1; i < m - 1; ++i) {
    t.emplace_back(i, i - 1, h(i - 1));
    t.emplace_back(i, i, 2.0 * (h(i - 1) + h(i)));
    t.emplace_back(i, i + 1, h(i));
  }
  t.emplace_back(m - 1, m - 3, h(m - 2));
  t.emplace_back(m - 1, m - 2, -(h(m - 3) + h(m - 2)));
  t.emplace_back(m - 1, m - 1, h(m - 3));
  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(t.begin(), t.end());
  a.makeCompressed();
  auto solver = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
  solver->compute(a);
  if (solver->info() != Eigen::Success) throw InvalidStateError("spline system is singular");
  spline_solver_ = std::move(solver);
}

std::shared_ptr<const Grid> Grid::uniform(double a, double b, int n, double extension_margin) {
  if (n < 2) throw InvalidStateError("uniform grid needs at least two nodes");
  if (!(b > a)) throw InvalidStateError("uniform grid needs b > a");
  std::vector<double> nodes(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) nodes[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  nodes.back() = b;
  return std::make_shared<const Grid>(std::move(nodes), extension_margin);
}

std::shared_ptr<const Grid> Grid::index(int n) {
  if (n < 1) throw InvalidStateError("index grid needs at least one coordinate");
  std::vector<double> nodes(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) nodes[static_cast<std::size_t>(i)] = i;
  return std::make_shared<const Grid>(std::move(nodes), 0.0);
}

int Grid::locate(double xi) const {
  const int m = size();
  if (m < 2) return 0;
  if (xi <= nodes_.front()) return 0;
  if (xi >= nodes_.back()) return m - 2;
  if (uniform_) {
    const double h = (nodes_.back() - nodes_.front()) / (m - 1);
    int i = static_cast<int>((xi - nodes_.front()) / h);
    i = std::clamp(i, 0, m - 2);
    // Guard against rounding at interval ends.
    if (xi < nodes_[static_cast<std::size_t>(i)] && i > 0) --i;
    if (xi > nodes_[static_cast<std::size_t>(i + 1)] && i < m - 2) ++i;
    return i;
  }
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), xi);
  return std::clamp(static_cast<int>(it - nodes_.begin()) - 1, 0, m - 2);
}

Eigen::VectorXd Grid::spline_moments(const Eigen::VectorXd& values) const {
  if (!spline_solver_) throw DomainError("cubic splines need at least four nodes");
  const int m = size();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (int i = 1; i < m - 1; ++i) {
    const double h0 = nodes_[static_cast<std::size_t>(i)] - nodes_[static_cast<std::size_t>(i - 1)];
    const double h1 = nodes_[static_cast<std::size_t>(i + 1)] - nodes_[static_cast<std::size_t>(i)];
    rhs[i] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
  }
  return spline_solver_->solve(rhs);
}

StateVector::StateVector(GridPtr grid, Eigen::VectorXd values, NormKind norm_kind, double horizon_used)
    : grid_(std::move(grid)), values_(std::move(values)), norm_kind_(norm_kind), horizon_used_(horizon_used) {
  if (!grid_) throw InvalidStateError("state vector needs a grid");
  if (values_.size() != grid_->size())
    throw ShapeError("state vector length " + std::to_string(values_.size()) + " does not match grid size " +
                     std::to_string(grid_->size()));
  if (!values_.allFinite()) throw InvalidStateError("state vector contains non-finite values");
}

StateVector StateVector::zeros(GridPtr grid, NormKind norm_kind) {
  const int n = grid->size();
  return StateVector(std::move(grid), Eigen::VectorXd::Zero(n), norm_kind);
}

StateVector StateVector::with_values(Eigen::VectorXd values) const {
  return StateVector(grid_, std::move(values), norm_kind_, horizon_used_);
}

StateVector StateVector::with_horizon_used(double used) const {
  return StateVector(grid_, values_, norm_kind_, used);
}

double norm(const StateVector& x, NormKind kind) {
  const auto& v = x.values();
  if (!v.allFinite()) throw InvalidStateError("norm of a non-finite state");
  if (kind == NormKind::sup) return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
  const auto& w = x.grid()->weights();
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += w[static_cast<std::size_t>(i)] * v[i] * v[i];
  return std::sqrt(s);
}

double norm(const StateVector& x) { return norm(x, x.norm_kind()); }

bool same_grid(const StateVector& x, const StateVector& y) {
  return x.grid() == y.grid() || (x.grid()->nodes() == y.grid()->nodes() &&
                                  x.grid()->extension_margin() == y.grid()->extension_margin());
}

void require_same_grid(const StateVector& x, const StateVector& y, const char* where) {
  if (!same_grid(x, y)) throw ShapeError(std::string(where) + ": grid mismatch");
}

StateVector axpy(double a, const StateVector& x, const StateVector& y) {
  require_same_grid(x, y, "axpy");
  return StateVector(y.grid(), a * x.values() + y.values(), y.norm_kind(),
                     std::max(x.horizon_used(), y.horizon_used()));
}

StateVector operator+(const StateVector& x, const StateVector& y) { return axpy(1.0, x, y); }
StateVector operator-(const StateVector& x, const StateVector& y) { return axpy(-1.0, y, x); }
StateVector operator*(double a, const StateVector& x) { return x.with_values(a * x.values()); }

CubicSpline::CubicSpline(const StateVector& x) : grid_(x.grid()), y_(x.values()) {
  m_ = grid_->spline_moments(y_);
}

double CubicSpline::operator()(double xi) const {
  const double lo = grid_->front();
  const double hi = grid_->extended_end();
  const double slack = kDomainSlack * (1.0 + std::abs(hi));
  if (!(xi >= lo - slack) || !(xi <= hi + slack))
    throw DomainError("interpolation point " + std::to_string(xi) + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  const int i = grid_->locate(xi);
  const double x0 = grid_->node(i);
  const double x1 = grid_->node(i + 1);
  const double h = x1 - x0;
  const double a = x1 - xi;
  const double b = xi - x0;
  return m_[i] * a * a * a / (6.0 * h) + m_[i + 1] * b * b * b / (6.0 * h) + (y_[i] / h - m_[i] * h / 6.0) * a +
         (y_[i + 1] / h - m_[i + 1] * h / 6.0) * b;
}

double CubicSpline::derivative(double xi) const {
  const int i = grid_->locate(xi);
  const double x0 = grid_->node(i);
  const double x1 = grid_->node(i + 1);
  const double h = x1 - x0;
  const double a = x1 - xi;
  const double b = xi - x0;
  return -m_[i] * a * a / (2.0 * h) + m_[i + 1] * b * b / (2.0 * h) + (y_[i + 1] - y_[i]) / h -
         (m_[i + 1] - m_[i]) * h / 6.0;
}

double interpolate(const StateVector& x, double xi) { return CubicSpline(x)(xi); }

void write_csv(std::ostream& out, const StateVector& x) {
  out << "xi,value\n";
  char buf[64];
  for (int i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x.grid()->node(i), x[i]);
    out << buf;
  }
}

StateVector read_csv(std::istream& in, double extension_margin) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty state csv");
  if (line != "xi,value" && line != "xi,value\r") throw ConfigError("state csv header must be 'xi,value'");
  std::vector<double> xi;
  std::vector<double> v;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("state csv line " + std::to_string(lineno) + ": expected 'xi,value'");
    try {
      std::size_t used = 0;
      xi.push_back(std::stod(line.substr(0, comma), &used));
      v.push_back(std::stod(line.substr(comma + 1), &used));
    } catch (const std::logic_error&) {
      throw ConfigError("state csv line " + std::to_string(lineno) + ": not a number");
    }
  }
  auto grid = std::make_shared<const Grid>(std::move(xi), extension_margin);
  return StateVector(grid, Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

Eigen::MatrixXd as_columns(std::span<const Direction> directions) {
  if (directions.empty()) return {};
  Eigen::MatrixXd m(directions.front().size(), static_cast<Eigen::Index>(directions.size()));
  for (std::size_t j = 0; j < directions.size(); ++j) {
    if (directions[j].size() != m.rows()) throw ShapeError("directions have different lengths");
    m.col(static_cast<Eigen::Index>(j)) = directions[j].values();
  }
  return m;
}

}  // namespace semiflow
