#pragma once

// Independent reference computations for the unit and acceptance tests.

#include <Eigen/Dense>

#include <cmath>
#include <functional>

namespace oracle {

// Classical RK4 for dx/dt = f(x) with a fixed number of steps.
inline Eigen::VectorXd rk4(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                           double t, int steps) {
  const double h = t / steps;
  for (int i = 0; i < steps; ++i) {
    const Eigen::VectorXd k1 = f(x);
    const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
    const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
    const Eigen::VectorXd k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

inline double riccati(double x0, double t) { return x0 / (1.0 - x0 * t); }
inline double riccati_dx(double x0, double t) { return 1.0 / ((1.0 - x0 * t) * (1.0 - x0 * t)); }
inline double riccati_dxx(double x0, double t) { return 2.0 * t / std::pow(1.0 - x0 * t, 3); }

// Least-squares residual of b against the columns of a, via normal equations.
inline Eigen::VectorXd ls_residual(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::MatrixXd g = a.transpose() * a;
  const Eigen::VectorXd c = g.ldlt().solve(a.transpose() * b);
  return b - a * c;
}

inline Eigen::VectorXd ls_coefficients(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  return (a.transpose() * a).ldlt().solve(a.transpose() * b);
}

// Smallest singular value of a 2-column matrix from its Gram matrix.
inline double sigma_min_two_columns(const Eigen::MatrixXd& a) {
  const double g11 = a.col(0).squaredNorm();
  const double g22 = a.col(1).squaredNorm();
  const double g12 = a.col(0).dot(a.col(1));
  const double tr = g11 + g22;
  const double det = g11 * g22 - g12 * g12;
  const double lo = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
  return std::sqrt(std::max(0.0, lo));
}

}  // namespace oracle
