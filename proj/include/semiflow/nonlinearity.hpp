#pragma once

#include "semiflow/state_space.hpp"

#include <functional>
#include <optional>

namespace semiflow {

/// The lower-order term P(t, x) of dx/dt = Ax + P(t, x), with its first and
/// (optionally) second derivative in x. Autonomous models ignore t.
class Nonlinearity {
 public:
  using EvalFn = std::function<StateVector(double t, const StateVector& x)>;
  using JacobianFn = std::function<StateVector(double t, const StateVector& x, const Direction& y)>;
  using HessianFn =
      std::function<StateVector(double t, const StateVector& x, const Direction& y1, const Direction& y2)>;

  Nonlinearity(EvalFn eval, JacobianFn jacobian, HessianFn hessian = {});

  /// P == 0 with vanishing derivatives.
  static Nonlinearity zero();
  /// P(x) = c for every x (c is stamped onto the grid of the argument).
  static Nonlinearity constant(const StateVector& c);

  StateVector eval(double t, const StateVector& x) const;
  Direction jacobian_apply(double t, const StateVector& x, const Direction& y) const;
  /// Throws CapabilityError when no second derivative was supplied.
  Direction hessian_apply(double t, const StateVector& x, const Direction& y1, const Direction& y2) const;
  bool has_hessian() const { return static_cast<bool>(hessian_); }

  std::optional<double> lipschitz_hint;
  int smoothness_class = 1;
  /// Largest r with P mapping into D(A^r).
  int maps_into_domain_order = 0;

 private:
  EvalFn eval_;
  JacobianFn jacobian_;
  HessianFn hessian_;
};

/// P~(x) = P(x) on the ball ||x|| <= K and P(K x / ||x||) outside it.
/// Derivatives outside the ball are those of P at the projected point.
Nonlinearity truncate(const Nonlinearity& p, double radius);

}  // namespace semiflow
