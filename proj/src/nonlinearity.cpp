#include "semiflow/nonlinearity.hpp"

#include "semiflow/errors.hpp"

#include <algorithm>

namespace semiflow {

namespace {

// Results of P inherit the horizon consumed by their argument.
StateVector stamp(StateVector r, const StateVector& x, const char* where) {
  if (r.size() != x.size()) throw ShapeError(std::string(where) + " returned a vector of the wrong length");
  const double used = std::max(r.horizon_used(), x.horizon_used());
  if (r.grid() == x.grid() && used == r.horizon_used()) return r;
  return StateVector(x.grid(), r.values(), x.norm_kind(), used);
}

}  // namespace

Nonlinearity::Nonlinearity(EvalFn eval, JacobianFn jacobian, HessianFn hessian)
    : eval_(std::move(eval)), jacobian_(std::move(jacobian)), hessian_(std::move(hessian)) {
  if (!eval_) throw ConfigError("nonlinearity needs an evaluation function");
  if (!jacobian_) throw ConfigError("nonlinearity needs a jacobian");
}

Nonlinearity Nonlinearity::zero() {
  Nonlinearity p([](double, const StateVector& x) { return x.with_values(Eigen::VectorXd::Zero(x.size())); },
                 [](double, const StateVector&, const Direction& y) {
                   return y.with_values(Eigen::VectorXd::Zero(y.size()));
                 },
                 [](double, const StateVector&, const Direction& y1, const Direction&) {
                   return y1.with_values(Eigen::VectorXd::Zero(y1.size()));
                 });
  p.lipschitz_hint = 0.0;
  p.smoothness_class = 1000;
  p.maps_into_domain_order = 1000;
  return p;
}

Nonlinearity Nonlinearity::constant(const StateVector& c) {
  const Eigen::VectorXd v = c.values();
  Nonlinearity p(
      [v](double, const StateVector& x) {
        if (x.size() != v.size()) throw ShapeError("constant field evaluated on a different grid");
        return x.with_values(v);
      },
      [](double, const StateVector&, const Direction& y) { return y.with_values(Eigen::VectorXd::Zero(y.size())); },
      [](double, const StateVector&, const Direction& y1, const Direction&) {
        return y1.with_values(Eigen::VectorXd::Zero(y1.size()));
      });
  p.lipschitz_hint = 0.0;
  p.smoothness_class = 1000;
  return p;
}

StateVector Nonlinearity::eval(double t, const StateVector& x) const { return stamp(eval_(t, x), x, "P"); }

Direction Nonlinearity::jacobian_apply(double t, const StateVector& x, const Direction& y) const {
  return stamp(jacobian_(t, x, y), y, "D_xP");
}

Direction Nonlinearity::hessian_apply(double t, const StateVector& x, const Direction& y1,
                                      const Direction& y2) const {
  if (!hessian_) throw CapabilityError("second variation requested but the nonlinearity has no hessian");
  return stamp(hessian_(t, x, y1, y2), y1, "D2_xP");
}

Nonlinearity truncate(const Nonlinearity& p, double radius) {
  if (!(radius > 0.0)) throw ConfigError("truncation radius must be positive");
  auto project = [radius](const StateVector& x) {
    const double n = norm(x);
    return n <= radius ? x : (radius / n) * x;
  };
  Nonlinearity::HessianFn hess;
  if (p.has_hessian()) {
    hess = [p, project](double t, const StateVector& x, const Direction& y1, const Direction& y2) {
      return p.hessian_apply(t, project(x), y1, y2);
    };
  }
  Nonlinearity out([p, project](double t, const StateVector& x) { return p.eval(t, project(x)); },
                   [p, project](double t, const StateVector& x, const Direction& y) {
                     return p.jacobian_apply(t, project(x), y);
                   },
                   std::move(hess));
  out.lipschitz_hint = p.lipschitz_hint;
  out.smoothness_class = p.smoothness_class;
  out.maps_into_domain_order = p.maps_into_domain_order;
  return out;
}

}  // namespace semiflow
