#pragma once

#include "semiflow/nonlinearity.hpp"
#include "semiflow/semigroup.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace semiflow {

struct SolverOptions {
  int n_steps = 100;
  /// When set, n_steps is raised so that no step is longer than this.
  std::optional<double> max_step;
  double tol = 1e-12;
  int max_picard = 200;
  /// Radius K of the truncation ball; defaults to 2 ||x0||.
  std::optional<double> truncation_radius;
  /// Compute (M, C) for the Gronwall bound as part of solve().
  bool certify_constants = false;
  int lipschitz_samples = 200;
  std::uint64_t seed = 0;

  int steps_for(double horizon) const;
};

/// Mild solution of dx/dt = Ax + P(t, x) on a uniform quadrature grid.
///
/// Each of the n_steps steps carries a midpoint, so `times` holds
/// 2 n_steps + 1 nodes. forcing[k] is the discrete integral term so that
/// trajectory[k] = S_{t_k} x0 + forcing[k] up to the Picard tolerance.
struct SolveReport {
  std::vector<double> times;
  std::vector<StateVector> trajectory;
  std::vector<StateVector> forcing;
  /// State at the auxiliary quadrature node dt / 2 (see detail::march).
  std::optional<StateVector> half_state;
  double requested_horizon = 0.0;
  double horizon = 0.0;
  bool stopped_early = false;
  double truncation_radius = 0.0;
  std::vector<int> picard_iterations_per_step;
  double residual = 0.0;
  int n_steps = 0;
  std::optional<double> M;
  std::optional<double> C;
  /// Extension margin left after the horizon (infinite for diagonal).
  double remaining_horizon = 0.0;

  const StateVector& final_state() const { return trajectory.back(); }
  /// Index of the node at time t; throws DomainError if t is not a node.
  std::size_t node_index(double t) const;
  const StateVector& at(double t) const { return trajectory[node_index(t)]; }
  /// M e^{M C T} with T the achieved horizon (requires M and C).
  double gronwall_factor() const;
};

SolveReport solve(const Semigroup& s, const Nonlinearity& p, const StateVector& x0, double horizon,
                  const SolverOptions& opts = {});

/// Fl(t, x0): the final state of solve(), or x0 itself for t == 0. Throws
/// HorizonExceededError if the solution left the truncation ball early.
StateVector flow(const Semigroup& s, const Nonlinearity& p, const StateVector& x0, double t,
                 const SolverOptions& opts = {});

/// max over `samples` seeded random pairs in the ball of radius K of
/// ||P(u) - P(v)|| / ||u - v||.
double estimate_lipschitz(const Nonlinearity& p, const StateVector& like, double radius, int samples,
                          std::uint64_t seed);

/// ||Fl(s, Fl(t, x0)) - Fl(s + t, x0)|| with a common step length.
double semiflow_defect(const Semigroup& sg, const Nonlinearity& p, const StateVector& x0, double s, double t,
                       const SolverOptions& opts = {});

struct GronwallCertificate {
  double lhs = 0.0;
  double bound = 0.0;
  bool holds = false;
  double M = 0.0;
  double C = 0.0;
  double horizon = 0.0;
};

/// Checks sup_t ||x(t) - y(t)|| <= M e^{M C T} ||x0 - y0|| for the two mild
/// solutions, with M = sup_t ||S_t|| over the quadrature times and C the
/// Lipschitz constant of P on the common truncation ball. Without an explicit
/// truncation_radius the ball starts at 2 max(||x0||, ||y0||) and doubles
/// until both solutions reach the horizon inside it.
GronwallCertificate gronwall_certificate(const Semigroup& s, const Nonlinearity& p, const StateVector& x0,
                                         const StateVector& y0, double horizon, const SolverOptions& opts = {});

namespace detail {

/// Composite quadrature weights for the integral over [t_0, t_k] on a
/// uniform grid of spacing dt: Simpson for even k, Simpson plus a 3/8 panel
/// for odd k >= 3, trapezoid for k = 1. march() does not use the k = 1
/// weights; node 1 gets Simpson through an auxiliary node at dt / 2.
std::vector<double> quadrature_weights(int k, double dt);

/// Integrand g_l = integrand(l, state_l) of a mild equation
/// u(t) = S_t u0 + int_0^t S_{t-s} g(s) ds. Node -1 is the auxiliary node
/// at dt / 2.
using Integrand = std::function<StateVector(int node, const StateVector& state)>;

struct MarchResult {
  std::vector<StateVector> states;
  std::vector<StateVector> forcing;
  std::vector<int> iterations;
  double residual = 0.0;
  bool stopped_early = false;
  std::optional<StateVector> half_state;
  std::optional<StateVector> half_forcing;
};

/// Per-step Picard iteration of the discrete mild equation. `inside` (when
/// given) is checked on each converged step; a false return stops the march.
MarchResult march(const Semigroup& s, const StateVector& u0, int n_steps, double dt, const Integrand& integrand,
                  double tol, int max_picard, const std::function<bool(const StateVector&)>& inside = {});

}  // namespace detail

}  // namespace semiflow
