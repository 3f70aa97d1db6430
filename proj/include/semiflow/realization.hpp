#pragma once

#include "semiflow/manifold.hpp"
#include "semiflow/sensitivity.hpp"

#include <optional>
#include <string>
#include <vector>

namespace semiflow {

/// mu(x) = Ax + P(x) together with the fields sigma_1 .. sigma_d.
struct VectorFieldSet {
  Semigroup semigroup;
  Nonlinearity p;
  std::vector<Nonlinearity> sigmas;

  int d() const { return static_cast<int>(sigmas.size()); }
  StateVector mu(const StateVector& x) const { return semigroup.generator_apply(x) + p.eval(0.0, x); }
};

/// Smallest singular value of the column-normalized [mu(x), sigma_1(x), ...].
/// Throws DegenerateFieldError if a column vanishes.
double independence_check(const VectorFieldSet& fields, const StateVector& x);

struct SigmaFlowOptions {
  double max_step = 1e-2;
  /// Blow-up when ||x|| exceeds blowup_factor (1 + ||x0||).
  double blowup_factor = 1e6;
};

/// dx/dt = sigma(x) by classical RK4; t may be negative.
StateVector sigma_flow(const Nonlinearity& sigma, const StateVector& x0, double t, const SigmaFlowOptions& opts = {});

struct AlphaOptions {
  SolverOptions solver;
  SigmaFlowOptions sigma;
  ChartOptions chart;
  AlphaOptions() {
    solver.n_steps = 2;
    solver.max_step = 0.01;
  }
};

/// alpha(u) = Fl^{sigma_1}_{u_1} o ... o Fl^{sigma_d}_{u_d} o Fl^{mu}_{u_{d+1}}(x0).
/// The mu coordinate only runs forward, so box.lower[d] must be >= 0.
Chart build_alpha(const VectorFieldSet& fields, const StateVector& x0, const ParamBox& box, bool boundary,
                  const AlphaOptions& opts = {});

struct Thresholds {
  double rank_tol = 1e-6;
  double tangency_tol = 1e-3;
  double ratio_bound = 0.75;
  double invertibility = 0.5;
};

struct CertifyOptions {
  int k_max = 3;
  Thresholds thresholds;
  /// Parameter grid points per coordinate for the pointwise checks.
  int grid_per_dim = 3;
  double invertibility_horizon = 0.1;
  int invertibility_steps = 4;
  std::vector<double> order_ladder{0.2, 0.1, 0.05, 0.025};
  /// Radius of the auto-built alpha box (mu coordinate in [0, radius]).
  double alpha_radius = 0.05;
  bool alpha_boundary = false;
  AlphaOptions alpha;
  SolverOptions solver;
};

struct CheckResult {
  std::string name;
  double margin = 0.0;
  double threshold = 0.0;
  bool pass = false;
  /// "<=" when margin must not exceed threshold, ">=" otherwise.
  std::string sense;
  std::string note;
};

struct RegularityReport {
  double independence_margin = 0.0;
  double alpha_rank_margin = 0.0;
  std::vector<TangencyReport> tangency;
  double boundary_sigma_parallel = 0.0;
  std::vector<DomainOrderEstimate> domain_orders;
  std::vector<double> invertibility;
  /// Sub-checks in fixed order: independence, rank, tangency,
  /// invertibility, boundary_sigma_parallel, domain_order.
  std::vector<CheckResult> checks;
  bool certified = false;
  /// Name of the first failing check (empty when certified).
  std::string failure;
  std::string sampled_region;

  std::string verdict() const { return certified ? "certified" : "failed(" + failure + ")"; }
};

/// Runs every sub-check and records failures instead of throwing. When no
/// chart is given, alpha is built around x0.
RegularityReport certify(const VectorFieldSet& fields, const StateVector& x0, const Chart* chart,
                         const CertifyOptions& opts = {});

/// S_t x0 recovered from one mild solve as x(t) minus the discrete forcing.
OrbitFn solver_orbit(const VectorFieldSet& fields, const StateVector& x0, double horizon, double node_spacing,
                     const SolverOptions& opts);

}  // namespace semiflow
