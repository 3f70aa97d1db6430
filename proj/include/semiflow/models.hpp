#pragma once

#include "semiflow/manifold.hpp"
#include "semiflow/realization.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace semiflow {

struct ModelInstance {
  std::string name;
  GridPtr grid;
  Semigroup semigroup;
  Nonlinearity p;
  std::vector<Nonlinearity> sigmas;
  StateVector x0;
  /// The model's finite-dimensional family (perturbed when requested).
  std::optional<Chart> chart;
  bool chart_invariant = false;
  /// Closed-form reference values keyed by name.
  std::map<std::string, double> expected;

  VectorFieldSet fields() const { return {semigroup, p, sigmas}; }
  /// Chart tangent basis at the box center, or the coordinate axes.
  std::vector<Direction> default_directions() const;
};

/// pure_shift, riccati_scalar, diagonal_linear or hjm_constant_vol. Unknown
/// names or parameters raise ConfigError.
ModelInstance instantiate(const std::string& name, const nlohmann::json& params = nlohmann::json::object());

std::vector<std::string> model_names();

}  // namespace semiflow
