#include "semiflow/models.hpp"

#include "semiflow/errors.hpp"

#include <cmath>
#include <set>

namespace semiflow {

namespace {

using nlohmann::json;

class Params {
 public:
  Params(const std::string& model, const json& j, std::set<std::string> allowed) : model_(model), j_(j) {
    if (j_.is_null()) j_ = json::object();
    if (!j_.is_object()) throw ConfigError("model.params must be an object");
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!allowed.count(it.key())) throw ConfigError("unknown parameter '" + it.key() + "' for model " + model_);
  }

  double number(const std::string& key, double fallback) const {
    if (!j_.contains(key)) return fallback;
    if (!j_[key].is_number()) throw ConfigError("model parameter '" + key + "' must be a number");
    return j_[key].get<double>();
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!j_.contains(key)) return fallback;
    if (!j_[key].is_boolean()) throw ConfigError("model parameter '" + key + "' must be true or false");
    return j_[key].get<bool>();
  }

  Eigen::VectorXd vector(const std::string& key, Eigen::VectorXd fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_[key];
    if (v.is_number()) return Eigen::VectorXd::Constant(1, v.get<double>());
    if (!v.is_array() || v.empty()) throw ConfigError("model parameter '" + key + "' must be a non-empty list");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError("model parameter '" + key + "' must hold numbers");
      out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
  }

  Eigen::MatrixXd matrix(const std::string& key, Eigen::MatrixXd fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_[key];
    if (!v.is_array() || v.empty() || !v[0].is_array()) throw ConfigError("model parameter '" + key + "' must be a list of rows");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v[0].size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_array() || v[i].size() != v[0].size()) throw ConfigError("model parameter '" + key + "' is ragged");
      for (std::size_t k = 0; k < v[i].size(); ++k) {
        if (!v[i][k].is_number()) throw ConfigError("model parameter '" + key + "' must hold numbers");
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[i][k].get<double>();
      }
    }
    return out;
  }

  GridPtr curve_grid() const {
    const double a = number("grid_start", 0.0);
    const double b = number("grid_end", 3.0);
    const double n = number("grid_nodes", 121);
    const double margin = number("extension_margin", 1.0);
    if (n != std::floor(n) || n < 5) throw ConfigError("grid_nodes must be an integer >= 5");
    return Grid::uniform(a, b, static_cast<int>(n), margin);
  }

 private:
  std::string model_;
  json j_;
};

const std::set<std::string> kGridKeys{"grid_start", "grid_end", "grid_nodes", "extension_margin"};

std::set<std::string> with_grid(std::set<std::string> keys) {
  keys.insert(kGridKeys.begin(), kGridKeys.end());
  return keys;
}

Nonlinearity constant_field(const StateVector& c) { return Nonlinearity::constant(c); }

ModelInstance pure_shift(const json& j) {
  const Params prm("pure_shift", j, with_grid({"lambda", "perturbation", "boundary_chart", "box_radius", "z", "w"}));
  const double lambda = prm.number("lambda", 1.0);
  const double bump = prm.number("perturbation", 0.0);
  const bool boundary = prm.flag("boundary_chart", false);
  const double radius = prm.number("box_radius", 0.5);
  const double z = prm.number("z", 1.0);
  const double w = prm.number("w", 1.0);
  if (!(lambda > 0.0)) throw ConfigError("pure_shift needs lambda > 0");
  if (!(radius > 0.0)) throw ConfigError("box_radius must be positive");
  auto g = prm.curve_grid();
  auto expo = StateVector::sample(g, [lambda](double xi) { return std::exp(-lambda * xi); });
  auto ones = StateVector::sample(g, [](double) { return 1.0; });
  auto quad = StateVector::sample(g, [bump](double xi) { return bump * xi * xi; });

  ModelInstance m{"pure_shift", g, Semigroup::shift(g), Nonlinearity::zero(), {constant_field(ones)},
                  StateVector::zeros(g), std::nullopt, bump == 0.0, {}};
  if (boundary) {
    // z + (1 - v) e^{-lambda xi}, v >= 0; the shift drives v towards 1.
    ParamBox box(Eigen::Vector2d(z - radius, 0.0), Eigen::Vector2d(z + radius, radius));
    m.chart.emplace(Chart::linear(quad + expo, {ones, -1.0 * expo}, box, true));
  } else {
    m.chart.emplace(Chart::linear(quad, {ones, expo}, ParamBox::around(Eigen::Vector2d(z, w), radius)));
  }
  m.x0 = m.chart->embed(m.chart->box().center());
  m.expected["lambda"] = lambda;
  return m;
}

ModelInstance riccati_scalar(const json& j) {
  const Params prm("riccati_scalar", j, {"x0"});
  const double x0 = prm.number("x0", 0.5);
  auto g = Grid::index(1);
  Nonlinearity p([](double, const StateVector& x) { return x.with_values(x.values().array().square().matrix()); },
                 [](double, const StateVector& x, const Direction& y) {
                   return y.with_values(2.0 * x.values().cwiseProduct(y.values()));
                 },
                 [](double, const StateVector&, const Direction& a, const Direction& b) {
                   return a.with_values(2.0 * a.values().cwiseProduct(b.values()));
                 });
  p.smoothness_class = 1000;
  ModelInstance m{"riccati_scalar", g, Semigroup::diagonal(Eigen::VectorXd::Zero(1)), p, {},
                  StateVector(g, Eigen::VectorXd::Constant(1, x0)), std::nullopt, false, {}};
  if (x0 != 0.0) m.expected["blowup_time"] = 1.0 / x0;
  m.expected["x_at_1"] = x0 / (1.0 - x0);
  return m;
}

ModelInstance diagonal_linear(const json& j) {
  const Params prm("diagonal_linear", j, {"lambda", "B", "x0"});
  const Eigen::VectorXd lambda = prm.vector("lambda", Eigen::Vector2d(1.0, 2.0));
  Eigen::MatrixXd bdef(2, 2);
  bdef << 0.0, 0.5, -0.5, 0.0;
  const Eigen::MatrixXd b = prm.matrix("B", lambda.size() == 2 ? bdef : Eigen::MatrixXd::Zero(lambda.size(), lambda.size()));
  const Eigen::VectorXd x0 = prm.vector("x0", Eigen::VectorXd::Ones(lambda.size()));
  if (b.rows() != lambda.size() || b.cols() != lambda.size()) throw ConfigError("diagonal_linear: B must be square of size len(lambda)");
  if (x0.size() != lambda.size()) throw ConfigError("diagonal_linear: x0 must have len(lambda) entries");
  auto g = Grid::index(static_cast<int>(lambda.size()));
  Nonlinearity p([b](double, const StateVector& x) { return x.with_values(b * x.values()); },
                 [b](double, const StateVector&, const Direction& y) { return y.with_values(b * y.values()); },
                 [](double, const StateVector&, const Direction& y1, const Direction&) {
                   return y1.with_values(Eigen::VectorXd::Zero(y1.size()));
                 });
  p.lipschitz_hint = b.cwiseAbs().rowwise().sum().maxCoeff();
  p.smoothness_class = 1000;
  return ModelInstance{"diagonal_linear", g, Semigroup::diagonal(lambda), p, {}, StateVector(g, x0), std::nullopt,
                       false, {}};
}

ModelInstance hjm_constant_vol(const json& j) {
  const Params prm("hjm_constant_vol", j, with_grid({"sigma0", "level", "slope", "curvature", "box_radius"}));
  const double s0 = prm.number("sigma0", 0.1);
  const double level = prm.number("level", 0.02);
  const double slope = prm.number("slope", 0.01);
  const double curv = prm.number("curvature", -0.002);
  const double radius = prm.number("box_radius", 0.02);
  if (!(s0 > 0.0)) throw ConfigError("hjm_constant_vol needs sigma0 > 0");
  if (!(radius > 0.0)) throw ConfigError("box_radius must be positive");
  auto g = prm.curve_grid();
  const auto drift = StateVector::sample(g, [s0](double xi) { return s0 * s0 * xi; });
  const auto vol = StateVector::sample(g, [s0](double) { return s0; });
  const auto base =
      StateVector::sample(g, [=](double xi) { return level + slope * xi + 0.5 * curv * xi * xi; });
  ModelInstance m{"hjm_constant_vol", g, Semigroup::shift(g), Nonlinearity::constant(drift), {constant_field(vol)},
                  base, std::nullopt, true, {}};
  m.p.maps_into_domain_order = 1000;
  // offset + u1 + u2 xi + u3 xi^2 / 2: closed under d/dxi plus the linear drift.
  std::vector<Direction> basis{StateVector::sample(g, [](double) { return 1.0; }),
                               StateVector::sample(g, [](double xi) { return xi; }),
                               StateVector::sample(g, [](double xi) { return 0.5 * xi * xi; })};
  m.chart.emplace(Chart::linear(base, basis, ParamBox::around(Eigen::Vector3d::Zero(), radius)));
  m.expected["sigma0"] = s0;
  return m;
}

}  // namespace

std::vector<Direction> ModelInstance::default_directions() const {
  if (chart) return chart->jacobian(chart->box().center());
  std::vector<Direction> out;
  for (int i = 0; i < x0.size(); ++i) out.push_back(x0.with_values(Eigen::VectorXd::Unit(x0.size(), i)));
  return out;
}

ModelInstance instantiate(const std::string& name, const nlohmann::json& params) {
  if (name == "pure_shift") return pure_shift(params);
  if (name == "riccati_scalar") return riccati_scalar(params);
  if (name == "diagonal_linear") return diagonal_linear(params);
  if (name == "hjm_constant_vol") return hjm_constant_vol(params);
  throw ConfigError("unknown model '" + name + "'");
}

std::vector<std::string> model_names() { return {"pure_shift", "riccati_scalar", "diagonal_linear", "hjm_constant_vol"}; }

}  // namespace semiflow
