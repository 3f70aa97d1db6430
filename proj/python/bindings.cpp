#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "semiflow/cli.hpp"
#include "semiflow/io.hpp"
#include "semiflow/models.hpp"

#include <sstream>

namespace py = pybind11;
using namespace semiflow;

namespace {

nlohmann::json params_of(const std::string& text) {
  return text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
}

SolverOptions solver(int n_steps, double tol) {
  SolverOptions so;
  so.n_steps = n_steps;
  so.tol = tol;
  return so;
}

Eigen::MatrixXd stack(const std::vector<StateVector>& xs) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), xs.empty() ? 0 : xs.front().size());
  for (std::size_t k = 0; k < xs.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = xs[k].values().transpose();
  return m;
}

Eigen::VectorXd nodes(const GridPtr& g) {
  Eigen::VectorXd v(g->size());
  for (int i = 0; i < g->size(); ++i) v[i] = g->node(i);
  return v;
}

StateVector start(const ModelInstance& m, const std::optional<Eigen::VectorXd>& x0) {
  if (!x0) return m.x0;
  if (x0->size() != m.x0.size()) throw ShapeError("x0 has " + std::to_string(x0->size()) + " entries, model needs " +
                                                  std::to_string(m.x0.size()));
  return m.x0.with_values(*x0);
}

py::dict solve_py(const std::string& model, const std::string& params, double T, int n_steps, double tol,
                  std::optional<Eigen::VectorXd> x0) {
  const auto m = instantiate(model, params_of(params));
  SolverOptions so = solver(n_steps, tol);
  so.certify_constants = true;
  const auto r = solve(m.semigroup, m.p, start(m, x0), T, so);
  py::dict d;
  d["grid"] = nodes(m.grid);
  d["times"] = r.times;
  d["trajectory"] = stack(r.trajectory);
  d["horizon"] = r.horizon;
  d["stopped_early"] = r.stopped_early;
  d["residual"] = r.residual;
  d["M"] = *r.M;
  d["C"] = *r.C;
  return d;
}

py::dict jet_py(const std::string& model, const std::string& params, double T, int n_steps, double tol, int order) {
  const auto m = instantiate(model, params_of(params));
  const auto dirs = m.default_directions();
  const auto js = propagate_jet(m.semigroup, m.p, m.x0, dirs, T, order, solver(n_steps, tol));
  py::dict d;
  d["times"] = js.times();
  d["base"] = stack(js.base.trajectory);
  py::list first;
  for (const auto& f : js.first) first.append(stack(f));
  d["first"] = first;
  py::list second;
  for (const auto& row : js.second) {
    py::list r;
    for (const auto& s : row) r.append(stack(s));
    second.append(r);
  }
  d["second"] = second;
  d["directions"] = stack(dirs);
  return d;
}

py::dict fd_check_py(const std::string& model, const std::string& params, double T, int n_steps, double tol,
                     std::vector<double> eps, int direction) {
  const auto m = instantiate(model, params_of(params));
  const auto dirs = m.default_directions();
  const auto r = fd_check(m.semigroup, m.p, m.x0, dirs.at(static_cast<std::size_t>(direction)), T, eps,
                          solver(n_steps, tol));
  py::dict d;
  d["eps"] = r.eps;
  d["errors"] = r.errors;
  d["best_error"] = r.best_error;
  d["observed_order"] = r.observed_order;
  return d;
}

std::string certify_py(const std::string& model, const std::string& params, bool use_alpha) {
  const auto m = instantiate(model, params_of(params));
  const Chart* chart = (!use_alpha && m.chart) ? &*m.chart : nullptr;
  return dump_json(to_json(certify(m.fields(), m.x0, chart)));
}

double defect_py(const std::string& model, const std::string& params, double s, double t, int n_steps) {
  const auto m = instantiate(model, params_of(params));
  return semiflow_defect(m.semigroup, m.p, m.x0, s, t, solver(n_steps, 1e-13));
}

std::pair<int, std::string> run_py(const std::string& command, const std::string& config, const std::string& output_dir,
                                   std::optional<std::uint64_t> seed) {
  RunConfig cfg = parse_config(config);
  const auto cmd = parse_command(command);
  if (!cmd) throw ConfigError("unknown command '" + command + "'");
  cfg.command = *cmd;
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  if (seed) cfg.seed = *seed;
  std::ostringstream err;
  const int rc = run(cfg, err);
  return {rc, err.str()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mild solutions, sensitivities and invariant-manifold checks";

  py::register_exception<Error>(m, "SemiflowError", PyExc_RuntimeError);

  m.def("model_names", &model_names);
  m.def("solve", &solve_py, py::arg("model"), py::arg("params") = "", py::arg("T") = 0.5, py::arg("n_steps") = 100,
        py::arg("tol") = 1e-12, py::arg("x0") = py::none());
  m.def("jet", &jet_py, py::arg("model"), py::arg("params") = "", py::arg("T") = 0.5, py::arg("n_steps") = 100,
        py::arg("tol") = 1e-12, py::arg("order") = 1);
  m.def("fd_check", &fd_check_py, py::arg("model"), py::arg("params") = "", py::arg("T") = 0.5,
        py::arg("n_steps") = 100, py::arg("tol") = 1e-13,
        py::arg("eps") = std::vector<double>{4e-3, 2e-3, 1e-3, 5e-4}, py::arg("direction") = 0);
  m.def("certify_json", &certify_py, py::arg("model"), py::arg("params") = "", py::arg("use_alpha") = false);
  m.def("semiflow_defect", &defect_py, py::arg("model"), py::arg("params") = "", py::arg("s") = 0.25,
        py::arg("t") = 0.25, py::arg("n_steps") = 50);
  m.def("run", &run_py, py::arg("command"), py::arg("config"), py::arg("output_dir") = "",
        py::arg("seed") = py::none());
}
