#include "semiflow/cli.hpp"

#include "semiflow/errors.hpp"
#include "semiflow/io.hpp"
#include "semiflow/models.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace semiflow {

using nlohmann::json;

const char* to_string(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::jet: return "jet";
    case Command::fdcheck: return "fdcheck";
    case Command::nagumo: return "nagumo";
    case Command::lifetime: return "lifetime";
    case Command::alpha: return "alpha";
    case Command::certify: return "certify";
    case Command::daorder: return "daorder";
  }
  return "?";
}

std::optional<Command> parse_command(const std::string& s) {
  for (Command c : {Command::solve, Command::jet, Command::fdcheck, Command::nagumo, Command::lifetime, Command::alpha,
                    Command::certify, Command::daorder})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

namespace {

int line_at(const std::string& text, std::size_t pos) {
  pos = std::min(pos, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

// Config reader that remembers where each key sits in the source text.
class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  int line_of(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    bool found = false;
    for (const auto& key : path) {
      const auto at = text_.find("\"" + key + "\"", pos);
      if (at == std::string::npos) break;
      pos = at + key.size() + 2;
      found = true;
    }
    return found ? line_at(text_, pos) : 0;
  }

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string where;
    for (const auto& k : path) where += (where.empty() ? "" : ".") + k;
    throw ConfigDiagnostic(where + ": " + msg, line_of(path));
  }

  void only(const json& obj, const std::vector<std::string>& path, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
        auto p = path;
        p.push_back(it.key());
        fail(p, "unknown key");
      }
    }
  }

  double number(const json& obj, std::vector<std::string> path, const std::string& key, double fallback) const {
    if (!obj.contains(key)) return fallback;
    path.push_back(key);
    const json& v = obj.at(key);
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "must be finite");
    return d;
  }

  int integer(const json& obj, std::vector<std::string> path, const std::string& key, int fallback) const {
    if (!obj.contains(key)) return fallback;
    path.push_back(key);
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<int>();
  }

  bool flag(const json& obj, std::vector<std::string> path, const std::string& key, bool fallback) const {
    if (!obj.contains(key)) return fallback;
    path.push_back(key);
    if (!obj.at(key).is_boolean()) fail(path, "expected true or false");
    return obj.at(key).get<bool>();
  }

  std::string string(const json& obj, std::vector<std::string> path, const std::string& key,
                     const std::string& fallback, std::initializer_list<const char*> allowed = {}) const {
    if (!obj.contains(key)) return fallback;
    path.push_back(key);
    if (!obj.at(key).is_string()) fail(path, "expected a string");
    auto s = obj.at(key).get<std::string>();
    if (allowed.size() && std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return s == a; })) {
      std::string opts;
      for (const char* a : allowed) opts += (opts.empty() ? "" : ", ") + std::string(a);
      fail(path, "expected one of " + opts);
    }
    return s;
  }

  std::vector<double> numbers(const json& obj, std::vector<std::string> path, const std::string& key,
                              std::vector<double> fallback) const {
    if (!obj.contains(key)) return fallback;
    path.push_back(key);
    const json& v = obj.at(key);
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(path, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

 private:
  const std::string& text_;
};

void check_ladder(const Reader& rd, const std::vector<double>& l, const std::vector<std::string>& path) {
  if (l.size() < 2) rd.fail(path, "ladder needs at least two entries");
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (!(l[i] > 0.0)) rd.fail(path, "ladder entries must be positive");
    if (i > 0 && !(l[i] < l[i - 1])) rd.fail(path, "ladder must be strictly decreasing");
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigDiagnostic(std::string("malformed JSON: ") + e.what(), line_at(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  const Reader rd(text);
  RunConfig c;
  rd.only(j, {}, {"command", "model", "semigroup", "numeric", "task", "output", "seed"});

  if (j.contains("command")) {
    const auto s = rd.string(j, {}, "command", "");
    const auto cmd = parse_command(s);
    if (!cmd) rd.fail({"command"}, "unknown command '" + s + "'");
    c.command = *cmd;
  }

  if (!j.contains("model")) throw ConfigDiagnostic("model: missing", 1);
  const json& m = j.at("model");
  rd.only(m, {"model"}, {"name", "params"});
  if (!m.contains("name")) rd.fail({"model"}, "missing name");
  c.model = rd.string(m, {"model"}, "name", "");
  if (m.contains("params")) {
    if (!m.at("params").is_object()) rd.fail({"model", "params"}, "expected an object");
    c.model_params = m.at("params");
  }
  if (j.contains("semigroup")) {
    // kind must agree with the model; lambda and grid become model parameters
    const json& sg = j.at("semigroup");
    const std::vector<std::string> p{"semigroup"};
    rd.only(sg, p, {"kind", "lambda", "grid"});
    const std::string kind = rd.string(sg, p, "kind", "", {"shift", "diagonal"});
    const bool diagonal_model = c.model == "diagonal_linear" || c.model == "riccati_scalar";
    if (!kind.empty() && (kind == "diagonal") != diagonal_model)
      rd.fail({"semigroup", "kind"}, "model '" + c.model + "' uses the " + (diagonal_model ? "diagonal" : "shift") +
                                         " semigroup");
    auto put = [&](const std::vector<std::string>& path, const std::string& key, const json& v) {
      if (c.model_params.contains(key)) rd.fail(path, "also given as model.params." + key);
      c.model_params[key] = v;
    };
    if (sg.contains("lambda")) {
      if (c.model != "diagonal_linear") rd.fail({"semigroup", "lambda"}, "only diagonal_linear takes eigenvalues");
      put({"semigroup", "lambda"}, "lambda", sg.at("lambda"));
    }
    if (sg.contains("grid")) {
      if (diagonal_model) rd.fail({"semigroup", "grid"}, "only shift models take a grid");
      const json& g = sg.at("grid");
      const std::vector<std::string> gp{"semigroup", "grid"};
      rd.only(g, gp, {"start", "end", "nodes", "extension_margin"});
      for (const char* k : {"start", "end", "nodes"})
        if (g.contains(k)) put({"semigroup", "grid", k}, std::string("grid_") + k, g.at(k));
      if (g.contains("extension_margin"))
        put({"semigroup", "grid", "extension_margin"}, "extension_margin", g.at("extension_margin"));
    }
  }

  {
    const auto names = model_names();
    if (std::find(names.begin(), names.end(), c.model) == names.end())
      rd.fail({"model", "name"}, "unknown model '" + c.model + "'");
    try {
      (void)instantiate(c.model, c.model_params);
    } catch (const ConfigError& e) {
      rd.fail({"model", "params"}, e.what());
    } catch (const Error& e) {
      rd.fail({"model", "params"}, e.what());
    }
  }

  if (j.contains("numeric")) {
    const json& n = j.at("numeric");
    const std::vector<std::string> p{"numeric"};
    rd.only(n, p, {"T", "n_steps", "tol", "truncation_radius", "max_picard", "lipschitz_samples", "k_max",
                   "thresholds", "ladders"});
    c.T = rd.number(n, p, "T", c.T);
    c.n_steps = rd.integer(n, p, "n_steps", c.n_steps);
    c.tol = rd.number(n, p, "tol", c.tol);
    if (n.contains("truncation_radius") && !n.at("truncation_radius").is_null())
      c.truncation_radius = rd.number(n, p, "truncation_radius", 0.0);
    c.max_picard = rd.integer(n, p, "max_picard", c.max_picard);
    c.lipschitz_samples = rd.integer(n, p, "lipschitz_samples", c.lipschitz_samples);
    c.k_max = rd.integer(n, p, "k_max", c.k_max);
    if (!(c.T > 0.0)) rd.fail({"numeric", "T"}, "must be > 0");
    if (c.n_steps < 2) rd.fail({"numeric", "n_steps"}, "must be >= 2");
    if (!(c.tol > 0.0)) rd.fail({"numeric", "tol"}, "must be > 0");
    if (c.truncation_radius && !(*c.truncation_radius > 0.0))
      rd.fail({"numeric", "truncation_radius"}, "must be > 0");
    if (c.max_picard < 1) rd.fail({"numeric", "max_picard"}, "must be >= 1");
    if (c.lipschitz_samples < 1) rd.fail({"numeric", "lipschitz_samples"}, "must be >= 1");
    if (c.k_max < 1) rd.fail({"numeric", "k_max"}, "must be >= 1");
    if (n.contains("thresholds")) {
      const json& t = n.at("thresholds");
      const std::vector<std::string> tp{"numeric", "thresholds"};
      rd.only(t, tp, {"rank_tol", "tangency_tol", "ratio_bound", "invertibility", "fd_error", "fd_order_min",
                      "fd_order_max", "alpha_match"});
      auto& th = c.thresholds;
      th.rank_tol = rd.number(t, tp, "rank_tol", th.rank_tol);
      th.tangency_tol = rd.number(t, tp, "tangency_tol", th.tangency_tol);
      th.ratio_bound = rd.number(t, tp, "ratio_bound", th.ratio_bound);
      th.invertibility = rd.number(t, tp, "invertibility", th.invertibility);
      c.fd_error = rd.number(t, tp, "fd_error", c.fd_error);
      c.fd_order_min = rd.number(t, tp, "fd_order_min", c.fd_order_min);
      c.fd_order_max = rd.number(t, tp, "fd_order_max", c.fd_order_max);
      c.alpha_match = rd.number(t, tp, "alpha_match", c.alpha_match);
      for (const char* k : {"rank_tol", "tangency_tol", "ratio_bound", "invertibility", "fd_error", "alpha_match"})
        if (t.contains(k) && !(t.at(k).get<double>() > 0.0)) rd.fail({"numeric", "thresholds", k}, "must be > 0");
      if (!(th.ratio_bound < 1.0)) rd.fail({"numeric", "thresholds", "ratio_bound"}, "must be < 1");
    }
    if (n.contains("ladders")) {
      const json& l = n.at("ladders");
      const std::vector<std::string> lp{"numeric", "ladders"};
      rd.only(l, lp, {"eps", "h"});
      c.eps_ladder = rd.numbers(l, lp, "eps", c.eps_ladder);
      c.h_ladder = rd.numbers(l, lp, "h", c.h_ladder);
      check_ladder(rd, c.eps_ladder, {"numeric", "ladders", "eps"});
      check_ladder(rd, c.h_ladder, {"numeric", "ladders", "h"});
    }
  }

  if (j.contains("task")) {
    const json& t = j.at("task");
    const std::vector<std::string> p{"task"};
    rd.only(t, p, {"order", "direction", "u", "tube_tol", "chart", "alpha_radius", "alpha_boundary", "duplicate_mu",
                   "point", "kink_at", "route", "jet_samples"});
    c.order = rd.integer(t, p, "order", c.order);
    if (c.order != 1 && c.order != 2) rd.fail({"task", "order"}, "must be 1 or 2");
    c.direction = rd.integer(t, p, "direction", c.direction);
    if (c.direction < 0) rd.fail({"task", "direction"}, "must be >= 0");
    if (t.contains("u")) c.u = rd.numbers(t, p, "u", {});
    c.tube_tol = rd.number(t, p, "tube_tol", c.tube_tol);
    if (!(c.tube_tol > 0.0)) rd.fail({"task", "tube_tol"}, "must be > 0");
    c.chart = rd.string(t, p, "chart", c.chart, {"auto", "model", "alpha"});
    c.alpha_radius = rd.number(t, p, "alpha_radius", c.alpha_radius);
    if (!(c.alpha_radius > 0.0)) rd.fail({"task", "alpha_radius"}, "must be > 0");
    c.alpha_boundary = rd.flag(t, p, "alpha_boundary", c.alpha_boundary);
    c.duplicate_mu = rd.flag(t, p, "duplicate_mu", c.duplicate_mu);
    c.point = rd.string(t, p, "point", c.point, {"x0", "kink"});
    c.kink_at = rd.number(t, p, "kink_at", c.kink_at);
    c.route = rd.string(t, p, "route", c.route, {"direct", "solver"});
    c.jet_samples = rd.integer(t, p, "jet_samples", c.jet_samples);
    if (c.jet_samples < 2) rd.fail({"task", "jet_samples"}, "must be >= 2");
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    rd.only(o, {"output"}, {"directory", "formats"});
    c.output_dir = rd.string(o, {"output"}, "directory", c.output_dir.string());
    if (o.contains("formats")) {
      const json& f = o.at("formats");
      if (!f.is_array()) rd.fail({"output", "formats"}, "expected an array");
      c.write_csv = c.write_json = false;
      for (const auto& e : f) {
        if (e == "csv") c.write_csv = true;
        else if (e == "json") c.write_json = true;
        else rd.fail({"output", "formats"}, "formats must be drawn from csv, json");
      }
    }
  }

  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_integer() || s.get<std::int64_t>() < 0) rd.fail({"seed"}, "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  return c;
}

namespace {

SolverOptions solver_options(const RunConfig& c) {
  SolverOptions so;
  so.n_steps = c.n_steps;
  so.tol = c.tol;
  so.truncation_radius = c.truncation_radius;
  so.max_picard = c.max_picard;
  so.lipschitz_samples = c.lipschitz_samples;
  so.seed = c.seed;
  return so;
}

// mu(x) = Ax + P(x) packaged as a field.
Nonlinearity mu_field(const VectorFieldSet& f) {
  auto eval = [f](double, const StateVector& x) { return f.mu(x); };
  auto jac = [f](double, const StateVector& x, const Direction& y) {
    return f.semigroup.generator_apply(y) + f.p.jacobian_apply(0.0, x, y);
  };
  return Nonlinearity(eval, jac);
}

ParamBox alpha_box(int d, double r) {
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(d + 1, -r);
  lo[d] = 0.0;
  return ParamBox(lo, Eigen::VectorXd::Constant(d + 1, r));
}

struct Context {
  const RunConfig& cfg;
  ModelInstance inst;
  VectorFieldSet fields;
  StateVector x0;
  SolverOptions so;
  json report;

  explicit Context(const RunConfig& c)
      : cfg(c), inst(instantiate(c.model, c.model_params)), fields(inst.fields()), x0(inst.x0), so(solver_options(c)) {
    if (c.duplicate_mu) fields.sigmas.push_back(mu_field(fields));
    if (c.point == "kink") {
      const double at = c.kink_at;
      x0 = StateVector::sample(inst.grid, [at](double xi) { return std::abs(xi - at); });
    }
    report["command"] = to_string(c.command);
    report["model"] = c.model;
    report["seed"] = c.seed;
  }

  Chart chart() const {
    const bool want_model = cfg.chart == "model" || (cfg.chart == "auto" && inst.chart);
    if (want_model) {
      if (!inst.chart) throw ConfigError("model '" + cfg.model + "' has no chart; use task.chart = \"alpha\"");
      return *inst.chart;
    }
    AlphaOptions ao;
    ao.chart.rank_tol = cfg.thresholds.rank_tol;
    return build_alpha(fields, x0, alpha_box(fields.d(), cfg.alpha_radius), cfg.alpha_boundary, ao);
  }

  Eigen::VectorXd point_in(const Chart& ch) const {
    if (!cfg.u) return ch.box().center();
    if (static_cast<int>(cfg.u->size()) != ch.param_dim())
      throw ConfigError("task.u needs " + std::to_string(ch.param_dim()) + " entries");
    return Eigen::Map<const Eigen::VectorXd>(cfg.u->data(), static_cast<Eigen::Index>(cfg.u->size()));
  }
};

void write_outputs(const RunConfig& c, const json& report, const std::string* csv, const json* jets) {
  if (c.write_json) write_atomic(c.output_dir / "report.json", dump_json(report));
  if (csv && c.write_csv) write_atomic(c.output_dir / "trajectory.csv", *csv);
  if (jets && c.write_json) write_atomic(c.output_dir / "jets.json", dump_json(*jets));
}

int finish(const RunConfig& c, json& report, bool pass, const std::string& verdict, const std::string* csv = nullptr,
           const json* jets = nullptr) {
  report["verdict"] = verdict;
  report["pass"] = pass;
  write_outputs(c, report, csv, jets);
  return pass ? 0 : 1;
}

int run_solve(Context& ctx) {
  SolverOptions so = ctx.so;
  so.certify_constants = true;
  const SolveReport r = solve(ctx.inst.semigroup, ctx.inst.p, ctx.x0, ctx.cfg.T, so);
  json& rep = ctx.report;
  rep["solve"] = to_json(r);
  if (!r.stopped_early) {
    // one seeded perturbation pair for the Gronwall bound
    std::mt19937_64 rng(ctx.cfg.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::VectorXd dv(ctx.x0.size());
    for (Eigen::Index i = 0; i < dv.size(); ++i) dv[i] = unif(rng);
    const double scale = 1e-3 * (1.0 + norm(ctx.x0)) / std::max(norm(ctx.x0.with_values(dv)), 1e-300);
    const StateVector y0 = ctx.x0.with_values(ctx.x0.values() + scale * dv);
    const auto g = gronwall_certificate(ctx.inst.semigroup, ctx.inst.p, ctx.x0, y0, r.horizon, ctx.so);
    rep["gronwall"] = {{"lhs", g.lhs}, {"bound", g.bound}, {"holds", g.holds}, {"M", g.M}, {"C", g.C}};
  }
  const std::string csv = trajectory_csv(r);
  const bool ok = !r.stopped_early;
  return finish(ctx.cfg, rep, ok, ok ? "ok" : "stopped_early", &csv);
}

int run_jet(Context& ctx) {
  SolverOptions so = ctx.so;
  so.certify_constants = true;
  const auto dirs = ctx.inst.default_directions();
  const JetSequence js = propagate_jet(ctx.inst.semigroup, ctx.inst.p, ctx.x0, dirs, ctx.cfg.T, ctx.cfg.order, so);
  json& rep = ctx.report;
  rep["solve"] = to_json(js.base);
  rep["order"] = js.order;
  rep["directions"] = dirs.size();
  rep["residual"] = js.residual;

  const double factor = js.base.gronwall_factor();
  bool ok = true;
  json env = json::array();
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    double sup = 0.0;
    for (const auto& f : js.first[i]) sup = std::max(sup, norm(f));
    const double bound = factor * norm(dirs[i]);
    const bool holds = sup <= bound * (1.0 + 1e-8);
    ok = ok && holds;
    env.push_back({{"sup_psi", sup}, {"bound", bound}, {"holds", holds}});
  }
  rep["envelope"] = std::move(env);

  std::vector<std::size_t> nodes;
  const std::size_t n = js.size();
  const auto samples = static_cast<std::size_t>(std::min<int>(ctx.cfg.jet_samples, static_cast<int>(n)));
  for (std::size_t s = 0; s < samples; ++s) {
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(s * (n - 1)) / static_cast<double>(samples - 1)));
    if (nodes.empty() || nodes.back() != k) nodes.push_back(k);
  }
  const json jets = jets_json(js, nodes, "trajectory.csv");
  const std::string csv = trajectory_csv(js.base);
  return finish(ctx.cfg, rep, ok, ok ? "ok" : "failed(envelope)", &csv, &jets);
}

int run_fdcheck(Context& ctx) {
  const auto dirs = ctx.inst.default_directions();
  if (ctx.cfg.direction >= static_cast<int>(dirs.size()))
    throw ConfigError("task.direction must be below " + std::to_string(dirs.size()));
  const auto res = fd_check(ctx.inst.semigroup, ctx.inst.p, ctx.x0, dirs[static_cast<std::size_t>(ctx.cfg.direction)],
                            ctx.cfg.T, ctx.cfg.eps_ladder, ctx.so);
  json& rep = ctx.report;
  rep["fd"] = to_json(res);
  const bool err_ok = res.best_error <= ctx.cfg.fd_error;
  const bool order_ok = std::isfinite(res.observed_order) && res.observed_order >= ctx.cfg.fd_order_min &&
                        res.observed_order <= ctx.cfg.fd_order_max;
  rep["error_ok"] = err_ok;
  rep["order_ok"] = order_ok;
  const bool ok = err_ok && order_ok;
  return finish(ctx.cfg, rep, ok, ok ? "ok" : (err_ok ? "failed(order)" : "failed(error)"));
}

int run_nagumo(Context& ctx) {
  const Chart ch = ctx.chart();
  TangencyOptions to;
  to.tangency_tol = ctx.cfg.thresholds.tangency_tol;
  const auto t = nagumo_check(ch, ctx.point_in(ch), ctx.inst.semigroup, ctx.inst.p, to);
  ctx.report["tangency"] = to_json(t);
  const bool ok = t.verdict != TangencyVerdict::violating;
  return finish(ctx.cfg, ctx.report, ok, to_string(t.verdict));
}

int run_lifetime(Context& ctx) {
  const Chart ch = ctx.chart();
  LifetimeOptions lo;
  lo.horizon = ctx.cfg.T;
  lo.tube_tol = ctx.cfg.tube_tol;
  const auto l = lifetime_estimate(ch, ctx.point_in(ch), ctx.inst.semigroup, ctx.inst.p, ctx.so, lo);
  ctx.report["lifetime"] = to_json(l);
  ctx.report["tube_tol"] = lo.tube_tol;
  return finish(ctx.cfg, ctx.report, true, to_string(l.exit_kind));
}

int run_alpha(Context& ctx) {
  json& rep = ctx.report;
  const int d = ctx.fields.d();
  try {
    rep["independence_margin"] = independence_check(ctx.fields, ctx.x0);
  } catch (const DegenerateFieldError& e) {
    rep["independence_margin"] = 0.0;
    rep["note"] = e.what();
    return finish(ctx.cfg, rep, false, "failed(independence)");
  }
  AlphaOptions ao;
  ao.chart.rank_tol = ctx.cfg.thresholds.rank_tol;
  std::optional<Chart> ch;
  try {
    ch.emplace(build_alpha(ctx.fields, ctx.x0, alpha_box(d, ctx.cfg.alpha_radius), ctx.cfg.alpha_boundary, ao));
  } catch (const DegenerateFieldError& e) {
    rep["note"] = e.what();
    return finish(ctx.cfg, rep, false, "failed(independence)");
  } catch (const RankError& e) {
    rep["note"] = e.what();
    return finish(ctx.cfg, rep, false, "failed(rank)");
  }
  const auto cols = ch->jacobian(Eigen::VectorXd::Zero(d + 1));
  json mism = json::array();
  double worst = 0.0;
  for (int i = 0; i <= d; ++i) {
    const StateVector f = i < d ? ctx.fields.sigmas[static_cast<std::size_t>(i)].eval(0.0, ctx.x0) : ctx.fields.mu(ctx.x0);
    const double rel = norm(cols[static_cast<std::size_t>(i)] - f) / std::max(norm(f), 1e-300);
    worst = std::max(worst, rel);
    mism.push_back(rel);
  }
  rep["column_mismatch"] = std::move(mism);
  rep["worst_mismatch"] = worst;
  rep["rank_margin"] = tangent_basis(*ch, ch->box().center()).sigma_min;
  const bool ok = worst <= ctx.cfg.alpha_match;
  return finish(ctx.cfg, rep, ok, ok ? "ok" : "failed(jacobian)");
}

int run_certify(Context& ctx) {
  CertifyOptions co;
  co.k_max = ctx.cfg.k_max;
  co.thresholds = ctx.cfg.thresholds;
  co.order_ladder = ctx.cfg.h_ladder;
  co.alpha_radius = ctx.cfg.alpha_radius;
  co.alpha_boundary = ctx.cfg.alpha_boundary;
  co.solver.tol = ctx.cfg.tol;
  co.solver.seed = ctx.cfg.seed;
  co.solver.max_picard = ctx.cfg.max_picard;
  const bool use_model = ctx.cfg.chart == "model" || (ctx.cfg.chart == "auto" && ctx.inst.chart);
  if (use_model && !ctx.inst.chart)
    throw ConfigError("model '" + ctx.cfg.model + "' has no chart; use task.chart = \"alpha\"");
  const Chart* ch = use_model ? &*ctx.inst.chart : nullptr;
  const RegularityReport r = certify(ctx.fields, ctx.x0, ch, co);
  ctx.report["regularity"] = to_json(r);
  ctx.report["chart"] = use_model ? "model" : "alpha";
  return finish(ctx.cfg, ctx.report, r.certified, r.verdict());
}

int run_daorder(Context& ctx) {
  DomainOrderOptions dopts;
  dopts.ratio_bound = ctx.cfg.thresholds.ratio_bound;
  auto estimate = [&] {
    if (ctx.cfg.route == "direct")
      return domain_order_estimate(ctx.inst.semigroup, ctx.x0, ctx.cfg.k_max, ctx.cfg.h_ladder, dopts);
    const OrbitFn orbit =
        solver_orbit(ctx.fields, ctx.x0, ctx.cfg.k_max * ctx.cfg.h_ladder.front(), ctx.cfg.h_ladder.back(), ctx.so);
    dopts.orbit_noise = 10.0 * ctx.cfg.tol * (1.0 + norm(ctx.x0));
    return domain_order_estimate(orbit, ctx.x0, ctx.cfg.k_max, ctx.cfg.h_ladder, dopts);
  };
  const DomainOrderEstimate est = estimate();
  ctx.report["domain_order"] = to_json(est);
  ctx.report["route"] = ctx.cfg.route;
  ctx.report["point"] = ctx.cfg.point;
  const bool ok = est.order_passed >= ctx.cfg.k_max;
  return finish(ctx.cfg, ctx.report, ok, "order(" + std::to_string(est.order_passed) + ")");
}

}  // namespace

int run(const RunConfig& config, std::ostream& err) {
  try {
    Context ctx(config);
    switch (config.command) {
      case Command::solve: return run_solve(ctx);
      case Command::jet: return run_jet(ctx);
      case Command::fdcheck: return run_fdcheck(ctx);
      case Command::nagumo: return run_nagumo(ctx);
      case Command::lifetime: return run_lifetime(ctx);
      case Command::alpha: return run_alpha(ctx);
      case Command::certify: return run_certify(ctx);
      case Command::daorder: return run_daorder(ctx);
    }
    err << "error: unknown command\n";
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 2;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Mild solutions, sensitivities and invariant-manifold checks for semilinear evolution equations",
               "semiflow-lab"};
  std::string command;
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("command", command, "solve, jet, fdcheck, nagumo, lifetime, alpha, certify or daorder")->required();
  app.add_option("config", config_path, "JSON run configuration")->required();
  app.add_option("--output-dir", output_dir, "Directory for report.json, trajectory.csv and jets.json");
  app.add_option("--seed", seed, "Seed for sampling-based estimates");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const auto cmd = parse_command(command);
  if (!cmd) {
    std::cerr << "error: unknown command '" << command << "'\n";
    return 2;
  }
  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << config_path << ": cannot read config\n";
    return 2;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  RunConfig cfg;
  try {
    // The command on the line wins; a different one in the file is an error.
    cfg = parse_config(text);
    const bool named = text.find("\"command\"") != std::string::npos;
    if (named && cfg.command != *cmd)
      throw ConfigDiagnostic(std::string("command: file says '") + to_string(cfg.command) + "' but '" + command +
                                 "' was requested",
                             Reader(text).line_of({"command"}));
  } catch (const ConfigDiagnostic& e) {
    std::cerr << config_path << ":" << e.line() << ": " << e.what() << "\n";
    return 2;
  }
  cfg.command = *cmd;
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  if (seed) cfg.seed = *seed;
  const int rc = run(cfg, std::cerr);
  if (rc != 2) std::cout << to_string(cfg.command) << ": " << (rc == 0 ? "ok" : "check failed") << "\n";
  return rc;
}

}  // namespace semiflow
