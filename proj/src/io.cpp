#include "semiflow/io.hpp"

#include "semiflow/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace semiflow {

using nlohmann::json;

namespace {

void emit_number(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void emit(std::string& out, const json& j, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case json::value_t::null: out += "null"; break;
    case json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
    case json::value_t::number_integer: out += std::to_string(j.get<std::int64_t>()); break;
    case json::value_t::number_unsigned: out += std::to_string(j.get<std::uint64_t>()); break;
    case json::value_t::number_float: emit_number(out, j.get<double>()); break;
    case json::value_t::string: out += json(j.get<std::string>()).dump(); break;
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        break;
      }
      // Arrays of plain numbers stay on one line.
      bool flat = true;
      for (const auto& e : j) flat = flat && (e.is_number() || e.is_null());
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",";
        first = false;
        if (!flat) newline(depth + 1);
        emit(out, e, indent, depth + 1);
      }
      if (!flat) newline(depth);
      out += ']';
      break;
    }
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        break;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        emit(out, it.value(), indent, depth + 1);
      }
      newline(depth);
      out += '}';
      break;
    }
    default: out += "null"; break;
  }
}

json values(const StateVector& x) {
  json a = json::array();
  for (int i = 0; i < x.size(); ++i) a.push_back(x[i]);
  return a;
}

}  // namespace

std::string dump_json(const json& j, int indent) {
  std::string out;
  emit(out, j, indent, 0);
  out += '\n';
  return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::filesystem::create_directories(dir);
  auto tmp = dir / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + tmp.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string trajectory_csv(const SolveReport& r) {
  std::string out = "t,xi,value\n";
  char buf[96];
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    const auto& x = r.trajectory[k];
    for (int i = 0; i < x.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r.times[k], x.grid()->node(i), x[i]);
      out += buf;
    }
  }
  return out;
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const SolveReport& r) {
  json j;
  j["horizon"] = r.horizon;
  j["requested_horizon"] = r.requested_horizon;
  j["stopped_early"] = r.stopped_early;
  j["residual"] = r.residual;
  j["truncation_radius"] = r.truncation_radius;
  j["n_steps"] = r.n_steps;
  j["nodes"] = r.times.size();
  j["picard_iterations_per_step"] = r.picard_iterations_per_step;
  j["remaining_horizon"] = r.remaining_horizon;
  j["final_norm"] = norm(r.final_state());
  j["M"] = r.M ? json(*r.M) : json();
  j["C"] = r.C ? json(*r.C) : json();
  j["bound"] = (r.M && r.C) ? json(r.gronwall_factor()) : json();
  return j;
}

json to_json(const TangencyReport& t) {
  json j;
  j["point_params"] = to_json(t.point_params);
  j["residual"] = t.residual;
  j["coefficients"] = to_json(t.coefficients);
  j["on_boundary"] = t.on_boundary;
  j["inward_component"] = t.inward_component ? json(*t.inward_component) : json();
  j["verdict"] = to_string(t.verdict);
  return j;
}

json to_json(const LifetimeReport& l) {
  json j;
  j["T_exit"] = l.T_exit;
  j["exit_kind"] = to_string(l.exit_kind);
  j["horizon"] = l.horizon;
  j["max_distance"] = l.max_distance;
  j["nodes_followed"] = l.times.size();
  return j;
}

json to_json(const DomainOrderEstimate& e) {
  json j;
  j["max_order_tested"] = e.max_order_tested;
  j["order_passed"] = e.order_passed;
  j["divergence_profile"] = e.divergence_profile;
  j["quotient_norms"] = e.quotient_norms;
  j["point_norm"] = norm(e.point);
  return j;
}

json to_json(const FdCheckResult& f) {
  json j;
  j["eps"] = f.eps;
  j["errors"] = f.errors;
  j["best_error"] = f.best_error;
  j["observed_order"] = f.observed_order;
  j["points_used"] = f.points_used;
  return j;
}

json to_json(const RegularityReport& r) {
  json j;
  j["verdict"] = r.verdict();
  j["certified"] = r.certified;
  j["independence_margin"] = r.independence_margin;
  j["alpha_rank_margin"] = r.alpha_rank_margin;
  j["boundary_sigma_parallel"] = r.boundary_sigma_parallel;
  j["sampled_region"] = r.sampled_region;
  j["invertibility"] = r.invertibility;
  json checks = json::array();
  for (const auto& c : r.checks) {
    json cj;
    cj["name"] = c.name;
    cj["margin"] = c.margin;
    cj["threshold"] = c.threshold;
    cj["pass"] = c.pass;
    if (!c.sense.empty()) cj["sense"] = c.sense;
    if (!c.note.empty()) cj["note"] = c.note;
    checks.push_back(std::move(cj));
  }
  j["checks"] = std::move(checks);
  json tang = json::array();
  for (const auto& t : r.tangency) tang.push_back(to_json(t));
  j["tangency"] = std::move(tang);
  json orders = json::array();
  for (const auto& e : r.domain_orders) orders.push_back(to_json(e));
  j["domain_orders"] = std::move(orders);
  return j;
}

json jets_json(const JetSequence& js, const std::vector<std::size_t>& nodes, const std::string& base_csv_ref) {
  json out = json::array();
  for (std::size_t k : nodes) {
    json e;
    e["t"] = js.base.times.at(k);
    e["node"] = k;
    e["base_csv_ref"] = base_csv_ref;
    json first = json::array();
    for (const auto& f : js.first) first.push_back(values(f.at(k)));
    e["first"] = std::move(first);
    json second = json::array();
    for (const auto& row : js.second) {
      json r = json::array();
      for (const auto& s : row) r.push_back(values(s.at(k)));
      second.push_back(std::move(r));
    }
    e["second"] = std::move(second);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace semiflow
