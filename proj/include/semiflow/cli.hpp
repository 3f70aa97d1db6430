#pragma once

#include "semiflow/errors.hpp"
#include "semiflow/realization.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace semiflow {

enum class Command { solve, jet, fdcheck, nagumo, lifetime, alpha, certify, daorder };

const char* to_string(Command c);
std::optional<Command> parse_command(const std::string& s);

/// Malformed configuration; `line()` is 1-based (0 when unknown).
class ConfigDiagnostic : public ConfigError {
 public:
  ConfigDiagnostic(const std::string& what, int line) : ConfigError(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct RunConfig {
  Command command = Command::solve;
  std::string model = "pure_shift";
  nlohmann::json model_params = nlohmann::json::object();

  double T = 0.5;
  int n_steps = 100;
  double tol = 1e-12;
  std::optional<double> truncation_radius;
  int max_picard = 200;
  int lipschitz_samples = 200;
  int k_max = 3;
  Thresholds thresholds;
  double fd_error = 1e-5;
  double fd_order_min = 1.7;
  double fd_order_max = 2.3;
  double alpha_match = 1e-3;
  std::vector<double> eps_ladder{4e-3, 2e-3, 1e-3, 5e-4};
  std::vector<double> h_ladder{0.2, 0.1, 0.05, 0.025};

  // command specific
  int order = 1;
  int direction = 0;
  std::optional<std::vector<double>> u;
  double tube_tol = 1e-3;
  std::string chart = "auto";
  double alpha_radius = 0.05;
  bool alpha_boundary = false;
  bool duplicate_mu = false;
  std::string point = "x0";
  double kink_at = 0.5;
  std::string route = "direct";
  int jet_samples = 11;

  std::filesystem::path output_dir = ".";
  bool write_csv = true;
  bool write_json = true;
  std::uint64_t seed = 0;
};

/// Parses and validates the JSON text. Throws ConfigDiagnostic.
RunConfig parse_config(const std::string& text);

/// Runs one pipeline and writes its files. Returns 0 on success or a
/// certified verdict, 1 on a failed check, 2 on configuration or
/// infrastructure errors (reported on `err`).
int run(const RunConfig& config, std::ostream& err);

/// `semiflow-lab <command> <config.json> [--output-dir D] [--seed N]`
int cli_main(int argc, char** argv);

}  // namespace semiflow
