#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "matchbound/bounds.hpp"

namespace matchbound::cli {

enum class Command { bounds, sweep, profile, compare, simulate };

const char* to_string(Command command);

/// Everything one invocation needs, after flag parsing.
struct RunConfig {
  Command command = Command::bounds;
  std::filesystem::path input;
  std::string outcome_col = "outcome";
  std::string treat_col = "treat";
  std::vector<std::string> covariates;  // empty: every other column
  std::optional<std::string> id_col;    // defaults to "id" when present
  std::optional<std::string> score_col;
  std::optional<std::string> group_col;

  std::string formulation = "f1";
  std::optional<std::size_t> kc;
  std::optional<std::size_t> matches;
  std::vector<double> eps;
  std::vector<int> moments{1, 2, 3};
  std::vector<double> quantiles;
  std::optional<double> caliper;
  std::vector<std::string> exact_on;
  std::string distance = "mahalanobis";
  std::string reuse_form = "per-control";
  std::size_t baseline_runs = 1;

  std::string mode = "exact";
  double time_limit = 600.0;
  std::size_t node_limit = 5'000'000;
  std::uint64_t seed = 0;
  bool trace = false;
  bool write_lp = false;

  std::filesystem::path out = ".";
  std::vector<std::string> formats{"json", "csv", "svg"};
  bool json_errors = false;

  // simulate
  std::size_t n_treated = 40;
  std::size_t n_control = 80;
  std::size_t n_covariates = 2;
  double effect = 0.0;
  double hidden_effect = 1.0;
  double confounding = 0.5;
  double noise_sd = 1.0;
  double nonlinearity = 0.0;
};

/// Exit statuses of `run`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInfeasible = 2;

/// Parses argv (argv[0] is the program name) and executes. Progress lines go
/// to `out`; errors to `err`, as JSON objects when --json-errors is set.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Executes an already-parsed configuration; throws matchbound::Error.
int execute(const RunConfig& config, std::ostream& out);

/// Static chart of a sweep: epsilon on x, upper and lower estimate series,
/// baseline reference line and zero line. Throws PreconditionError on an
/// empty sweep.
std::string render_sweep_svg(const SweepResult& sweep);
void emit_sweep_svg(const SweepResult& sweep, const std::filesystem::path& path);

}  // namespace matchbound::cli
