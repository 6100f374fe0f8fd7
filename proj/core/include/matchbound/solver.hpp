#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "matchbound/mip_model.hpp"

namespace matchbound {

/// Numerical tolerances shared by the LP and branch-and-bound layers.
struct Tolerances {
  static constexpr double integrality = 1e-6;
  static constexpr double feasibility = 1e-7;
  static constexpr double optimality = 1e-9;  // reduced-cost threshold
  static constexpr double pivot = 1e-9;
  static constexpr double relative_gap = 1e-9;
};

enum class SolveMode { exact, relax_and_round };
enum class BranchRule { most_fractional, first_fractional };
enum class SolveStatus { optimal, feasible_with_gap, infeasible, limit_reached };

const char* to_string(SolveMode mode);
const char* to_string(SolveStatus status);

struct SolveOptions {
  SolveMode mode = SolveMode::exact;
  double time_limit_seconds = 600.0;
  /// Absolute optimality gap; unset means 1e-9 * (1 + |incumbent|).
  std::optional<double> absolute_gap;
  std::size_t node_limit = 5'000'000;
  BranchRule branch_rule = BranchRule::most_fractional;
  /// Recorded with results; node selection is fully deterministic and does
  /// not consume randomness.
  std::uint64_t seed = 0;
  /// One line per node (depth, bound, incumbent) when set.
  std::ostream* trace = nullptr;
};

struct ConstraintViolation {
  std::string name;
  ConstraintFamily family = ConstraintFamily::structure;
  double lhs = 0.0;
  double rhs = 0.0;
  double amount = 0.0;  // > 0
};

struct Solution {
  SolveStatus status = SolveStatus::infeasible;
  std::vector<double> values;
  double objective = 0.0;
  double best_bound = 0.0;
  std::size_t nodes_explored = 0;
  /// Rows broken by rounding (relax-and-round mode only).
  std::vector<ConstraintViolation> constraint_violations;
};

/// Solves the LP relaxation (integrality dropped) with a bounded-variable
/// revised simplex. Status is optimal or infeasible; an unbounded LP throws
/// ModelError.
Solution solve_lp(const MipModel& model);

/// Exact mode: depth-first branch-and-bound over the binary columns.
/// Relax-and-round mode: one LP solve, binaries rounded at 0.5, every broken
/// row reported and nothing repaired.
Solution solve(const MipModel& model, const SolveOptions& options = {});

/// Rows of `model` violated at `values` beyond the feasibility tolerance.
std::vector<ConstraintViolation> find_violations(const MipModel& model, const std::vector<double>& values);

}  // namespace matchbound
