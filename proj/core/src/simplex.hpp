#pragma once

// Internal dense LP engine shared by solve_lp and branch-and-bound.

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "matchbound/mip_model.hpp"

namespace matchbound::detail {

/// min cost^T x  s.t.  A x (cmp) rhs,  lower <= x <= upper.
struct LpProblem {
  Eigen::MatrixXd matrix;  // rows x structural columns
  std::vector<double> rhs;
  std::vector<Comparator> comparators;
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  bool trivially_infeasible = false;  // presolve found crossing bounds
};

/// Converts a model to minimization form. Single-variable rows are folded
/// into bounds and dropped; empty rows are checked and dropped.
LpProblem make_lp(const MipModel& model);

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;
  double objective = 0.0;  // cost^T x (minimization form)
  std::size_t iterations = 0;
};

/// Two-phase bounded-variable revised simplex with a dense explicit basis
/// inverse, refactored every 64 pivots. Dantzig pricing, switching to
/// Bland's rule after a run of degenerate pivots.
LpResult solve_dense_lp(const LpProblem& problem, std::span<const double> lower,
                        std::span<const double> upper);

}  // namespace matchbound::detail
