#include "matchbound/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "matchbound/errors.hpp"
#include "simplex.hpp"

namespace matchbound {

const char* to_string(SolveMode mode) {
  switch (mode) {
    case SolveMode::exact: return "exact";
    case SolveMode::relax_and_round: return "relax-round";
  }
  return "unknown";
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::feasible_with_gap: return "feasible_with_gap";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::limit_reached: return "limit_reached";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kResortInterval = 256;

double sense_sign(const MipModel& model) { return model.sense() == Sense::maximize ? -1.0 : 1.0; }

detail::LpResult run_lp(const detail::LpProblem& lp, const std::vector<double>& lower,
                        const std::vector<double>& upper) {
  auto result = detail::solve_dense_lp(lp, lower, upper);
  if (result.status == detail::LpStatus::unbounded) throw ModelError("LP relaxation is unbounded");
  if (result.status == detail::LpStatus::iteration_limit) throw NumericError("simplex iteration limit exceeded");
  return result;
}

struct Node {
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t depth = 0;
  double bound = -kInf;  // parent relaxation value, minimization form
};

Solution relax_and_round(const MipModel& model) {
  const auto lp = detail::make_lp(model);
  const auto relaxed = run_lp(lp, lp.lower, lp.upper);
  Solution solution;
  solution.nodes_explored = 1;
  if (relaxed.status == detail::LpStatus::infeasible) return solution;
  solution.values = relaxed.x;
  for (std::size_t j = 0; j < model.n_variables(); ++j) {
    if (model.variables()[j].kind == VarKind::binary) solution.values[j] = relaxed.x[j] >= 0.5 ? 1.0 : 0.0;
  }
  solution.status = SolveStatus::feasible_with_gap;
  solution.objective = model.evaluate_objective(solution.values);
  solution.best_bound = model.evaluate_objective(relaxed.x);
  solution.constraint_violations = find_violations(model, solution.values);
  return solution;
}

std::optional<std::size_t> branching_column(const MipModel& model, const std::vector<double>& x, BranchRule rule) {
  std::optional<std::size_t> chosen;
  double best = Tolerances::integrality;
  for (std::size_t j = 0; j < model.n_variables(); ++j) {
    if (model.variables()[j].kind != VarKind::binary) continue;
    const double frac = std::min(x[j] - std::floor(x[j]), std::ceil(x[j]) - x[j]);
    if (frac <= Tolerances::integrality) continue;
    if (rule == BranchRule::first_fractional) return j;
    if (frac > best + 1e-12) {
      best = frac;
      chosen = j;
    }
  }
  return chosen;
}

Solution branch_and_bound(const MipModel& model, const SolveOptions& options) {
  const auto lp = detail::make_lp(model);
  const double sign = sense_sign(model);
  const auto start = std::chrono::steady_clock::now();
  auto out_of_time = [&] {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    return elapsed.count() > options.time_limit_seconds;
  };
  auto gap_for = [&](double incumbent) {
    return options.absolute_gap ? *options.absolute_gap : Tolerances::relative_gap * (1.0 + std::abs(incumbent));
  };

  double incumbent = kInf;
  std::vector<double> best_values;
  std::vector<Node> open;
  open.push_back({lp.lower, lp.upper, 0, -kInf});
  std::size_t nodes = 0;
  bool limit_hit = false;

  while (!open.empty()) {
    if (nodes >= options.node_limit || out_of_time()) {
      limit_hit = true;
      break;
    }
    if (nodes > 0 && nodes % kResortInterval == 0) {
      std::stable_sort(open.begin(), open.end(), [](const Node& a, const Node& b) { return a.bound > b.bound; });
    }
    Node node = std::move(open.back());
    open.pop_back();
    if (std::isfinite(incumbent) && node.bound >= incumbent - gap_for(incumbent)) continue;

    const auto relaxed = run_lp(lp, node.lower, node.upper);
    ++nodes;
    if (options.trace) {
      *options.trace << "node " << nodes << " depth " << node.depth << " bound ";
      if (relaxed.status == detail::LpStatus::infeasible) {
        *options.trace << "infeasible";
      } else {
        *options.trace << sign * relaxed.objective + model.objective_offset();
      }
      *options.trace << " incumbent ";
      if (std::isfinite(incumbent)) {
        *options.trace << sign * incumbent + model.objective_offset();
      } else {
        *options.trace << "none";
      }
      *options.trace << '\n';
    }
    if (relaxed.status == detail::LpStatus::infeasible) continue;
    if (std::isfinite(incumbent) && relaxed.objective >= incumbent - gap_for(incumbent)) continue;

    const auto column = branching_column(model, relaxed.x, options.branch_rule);
    if (!column) {
      incumbent = relaxed.objective;
      best_values = relaxed.x;
      for (std::size_t j = 0; j < model.n_variables(); ++j) {
        if (model.variables()[j].kind == VarKind::binary) best_values[j] = std::round(best_values[j]);
      }
      continue;
    }

    const std::size_t j = *column;
    Node down{node.lower, node.upper, node.depth + 1, relaxed.objective};
    down.upper[j] = std::floor(relaxed.x[j]);
    Node up{std::move(node.lower), std::move(node.upper), node.depth + 1, relaxed.objective};
    up.lower[j] = std::ceil(relaxed.x[j]);
    if (relaxed.x[j] >= 0.5) {
      open.push_back(std::move(down));
      open.push_back(std::move(up));
    } else {
      open.push_back(std::move(up));
      open.push_back(std::move(down));
    }
  }

  Solution solution;
  solution.nodes_explored = nodes;
  double bound = incumbent;
  if (limit_hit) {
    for (const auto& node : open) bound = std::min(bound, node.bound);
  }
  if (best_values.empty()) {
    solution.status = limit_hit ? SolveStatus::limit_reached : SolveStatus::infeasible;
    if (limit_hit && std::isfinite(bound)) solution.best_bound = sign * bound + model.objective_offset();
    return solution;
  }
  solution.status = limit_hit ? SolveStatus::feasible_with_gap : SolveStatus::optimal;
  solution.values = std::move(best_values);
  solution.objective = model.evaluate_objective(solution.values);
  solution.best_bound = std::isfinite(bound) ? sign * bound + model.objective_offset()
                                             : (sign > 0 ? -kInf : kInf);
  return solution;
}

}  // namespace

Solution solve_lp(const MipModel& model) {
  const auto lp = detail::make_lp(model);
  const auto relaxed = run_lp(lp, lp.lower, lp.upper);
  Solution solution;
  solution.nodes_explored = 1;
  if (relaxed.status == detail::LpStatus::infeasible) return solution;
  solution.status = SolveStatus::optimal;
  solution.values = relaxed.x;
  solution.objective = model.evaluate_objective(relaxed.x);
  solution.best_bound = solution.objective;
  return solution;
}

Solution solve(const MipModel& model, const SolveOptions& options) {
  if (options.time_limit_seconds <= 0.0) throw ConfigurationError("time limit must be positive");
  if (options.absolute_gap && !(*options.absolute_gap >= 0.0)) {
    throw ConfigurationError("absolute gap must be non-negative");
  }
  if (options.mode == SolveMode::relax_and_round) return relax_and_round(model);
  return branch_and_bound(model, options);
}

std::vector<ConstraintViolation> find_violations(const MipModel& model, const std::vector<double>& values) {
  std::vector<ConstraintViolation> out;
  for (const auto& row : model.constraints()) {
    const double lhs = model.evaluate_row(row, values);
    const double tol = Tolerances::feasibility * (1.0 + std::abs(row.rhs));
    double amount = 0.0;
    switch (row.comparator) {
      case Comparator::less_equal: amount = lhs - row.rhs; break;
      case Comparator::greater_equal: amount = row.rhs - lhs; break;
      case Comparator::equal: amount = std::abs(lhs - row.rhs); break;
    }
    if (amount > tol) out.push_back({row.name, row.family, lhs, row.rhs, amount});
  }
  return out;
}

}  // namespace matchbound
