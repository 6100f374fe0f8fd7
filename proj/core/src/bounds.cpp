#include "matchbound/bounds.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <future>
#include <limits>
#include <map>
#include <numeric>

#include "matchbound/errors.hpp"
#include "random.hpp"

namespace matchbound {

namespace {

MatchAssignment greedy_in_order(const Dataset& data, const DistanceMatrix& d, bool replace,
                                const std::vector<std::size_t>& order) {
  const std::size_t nc = data.n_control();
  if (d.n_treated() != data.n_treated() || d.n_control() != nc) {
    throw ValidationError("distance matrix shape does not match the dataset");
  }
  if (!replace && nc < data.n_treated()) {
    throw CapacityError("matching without replacement needs N^c >= N^t (" + std::to_string(nc) + " < " +
                        std::to_string(data.n_treated()) + ")");
  }
  std::vector<bool> used(nc, false);
  std::vector<MatchedPair> pairs;
  for (std::size_t i : order) {
    std::size_t best = nc;
    for (std::size_t j = 0; j < nc; ++j) {
      if (!replace && used[j]) continue;
      if (best == nc || d(i, j) < d(i, best)) best = j;
    }
    if (best == nc) throw CapacityError("no control left for treated unit " + data.treated(i).id);
    used[best] = true;
    pairs.push_back({i, best});
  }
  return MatchAssignment(data.n_treated(), nc, std::move(pairs));
}

}  // namespace

MatchAssignment greedy_nn_match(const Dataset& data, const DistanceMatrix& d, bool replace) {
  std::vector<std::size_t> order(data.n_treated());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return greedy_in_order(data, d, replace, order);
}

MatchAssignment randomized_greedy_match(const Dataset& data, const DistanceMatrix& d, bool replace,
                                        std::uint64_t seed) {
  std::vector<std::size_t> order(data.n_treated());
  std::iota(order.begin(), order.end(), std::size_t{0});
  detail::PortableRng rng(seed);
  for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);
  return greedy_in_order(data, d, replace, order);
}

QualitySpec spec_from_profile(const QualityProfile& profile, double epsilon, QualitySpec base) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ValidationError("tolerance epsilon must be >= 0");
  const double scale = 1.0 + epsilon;
  base.moment_targets.clear();
  base.quantile_targets.clear();
  for (const auto& g : profile.moment_gaps) base.moment_targets.push_back({g.covariate, g.order, scale * g.gap});
  for (const auto& g : profile.quantile_gaps) {
    base.quantile_targets.push_back({g.covariate, g.quantile_index, scale * g.gap});
  }
  base.distance_budget.reset();
  if (profile.total_distance) base.distance_budget = scale * *profile.total_distance;
  base.tolerance_multiplier = epsilon;
  return base;
}

QualitySpec spec_from_baseline(const Dataset& data, const MatchAssignment& w_a, const DistanceMatrix* d,
                               const std::vector<int>& orders, const QuantileGrid* grid, double epsilon,
                               EstimandKind kind, QualitySpec base) {
  const auto profile = profile_assignment(data, w_a, d, grid, orders, kind);
  base.max_control_reuse = std::max<std::size_t>(1, w_a.max_control_use());
  if (kind == EstimandKind::ssatt) base.match_count = w_a.size();
  return spec_from_profile(profile, epsilon, std::move(base));
}

std::optional<ConfidenceInterval> naive_confidence_interval(const Dataset& data, const MatchAssignment& w,
                                                            EstimandKind kind) {
  std::vector<double> treated;
  std::vector<double> control;
  const auto tcount = w.treated_match_counts();
  for (std::size_t i = 0; i < tcount.size(); ++i) {
    if (tcount[i] > 0) treated.push_back(data.treated(i).outcome);
  }
  for (const auto& pair : w.pairs()) control.push_back(data.control(pair.control).outcome);
  if (treated.size() < 2 || control.size() < 2) return std::nullopt;
  auto sample_variance = [](const std::vector<double>& xs) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size() - 1);
  };
  const double se = std::sqrt(sample_variance(treated) / static_cast<double>(treated.size()) +
                              sample_variance(control) / static_cast<double>(control.size()));
  const double center = estimate(data, w, kind).estimate;
  ConfidenceInterval ci;
  ci.lower = center - 1.959963984540054 * se;
  ci.upper = center + 1.959963984540054 * se;
  return ci;
}

std::size_t thread_count_from_env() {
  const char* text = std::getenv("MATCHBOUND_THREADS");
  if (text == nullptr) return 1;
  std::size_t value = 0;
  const auto* end = text + std::strlen(text);
  const auto [ptr, ec] = std::from_chars(text, end, value);
  if (ec != std::errc{} || ptr != end || value == 0) return 1;
  return value;
}

namespace {

BoundSide solve_side(const Dataset& data, const QualitySpec& spec, FormulationKind kind,
                     const ConstraintContext& ctx, const SolveOptions& options, Sense sense) {
  BoundSide side;
  side.sense = sense;
  const auto model = build_model(kind, data, spec, sense, ctx);
  side.solution = solve(model, options);
  if (side.solution.values.empty()) return side;
  auto decoded = decode_assignment(model, side.solution.values, data.n_treated(), data.n_control());
  side.max_normalization_error = decoded.max_normalization_error;
  const EstimandKind estimand = estimand_of(kind);
  try {
    side.estimate = estimate(data, decoded.assignment, estimand);
    side.interval = naive_confidence_interval(data, decoded.assignment, estimand);
  } catch (const EstimandUndefinedError&) {
    // Rounded relaxations can leave a treated unit unmatched or drop every pair.
  }
  side.quality_check = check_assignment(data, decoded.assignment, spec, kind, ctx);
  side.quality_ok = satisfies(side.quality_check, Tolerances::feasibility);
  side.assignment = std::move(decoded.assignment);
  return side;
}

struct FamilyProbe {
  ConstraintFamily family;
  bool (*present)(const QualitySpec&);
  void (*drop)(QualitySpec&);
};

const FamilyProbe kProbeOrder[] = {
    {ConstraintFamily::distance, [](const QualitySpec& s) { return s.distance_budget.has_value(); },
     [](QualitySpec& s) { s.distance_budget.reset(); }},
    {ConstraintFamily::moment,
     [](const QualitySpec& s) { return !s.moment_targets.empty() || s.balance_cap.has_value(); },
     [](QualitySpec& s) {
       s.moment_targets.clear();
       s.balance_cap.reset();
     }},
    {ConstraintFamily::quantile, [](const QualitySpec& s) { return !s.quantile_targets.empty(); },
     [](QualitySpec& s) { s.quantile_targets.clear(); }},
    {ConstraintFamily::caliper, [](const QualitySpec& s) { return s.caliper.has_value(); },
     [](QualitySpec& s) { s.caliper.reset(); }},
    {ConstraintFamily::exact, [](const QualitySpec& s) { return !s.exact_on.empty(); },
     [](QualitySpec& s) { s.exact_on.clear(); }},
};

InfeasibilityDiagnosis diagnose(const Dataset& data, const QualitySpec& spec, FormulationKind kind,
                                const ConstraintContext& ctx, const SolveOptions& options) {
  SolveOptions probe_options = options;
  probe_options.mode = SolveMode::exact;
  probe_options.trace = nullptr;
  for (const auto& probe : kProbeOrder) {
    if (!probe.present(spec)) continue;
    QualitySpec relaxed = spec;
    probe.drop(relaxed);
    const auto model = build_model(kind, data, relaxed, Sense::maximize, ctx);
    const auto solution = solve(model, probe_options);
    if (!solution.values.empty()) {
      return {probe.family, std::string("dropping the ") + to_string(probe.family) +
                                " constraints restores feasibility (single-family probe; heuristic)"};
    }
  }
  return {std::nullopt, "no single constraint family restores feasibility; structural limits or a "
                        "combination of families bind"};
}

}  // namespace

BoundsResult matching_bounds(const Dataset& data, const QualitySpec& spec, FormulationKind kind,
                             const ConstraintContext& ctx, const BoundsOptions& options) {
  validate_spec(data, spec, kind, ctx);
  BoundsResult result;
  result.formulation = kind;
  result.spec_used = spec;
  const std::size_t threads = options.threads == 0 ? thread_count_from_env() : options.threads;
  if (threads >= 2) {
    auto upper = std::async(std::launch::async, [&] {
      return solve_side(data, spec, kind, ctx, options.solver, Sense::maximize);
    });
    result.lower = solve_side(data, spec, kind, ctx, options.solver, Sense::minimize);
    result.upper = upper.get();
  } else {
    result.upper = solve_side(data, spec, kind, ctx, options.solver, Sense::maximize);
    result.lower = solve_side(data, spec, kind, ctx, options.solver, Sense::minimize);
  }
  // Two optimal assignments can tie up to rounding and land the wrong way round.
  if (options.solver.mode == SolveMode::exact && result.upper.estimate && result.lower.estimate &&
      result.upper.quality_ok && result.lower.quality_ok &&
      result.upper.estimate->estimate < result.lower.estimate->estimate) {
    std::swap(result.upper, result.lower);
    std::swap(result.upper.sense, result.lower.sense);
  }
  const bool infeasible = result.upper.solution.status == SolveStatus::infeasible ||
                          result.lower.solution.status == SolveStatus::infeasible;
  if (infeasible) {
    result.infeasibility = options.diagnose_infeasibility
                               ? diagnose(data, spec, kind, ctx, options.solver)
                               : InfeasibilityDiagnosis{std::nullopt, "diagnosis disabled"};
  }
  return result;
}

namespace {

/// Replaces `current` with `previous` when the earlier assignment still meets
/// the looser spec and gives a more extreme estimate.
void carry_forward(const Dataset& data, const BoundSide& previous, BoundSide& current, const QualitySpec& spec,
                   FormulationKind kind, const ConstraintContext& ctx) {
  if (!previous.assignment || !previous.estimate) return;
  auto checks = check_assignment(data, *previous.assignment, spec, kind, ctx);
  if (!satisfies(checks, Tolerances::feasibility)) return;
  const double prev = previous.estimate->estimate;
  const bool better = !current.estimate || (current.sense == Sense::maximize ? prev > current.estimate->estimate
                                                                             : prev < current.estimate->estimate);
  if (!better) return;
  const Sense sense = current.sense;
  current = previous;
  current.sense = sense;
  current.quality_check = std::move(checks);
  current.quality_ok = true;
  current.carried_forward = true;
}

}  // namespace

SweepResult epsilon_sweep(const Dataset& data, const Baseline& baseline, const std::vector<double>& epsilons,
                          FormulationKind kind, const ConstraintContext& ctx, const BoundsOptions& options) {
  if (epsilons.empty()) throw ValidationError("epsilon sweep needs at least one value");
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    if (!(epsilons[k] >= 0.0) || !std::isfinite(epsilons[k])) throw ValidationError("epsilon values must be >= 0");
    if (k > 0 && !(epsilons[k] > epsilons[k - 1])) {
      throw ValidationError("epsilon values must be strictly increasing");
    }
  }
  SweepResult sweep;
  sweep.baseline = baseline;
  for (double eps : epsilons) {
    const auto spec = spec_from_profile(baseline.profile, eps, baseline.structure);
    sweep.points.push_back({eps, matching_bounds(data, spec, kind, ctx, options)});
  }

  if (options.solver.mode == SolveMode::exact) {
    for (std::size_t k = 1; k < sweep.points.size(); ++k) {
      const auto& prev = sweep.points[k - 1].bounds;
      auto& cur = sweep.points[k].bounds;
      carry_forward(data, prev.upper, cur.upper, cur.spec_used, kind, ctx);
      carry_forward(data, prev.lower, cur.lower, cur.spec_used, kind, ctx);
      if (cur.feasible()) cur.infeasibility.reset();
    }
  }

  const BoundsResult* last = nullptr;
  for (const auto& point : sweep.points) {
    if (!point.bounds.feasible()) continue;
    if (last != nullptr && (point.bounds.lower.estimate->estimate > last->lower.estimate->estimate ||
                            point.bounds.upper.estimate->estimate < last->upper.estimate->estimate)) {
      sweep.nested = false;
    }
    last = &point.bounds;
  }
  return sweep;
}

AssignmentDiff compare_assignments(const Dataset& data, const MatchAssignment& w_lower,
                                   const MatchAssignment& w_upper) {
  const std::size_t nt = data.n_treated();
  const std::size_t nc = data.n_control();
  if (w_lower.n_treated() != nt || w_lower.n_control() != nc || w_upper.n_treated() != nt ||
      w_upper.n_control() != nc) {
    throw PreconditionError("assignments do not match the dataset dimensions");
  }
  AssignmentDiff diff;
  const auto lower_use = w_lower.control_use_counts();
  const auto upper_use = w_upper.control_use_counts();
  for (std::size_t j = 0; j < nc; ++j) {
    const std::size_t shared = std::min(lower_use[j], upper_use[j]);
    diff.shared_pairs += shared;
    diff.lower_only += lower_use[j] - shared;
    diff.upper_only += upper_use[j] - shared;
  }
  diff.differing_controls = diff.lower_only + diff.upper_only;

  std::map<std::pair<bool, std::string>, std::size_t> index;
  auto add = [&](const Unit& unit, bool treated, std::size_t lower_rows, std::size_t upper_rows) {
    if (lower_rows == 0 && upper_rows == 0) return;
    const std::string key = unit.group.empty() ? unit.id : unit.group;
    auto [it, inserted] = index.try_emplace({treated, key}, diff.rows.size());
    if (inserted) diff.rows.push_back({key, treated});
    auto& row = diff.rows[it->second];
    row.lower_rows += lower_rows;
    row.upper_rows += upper_rows;
    row.lower_outcome_sum += static_cast<double>(lower_rows) * unit.outcome;
    row.upper_outcome_sum += static_cast<double>(upper_rows) * unit.outcome;
  };
  for (std::size_t j = 0; j < nc; ++j) add(data.control(j), false, lower_use[j], upper_use[j]);
  const auto lower_t = w_lower.treated_match_counts();
  const auto upper_t = w_upper.treated_match_counts();
  for (std::size_t i = 0; i < nt; ++i) add(data.treated(i), true, lower_t[i], upper_t[i]);
  return diff;
}

}  // namespace matchbound
