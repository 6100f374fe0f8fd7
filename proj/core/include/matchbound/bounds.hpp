#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "matchbound/balance.hpp"
#include "matchbound/data_model.hpp"
#include "matchbound/formulations.hpp"
#include "matchbound/solver.hpp"

namespace matchbound {

/// Each treated unit, in dataset order, takes its nearest control still
/// available (ties go to the lower control index). With `replace` controls
/// are reusable. Throws CapacityError when controls run out.
MatchAssignment greedy_nn_match(const Dataset& data, const DistanceMatrix& d, bool replace);

/// greedy_nn_match over a seeded random permutation of the treated units.
MatchAssignment randomized_greedy_match(const Dataset& data, const DistanceMatrix& d, bool replace,
                                        std::uint64_t seed);

/// Bounds set to (1 + epsilon) times each profiled statistic. Structural
/// fields (reuse cap, match count, caliper, exact-on, reuse form) are copied
/// from `base`. Throws ValidationError for a negative epsilon.
QualitySpec spec_from_profile(const QualityProfile& profile, double epsilon, QualitySpec base = {});

/// Profiles `w_a` and derives its spec. Moment targets cover every covariate
/// at each order in `orders`; quantile targets every grid entry when `grid`
/// is given; the distance budget when `d` is given. The reuse cap becomes
/// max(1, max control use of w_a) and the match count |w_a|.
QualitySpec spec_from_baseline(const Dataset& data, const MatchAssignment& w_a, const DistanceMatrix* d,
                               const std::vector<int>& orders, const QuantileGrid* grid, double epsilon,
                               EstimandKind kind, QualitySpec base = {});

/// Normal-approximation interval from the two-sample variance of matched
/// treated and matched control outcomes. Ignores assignment uncertainty.
struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  std::string method = "naive two-sample difference-in-means, 95%";
};

std::optional<ConfidenceInterval> naive_confidence_interval(const Dataset& data, const MatchAssignment& w,
                                                            EstimandKind kind);

struct BoundSide {
  Sense sense = Sense::maximize;
  Solution solution;
  std::optional<MatchAssignment> assignment;
  std::optional<EstimateReport> estimate;
  std::optional<ConfidenceInterval> interval;
  std::vector<SpecCheck> quality_check;
  bool quality_ok = false;
  double max_normalization_error = 0.0;
  /// Set by epsilon_sweep when the previous point's assignment was kept.
  bool carried_forward = false;
};

struct InfeasibilityDiagnosis {
  std::optional<ConstraintFamily> binding_family;
  std::string note;
};

struct BoundsResult {
  FormulationKind formulation = FormulationKind::f1;
  QualitySpec spec_used;
  BoundSide upper;
  BoundSide lower;
  std::optional<InfeasibilityDiagnosis> infeasibility;

  bool feasible() const { return upper.estimate.has_value() && lower.estimate.has_value(); }
  double width() const { return feasible() ? upper.estimate->estimate - lower.estimate->estimate : 0.0; }
};

struct BoundsOptions {
  SolveOptions solver;
  /// Worker cap for the two senses and sweep points; 0 reads MATCHBOUND_THREADS
  /// (default 1).
  std::size_t threads = 0;
  bool diagnose_infeasibility = true;
};

/// Worker count from MATCHBOUND_THREADS, at least 1.
std::size_t thread_count_from_env();

/// Solves the max and min programs and reports both bounds. Estimates are
/// recomputed from the decoded assignments; the solver objective is advisory.
/// On infeasibility the families are dropped one at a time (distance,
/// moments, quantiles, caliper, exact) and the first whose removal restores
/// feasibility is named.
BoundsResult matching_bounds(const Dataset& data, const QualitySpec& spec, FormulationKind kind,
                             const ConstraintContext& ctx, const BoundsOptions& options = {});

/// Reference point of a sweep: the method that produced it, its estimate,
/// and the profiled quality the bounds are scaled from.
struct Baseline {
  std::string method;
  std::optional<MatchAssignment> assignment;
  double estimate = 0.0;
  QualityProfile profile;
  QualitySpec structure;
};

struct SweepPoint {
  double epsilon = 0.0;
  BoundsResult bounds;
};

struct SweepResult {
  Baseline baseline;
  std::vector<SweepPoint> points;
  /// Feasible intervals are weakly nested along increasing epsilon.
  bool nested = true;
};

/// One bounds computation per epsilon (sorted ascending, each >= 0). Infeasible
/// points are recorded and the sweep continues. In exact mode an assignment
/// from the previous point that is still feasible and beats the new one is
/// kept, so intervals nest exactly.
SweepResult epsilon_sweep(const Dataset& data, const Baseline& baseline, const std::vector<double>& epsilons,
                          FormulationKind kind, const ConstraintContext& ctx, const BoundsOptions& options = {});

struct DiffRow {
  std::string key;  // unit id, or group label when the dataset carries groups
  bool treated = false;
  std::size_t lower_rows = 0;
  std::size_t upper_rows = 0;
  double lower_outcome_sum = 0.0;
  double upper_outcome_sum = 0.0;
};

/// Control-use multiset comparison: shared = sum_j min(c_j^-, c_j^+).
struct AssignmentDiff {
  std::size_t shared_pairs = 0;
  std::size_t lower_only = 0;
  std::size_t upper_only = 0;
  std::size_t differing_controls = 0;  // lower_only + upper_only
  std::vector<DiffRow> rows;
};

AssignmentDiff compare_assignments(const Dataset& data, const MatchAssignment& w_lower,
                                   const MatchAssignment& w_upper);

}  // namespace matchbound
