#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "matchbound/balance.hpp"
#include "matchbound/data_model.hpp"
#include "matchbound/mip_model.hpp"

namespace matchbound {

/// Which integer program to build.
///  - f1: SATT, exactly one control per treated unit.
///  - f3: SATT, a variable number of controls per treated unit, linearized
///        with per-treated normalization variables (the fractional program is
///        never solved directly; "f2" requests resolve here).
///  - f4: sSATT with a fixed number of matched pairs M.
///  - f5: sSATT with a variable number of pairs, single normalization variable.
enum class FormulationKind { f1, f3, f4, f5 };

const char* to_string(FormulationKind kind);
/// Accepts f1..f5 (f2 maps to f3); throws ConfigurationError otherwise.
FormulationKind parse_formulation(const std::string& text);
EstimandKind estimand_of(FormulationKind kind);

/// Reuse bound used by the SATT variable-match program. `per_control` bounds
/// each control's use count by K^c; `aggregate` is the weaker normalized form
/// sum_i v_ij <= K^c sum_i z_i.
enum class ReuseForm { per_control, aggregate };

struct MomentTarget {
  std::size_t covariate = 0;
  int order = 1;
  double bound = 0.0;
};

struct QuantileTarget {
  std::size_t covariate = 0;
  std::size_t quantile_index = 0;
  double bound = 0.0;
};

/// The constraint set on match quality plus the matching-structure knobs.
struct QualitySpec {
  std::optional<double> distance_budget;
  std::optional<double> caliper;
  std::vector<MomentTarget> moment_targets;
  std::vector<QuantileTarget> quantile_targets;
  std::vector<std::size_t> exact_on;
  double tolerance_multiplier = 0.05;
  std::size_t max_control_reuse = 1;
  std::optional<std::size_t> match_count;
  std::optional<double> balance_cap;
  ReuseForm reuse_form = ReuseForm::per_control;
};

/// Optional inputs some constraint families need.
struct ConstraintContext {
  const DistanceMatrix* distances = nullptr;
  const QuantileGrid* grid = nullptr;
};

/// Throws ValidationError / ConfigurationError / CapacityError when the spec
/// cannot be built for `kind` on `data`.
void validate_spec(const Dataset& data, const QualitySpec& spec, FormulationKind kind,
                   const ConstraintContext& ctx);

MipModel build_f1(const Dataset& data, const QualitySpec& spec, Sense sense);
MipModel build_f3(const Dataset& data, const QualitySpec& spec, Sense sense);
MipModel build_f4(const Dataset& data, const QualitySpec& spec, Sense sense);
MipModel build_f5(const Dataset& data, const QualitySpec& spec, Sense sense);

/// Appends the quality constraints of `spec` in the algebraic form that
/// matches `kind`. Absolute-value bounds |a| <= b become the row pair
/// a <= b and -a <= b.
void attach_constraints(MipModel& model, const Dataset& data, const QualitySpec& spec,
                        FormulationKind kind, const ConstraintContext& ctx);

/// Structural program plus quality constraints.
MipModel build_model(FormulationKind kind, const Dataset& data, const QualitySpec& spec,
                     Sense sense, const ConstraintContext& ctx);

struct DecodedAssignment {
  MatchAssignment assignment;
  /// Largest |v_ij - w_ij z_i| (or |u_ij - w_ij z|); 0 for pure-w models.
  double max_normalization_error = 0.0;
};

/// Reads W from the binary columns (value > 0.5).
DecodedAssignment decode_assignment(const MipModel& model, const std::vector<double>& values,
                                    std::size_t n_treated, std::size_t n_control);

/// One measured-versus-bound line of a quality re-check.
struct SpecCheck {
  std::string label;
  ConstraintFamily family = ConstraintFamily::structure;
  double measured = 0.0;
  double bound = 0.0;
  double slack = 0.0;  // bound - measured; negative means violated
};

/// Re-measures `w` with the balance metrics against every bound in `spec`
/// (and the structural limits of `kind`).
std::vector<SpecCheck> check_assignment(const Dataset& data, const MatchAssignment& w,
                                        const QualitySpec& spec, FormulationKind kind,
                                        const ConstraintContext& ctx);

bool satisfies(const std::vector<SpecCheck>& checks, double tolerance);

}  // namespace matchbound
