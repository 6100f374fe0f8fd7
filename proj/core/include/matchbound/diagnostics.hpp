#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "matchbound/data_model.hpp"

namespace matchbound {

/// Known generative model for synthetic studies:
///   Y = intercept + treatment_effect*T + beta_observed'x + beta_unobserved'u
///       + beta_noise*eps + nonlinearity * sum_p x_p^2
/// with x_p ~ N(covariate_mean, covariate_sd^2), u ~ N(0, 1),
/// eps ~ N(0, noise_sd^2) and P(T = 1 | x, u) = logistic(propensity_intercept
/// + propensity_observed'x + propensity_unobserved'u).
struct SyntheticModel {
  std::vector<double> beta_observed{1.0, -0.5};
  std::vector<double> beta_unobserved{1.0};
  double beta_noise = 1.0;
  double intercept = 0.0;
  double treatment_effect = 0.0;
  double noise_sd = 1.0;
  double nonlinearity = 0.0;
  double covariate_mean = 0.0;
  double covariate_sd = 1.0;
  double propensity_intercept = 0.0;
  std::vector<double> propensity_observed;    // empty means zero weights
  std::vector<double> propensity_unobserved;  // empty means zero weights

  std::size_t n_observed() const { return beta_observed.size(); }
  std::size_t n_unobserved() const { return beta_unobserved.size(); }
  bool linear() const { return nonlinearity == 0.0; }
};

/// Per-unit quantities the matcher never sees.
struct HiddenUnit {
  std::string id;
  std::vector<double> unobserved;
  double noise = 0.0;
  double higher_order = 0.0;  // nonlinear part of the outcome
};

/// Aligned with the dataset arms: treated[i] belongs to data.treated(i).
struct HiddenLedger {
  std::vector<HiddenUnit> treated;
  std::vector<HiddenUnit> control;
};

struct SyntheticDraw {
  Dataset data;
  HiddenLedger ledger;
};

/// Draws units until both arms reach their requested sizes (surplus draws of
/// a full arm are discarded). Covariates are named x1..xP; ids are 1-based
/// acceptance order. Throws ValidationError for empty arms or a model whose
/// treatment rule cannot fill an arm.
SyntheticDraw generate(const SyntheticModel& model, std::size_t n_treated, std::size_t n_control,
                       std::uint64_t seed);

/// Split of the estimate difference between two SATT assignments. Each bar
/// quantity is the treated-minus-matched-control contrast under the
/// assignment's estimator weights, so total == sum of terms + residual.
struct Decomposition {
  std::vector<double> observed_a;
  std::vector<double> observed_b;
  std::vector<double> unobserved_a;
  std::vector<double> unobserved_b;
  double noise_a = 0.0;
  double noise_b = 0.0;
  double observables_term = 0.0;
  double unobservables_term = 0.0;
  double noise_term = 0.0;
  double higher_order_residual = 0.0;
  double total = 0.0;  // estimate(w_a) - estimate(w_b)
};

Decomposition decompose_difference(const SyntheticModel& model, const HiddenLedger& ledger, const Dataset& data,
                                   const MatchAssignment& w_a, const MatchAssignment& w_b);

struct NoiseSizes {
  std::size_t a = 10;
  std::size_t b = 10;
  std::size_t shared = 0;  // units common to both groups
};

struct NoiseBoundReport {
  double empirical_mean_abs = 0.0;  // Monte-Carlo mean of |beta_noise (eps_a - eps_b)|
  double standard_error = 0.0;
  double analytic_bound = 0.0;  // sqrt(Var(Y_a | X, U) + Var(Y_b | X, U))
  std::size_t n_reps = 0;
  bool violation = false;  // empirical > bound + 3 standard errors
};

/// Groups are equal-weight means over `a` and `b` units of which `shared`
/// are common. Throws PreconditionError for n_reps < 100 or bad sizes.
NoiseBoundReport noise_bound_check(const SyntheticModel& model, std::size_t n_reps, const NoiseSizes& sizes,
                                   std::uint64_t seed);

/// General form over one pool of units with arbitrary weight vectors.
NoiseBoundReport noise_bound_check(const SyntheticModel& model, std::size_t n_reps,
                                   const std::vector<double>& weights_a, const std::vector<double>& weights_b,
                                   std::uint64_t seed);

/// Two one-to-one assignments with bit-identical covariate balance whose
/// SATT estimates have opposite signs.
struct OppositeSignInstance {
  Dataset data;
  HiddenLedger ledger;
  MatchAssignment w_a;
  MatchAssignment w_b;
  double estimate_a = 0.0;
  double estimate_b = 0.0;
  std::uint64_t seed_used = 0;
};

/// Each treated unit gets two control twins sharing one covariate vector and
/// differing in the unobserved covariate and noise. w_a takes the higher-outcome
/// twin, w_b the lower. Seeds are tried from `seed` upward until the estimates
/// have opposite signs; throws NumericError after `max_attempts`.
OppositeSignInstance make_opposite_sign_instance(const SyntheticModel& model, std::size_t n_treated,
                                                 std::uint64_t seed, std::size_t max_attempts = 1000);

}  // namespace matchbound
