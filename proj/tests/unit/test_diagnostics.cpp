#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "matchbound/balance.hpp"
#include "matchbound/bounds.hpp"
#include "matchbound/diagnostics.hpp"
#include "matchbound/errors.hpp"

using namespace matchbound;

namespace {

/// Arbitrary SATT assignment: treated i takes control (i * step + k) mod nc for k < count.
MatchAssignment spread(const Dataset& data, std::size_t step, std::size_t count) {
  std::vector<MatchedPair> pairs;
  for (std::size_t i = 0; i < data.n_treated(); ++i) {
    for (std::size_t k = 0; k < count; ++k) pairs.push_back({i, (i * step + k) % data.n_control()});
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return MatchAssignment(data.n_treated(), data.n_control(), pairs);
}

}  // namespace

TEST(Generate, FixedSeedIsBitIdentical) {
  SyntheticModel model;
  model.propensity_observed = {0.5, 0.0};
  const auto a = generate(model, 10, 20, 7);
  const auto b = generate(model, 10, 20, 7);
  EXPECT_EQ(dataset_to_csv(a.data), dataset_to_csv(b.data));
  EXPECT_NE(dataset_to_csv(a.data), dataset_to_csv(generate(model, 10, 20, 8).data));
  EXPECT_EQ(a.data.n_treated(), 10u);
  EXPECT_EQ(a.data.n_control(), 20u);
  EXPECT_EQ(a.ledger.treated.size(), 10u);
}

TEST(Generate, NoHiddenChannelsGiveLinearOutcomes) {
  SyntheticModel model;
  model.beta_unobserved = {0.0};
  model.noise_sd = 0.0;
  model.intercept = 0.3;
  model.treatment_effect = 2.0;
  const auto draw = generate(model, 5, 5, 1);
  for (const auto& u : draw.data.treated()) {
    EXPECT_EQ(u.outcome, 0.3 + 2.0 + (1.0 * u.covariates[0] + (-0.5) * u.covariates[1]));
  }
  for (const auto& u : draw.data.control()) {
    EXPECT_EQ(u.outcome, 0.3 + (1.0 * u.covariates[0] + (-0.5) * u.covariates[1]));
  }
}

TEST(Generate, CovariateMomentsMatchConfiguration) {
  SyntheticModel model;
  model.covariate_mean = 1.5;
  model.covariate_sd = 2.0;
  const auto draw = generate(model, 5000, 5000, 3);
  double sum = 0.0;
  double sq = 0.0;
  std::size_t n = 0;
  for (auto arm : {draw.data.treated(), draw.data.control()}) {
    for (const auto& u : arm) {
      sum += u.covariates[0];
      sq += u.covariates[0] * u.covariates[0];
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - mean * mean;
  // Standard errors: 2 / 100 for the mean, about 4 * sqrt(2) / 100 for the variance.
  EXPECT_NEAR(mean, 1.5, 4 * 0.02);
  EXPECT_NEAR(var, 4.0, 4 * 0.057);
}

TEST(Generate, RejectsEmptyArmsAndBadModels) {
  SyntheticModel model;
  EXPECT_THROW(generate(model, 0, 5, 1), ValidationError);
  model.propensity_observed = {1.0};
  EXPECT_THROW(generate(model, 5, 5, 1), ValidationError);
}

TEST(Decompose, IdenticalAssignmentsGiveZero) {
  SyntheticModel model;
  const auto draw = generate(model, 6, 12, 11);
  const auto w = spread(draw.data, 2, 1);
  const auto d = decompose_difference(model, draw.ledger, draw.data, w, w);
  EXPECT_EQ(d.total, 0.0);
  EXPECT_EQ(d.observables_term, 0.0);
  EXPECT_EQ(d.unobservables_term, 0.0);
  EXPECT_EQ(d.noise_term, 0.0);
  EXPECT_EQ(d.higher_order_residual, 0.0);
}

TEST(Decompose, OnlyObservablesChannel) {
  SyntheticModel model;
  model.beta_unobserved = {0.0};
  model.beta_noise = 0.0;
  const auto draw = generate(model, 6, 12, 13);
  const auto d = decompose_difference(model, draw.ledger, draw.data, spread(draw.data, 2, 1), spread(draw.data, 1, 3));
  EXPECT_EQ(d.unobservables_term, 0.0);
  EXPECT_EQ(d.noise_term, 0.0);
  EXPECT_NEAR(d.total, d.observables_term, 1e-12);
  EXPECT_NE(d.total, 0.0);
}

TEST(Decompose, IdentityAgainstIndependentEstimates) {
  SyntheticModel model;
  model.intercept = 0.7;
  model.treatment_effect = -0.4;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto draw = generate(model, 5, 11, seed);
    const auto wa = spread(draw.data, 2, 1 + seed % 3);
    const auto wb = spread(draw.data, 3, 1 + (seed + 1) % 3);
    const auto d = decompose_difference(model, draw.ledger, draw.data, wa, wb);
    // Independent recomputation straight from the unit outcomes.
    auto satt = [&](const MatchAssignment& w) {
      double total = 0.0;
      for (std::size_t i = 0; i < draw.data.n_treated(); ++i) {
        double s = 0.0;
        double n = 0.0;
        for (const auto& p : w.pairs()) {
          if (p.treated == i) s += draw.data.control(p.control).outcome, n += 1.0;
        }
        total += draw.data.treated(i).outcome - s / n;
      }
      return total / static_cast<double>(draw.data.n_treated());
    };
    EXPECT_NEAR(d.total, satt(wa) - satt(wb), 1e-12);
    EXPECT_EQ(d.higher_order_residual, 0.0);
    EXPECT_NEAR(d.total, d.observables_term + d.unobservables_term + d.noise_term + d.higher_order_residual, 1e-12);
  }
}

TEST(Decompose, ResidualShrinksWithNonlinearity) {
  double previous = 1e300;
  for (double scale : {1.0, 0.1, 0.01}) {
    SyntheticModel model;
    model.nonlinearity = scale;
    const auto draw = generate(model, 6, 12, 17);
    const auto d = decompose_difference(model, draw.ledger, draw.data, spread(draw.data, 2, 1), spread(draw.data, 1, 2));
    EXPECT_NEAR(d.total, d.observables_term + d.unobservables_term + d.noise_term + d.higher_order_residual, 1e-12);
    EXPECT_LT(std::abs(d.higher_order_residual), previous);
    previous = std::abs(d.higher_order_residual);
  }
}

TEST(Decompose, LedgerMismatchIsValidationError) {
  SyntheticModel model;
  const auto draw = generate(model, 4, 8, 19);
  auto ledger = draw.ledger;
  ledger.control.pop_back();
  const auto w = spread(draw.data, 1, 1);
  EXPECT_THROW(decompose_difference(model, ledger, draw.data, w, w), ValidationError);
  ledger = draw.ledger;
  ledger.treated[0].id = "nope";
  EXPECT_THROW(decompose_difference(model, ledger, draw.data, w, w), ValidationError);
}

TEST(NoiseBound, ZeroNoiseGivesZeroOnBothSides) {
  SyntheticModel model;
  model.noise_sd = 0.0;
  const auto r = noise_bound_check(model, 200, NoiseSizes{}, 1);
  EXPECT_EQ(r.empirical_mean_abs, 0.0);
  EXPECT_EQ(r.analytic_bound, 0.0);
  EXPECT_FALSE(r.violation);
}

TEST(NoiseBound, DisjointGroupsMatchFoldedNormalMean) {
  SyntheticModel model;
  model.noise_sd = 2.0;
  const NoiseSizes sizes{8, 8, 0};
  const auto r = noise_bound_check(model, 20000, sizes, 5);
  const double bound = std::sqrt(2.0 * 4.0 / 8.0);
  EXPECT_NEAR(r.analytic_bound, bound, 1e-12);
  const double folded = bound * std::sqrt(2.0 / std::numbers::pi);
  EXPECT_NEAR(r.empirical_mean_abs, folded, 4.0 * r.standard_error);
  EXPECT_FALSE(r.violation);
}

TEST(NoiseBound, OverlappingGroupsStayBelowBound) {
  SyntheticModel model;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = noise_bound_check(model, 1000, NoiseSizes{10, 6, 4}, seed);
    EXPECT_FALSE(r.violation);
    EXPECT_LE(r.empirical_mean_abs, r.analytic_bound + 3.0 * r.standard_error);
  }
}

TEST(NoiseBound, PreconditionsEnforced) {
  SyntheticModel model;
  EXPECT_THROW(noise_bound_check(model, 99, NoiseSizes{}, 1), PreconditionError);
  EXPECT_THROW(noise_bound_check(model, 100, NoiseSizes{3, 3, 4}, 1), PreconditionError);
}

TEST(OppositeSign, TwinsShareObservedBalance) {
  SyntheticModel model;
  model.beta_unobserved = {2.0};
  model.noise_sd = 0.1;
  const auto inst = make_opposite_sign_instance(model, 4, 42);
  EXPECT_LT(inst.estimate_a * inst.estimate_b, 0.0);
  for (std::size_t p = 0; p < 2; ++p) {
    for (int k = 1; k <= 3; ++k) {
      EXPECT_NEAR(moment_gap(inst.data, inst.w_a, p, k, EstimandKind::satt),
                  moment_gap(inst.data, inst.w_b, p, k, EstimandKind::satt), 1e-12);
    }
  }
  const auto d = decompose_difference(model, inst.ledger, inst.data, inst.w_a, inst.w_b);
  EXPECT_NEAR(d.observables_term, 0.0, 1e-12);
  EXPECT_NEAR(d.total, inst.estimate_a - inst.estimate_b, 1e-12);
}
