#include "matchbound/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "matchbound/balance.hpp"
#include "matchbound/errors.hpp"
#include "random.hpp"

namespace matchbound {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) s += a[k] * b[k];
  return s;
}

std::vector<std::string> covariate_names(std::size_t p) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < p; ++k) names.push_back("x" + std::to_string(k + 1));
  return names;
}

struct Draw {
  std::vector<double> x;
  std::vector<double> u;
  double noise = 0.0;
  double higher = 0.0;
};

Draw draw_unit(const SyntheticModel& model, detail::PortableRng& rng) {
  Draw d;
  for (std::size_t p = 0; p < model.n_observed(); ++p) {
    d.x.push_back(model.covariate_mean + model.covariate_sd * rng.normal());
  }
  for (std::size_t q = 0; q < model.n_unobserved(); ++q) d.u.push_back(rng.normal());
  d.noise = model.noise_sd * rng.normal();
  double sq = 0.0;
  for (double v : d.x) sq += v * v;
  d.higher = model.nonlinearity * sq;
  return d;
}

double outcome_of(const SyntheticModel& model, const Draw& d, bool treated) {
  return model.intercept + (treated ? model.treatment_effect : 0.0) + dot(model.beta_observed, d.x) +
         dot(model.beta_unobserved, d.u) + model.beta_noise * d.noise + d.higher;
}

Unit make_unit(const SyntheticModel& model, const Draw& d, bool treated, std::size_t id) {
  Unit unit;
  unit.id = std::to_string(id);
  unit.outcome = outcome_of(model, d, treated);
  unit.treated = treated;
  unit.covariates = d.x;
  return unit;
}

HiddenUnit hidden_of(const Draw& d, std::size_t id) { return {std::to_string(id), d.u, d.noise, d.higher}; }

void validate_model(const SyntheticModel& model) {
  if (model.beta_observed.empty()) throw ValidationError("synthetic model needs at least one observed covariate");
  if (!(model.noise_sd >= 0.0) || !(model.covariate_sd >= 0.0)) {
    throw ValidationError("synthetic model standard deviations must be >= 0");
  }
  if (!model.propensity_observed.empty() && model.propensity_observed.size() != model.n_observed()) {
    throw ValidationError("propensity_observed must match beta_observed in length");
  }
  if (!model.propensity_unobserved.empty() && model.propensity_unobserved.size() != model.n_unobserved()) {
    throw ValidationError("propensity_unobserved must match beta_unobserved in length");
  }
}

/// Contrast of a per-unit quantity: treated mean minus the estimator-weighted
/// matched-control mean.
double contrast(std::size_t nt, const std::vector<double>& omega, const auto& treated_value,
                const auto& control_value) {
  double t = 0.0;
  for (std::size_t i = 0; i < nt; ++i) t += treated_value(i);
  t /= static_cast<double>(nt);
  double c = 0.0;
  for (std::size_t j = 0; j < omega.size(); ++j) {
    if (omega[j] != 0.0) c += omega[j] * control_value(j);
  }
  return t - c;
}

}  // namespace

SyntheticDraw generate(const SyntheticModel& model, std::size_t n_treated, std::size_t n_control,
                       std::uint64_t seed) {
  validate_model(model);
  if (n_treated == 0 || n_control == 0) throw ValidationError("both arms need at least one unit");
  detail::PortableRng rng(seed);
  std::vector<Unit> units;
  std::vector<HiddenUnit> hidden_units;
  std::size_t got_t = 0;
  std::size_t got_c = 0;
  const std::size_t max_draws = 1000 * (n_treated + n_control) + 100000;
  for (std::size_t draws = 0; got_t < n_treated || got_c < n_control; ++draws) {
    if (draws >= max_draws) throw ValidationError("treatment rule cannot fill both arms");
    const Draw d = draw_unit(model, rng);
    const double score = model.propensity_intercept + dot(model.propensity_observed, d.x) +
                         dot(model.propensity_unobserved, d.u);
    const bool treated = rng.uniform() < 1.0 / (1.0 + std::exp(-score));
    if (treated ? got_t >= n_treated : got_c >= n_control) continue;
    (treated ? got_t : got_c) += 1;
    const std::size_t id = units.size() + 1;
    units.push_back(make_unit(model, d, treated, id));
    hidden_units.push_back(hidden_of(d, id));
  }
  HiddenLedger ledger;
  for (std::size_t k = 0; k < units.size(); ++k) {
    (units[k].treated ? ledger.treated : ledger.control).push_back(hidden_units[k]);
  }
  return {Dataset(covariate_names(model.n_observed()), std::move(units)), std::move(ledger)};
}

Decomposition decompose_difference(const SyntheticModel& model, const HiddenLedger& ledger, const Dataset& data,
                                   const MatchAssignment& w_a, const MatchAssignment& w_b) {
  const std::size_t nt = data.n_treated();
  const std::size_t nc = data.n_control();
  if (ledger.treated.size() != nt || ledger.control.size() != nc) {
    throw ValidationError("hidden ledger does not match the dataset arms");
  }
  for (std::size_t i = 0; i < nt; ++i) {
    if (ledger.treated[i].id != data.treated(i).id) throw ValidationError("hidden ledger ids do not match");
  }
  for (std::size_t j = 0; j < nc; ++j) {
    if (ledger.control[j].id != data.control(j).id) throw ValidationError("hidden ledger ids do not match");
  }
  if (data.n_covariates() != model.n_observed()) {
    throw ValidationError("dataset covariates do not match the synthetic model");
  }

  Decomposition out;
  const double est_a = estimate_satt(data, w_a).estimate;
  const double est_b = estimate_satt(data, w_b).estimate;
  out.total = est_a - est_b;
  const auto omega_a = satt_control_weights(w_a);
  const auto omega_b = satt_control_weights(w_b);

  for (std::size_t p = 0; p < model.n_observed(); ++p) {
    auto t = [&](std::size_t i) { return data.treated(i).covariates[p]; };
    auto c = [&](std::size_t j) { return data.control(j).covariates[p]; };
    out.observed_a.push_back(contrast(nt, omega_a, t, c));
    out.observed_b.push_back(contrast(nt, omega_b, t, c));
  }
  for (std::size_t q = 0; q < model.n_unobserved(); ++q) {
    auto t = [&](std::size_t i) { return ledger.treated[i].unobserved.at(q); };
    auto c = [&](std::size_t j) { return ledger.control[j].unobserved.at(q); };
    out.unobserved_a.push_back(contrast(nt, omega_a, t, c));
    out.unobserved_b.push_back(contrast(nt, omega_b, t, c));
  }
  auto tn = [&](std::size_t i) { return ledger.treated[i].noise; };
  auto cn = [&](std::size_t j) { return ledger.control[j].noise; };
  out.noise_a = contrast(nt, omega_a, tn, cn);
  out.noise_b = contrast(nt, omega_b, tn, cn);

  for (std::size_t p = 0; p < model.n_observed(); ++p) {
    out.observables_term += model.beta_observed[p] * (out.observed_a[p] - out.observed_b[p]);
  }
  for (std::size_t q = 0; q < model.n_unobserved(); ++q) {
    out.unobservables_term += model.beta_unobserved[q] * (out.unobserved_a[q] - out.unobserved_b[q]);
  }
  out.noise_term = model.beta_noise * (out.noise_a - out.noise_b);

  if (!model.linear()) {
    auto th = [&](std::size_t i) { return ledger.treated[i].higher_order; };
    auto ch = [&](std::size_t j) { return ledger.control[j].higher_order; };
    out.higher_order_residual = contrast(nt, omega_a, th, ch) - contrast(nt, omega_b, th, ch);
  }
  return out;
}

NoiseBoundReport noise_bound_check(const SyntheticModel& model, std::size_t n_reps,
                                   const std::vector<double>& weights_a, const std::vector<double>& weights_b,
                                   std::uint64_t seed) {
  if (n_reps < 100) throw PreconditionError("noise bound check needs n_reps >= 100");
  if (weights_a.size() != weights_b.size() || weights_a.empty()) {
    throw PreconditionError("weight vectors must share one non-empty unit pool");
  }
  const double sigma = std::abs(model.beta_noise) * model.noise_sd;
  double ssa = 0.0;
  double ssb = 0.0;
  for (double w : weights_a) ssa += w * w;
  for (double w : weights_b) ssb += w * w;

  NoiseBoundReport report;
  report.n_reps = n_reps;
  report.analytic_bound = sigma * std::sqrt(ssa + ssb);
  detail::PortableRng rng(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t r = 0; r < n_reps; ++r) {
    double diff = 0.0;
    for (std::size_t k = 0; k < weights_a.size(); ++k) diff += (weights_a[k] - weights_b[k]) * (sigma * rng.normal());
    const double v = std::abs(diff);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(n_reps);
  report.empirical_mean_abs = sum / n;
  const double var = std::max(0.0, (sum_sq - n * report.empirical_mean_abs * report.empirical_mean_abs) / (n - 1.0));
  report.standard_error = std::sqrt(var / n);
  report.violation = report.empirical_mean_abs > report.analytic_bound + 3.0 * report.standard_error;
  return report;
}

NoiseBoundReport noise_bound_check(const SyntheticModel& model, std::size_t n_reps, const NoiseSizes& sizes,
                                   std::uint64_t seed) {
  if (sizes.a == 0 || sizes.b == 0 || sizes.shared > std::min(sizes.a, sizes.b)) {
    throw PreconditionError("noise sizes need a, b >= 1 and shared <= min(a, b)");
  }
  const std::size_t pool = sizes.a + sizes.b - sizes.shared;
  std::vector<double> wa(pool, 0.0);
  std::vector<double> wb(pool, 0.0);
  for (std::size_t k = 0; k < sizes.a; ++k) wa[k] = 1.0 / static_cast<double>(sizes.a);
  for (std::size_t k = sizes.a - sizes.shared; k < pool; ++k) wb[k] = 1.0 / static_cast<double>(sizes.b);
  return noise_bound_check(model, n_reps, wa, wb, seed);
}

OppositeSignInstance make_opposite_sign_instance(const SyntheticModel& model, std::size_t n_treated,
                                                 std::uint64_t seed, std::size_t max_attempts) {
  validate_model(model);
  if (n_treated < 2) throw ValidationError("opposite-sign instance needs at least two treated units");
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    const std::uint64_t s = seed + attempt;
    detail::PortableRng rng(s);
    std::vector<Unit> units;
    std::vector<HiddenUnit> hidden;
    std::vector<MatchedPair> high;
    std::vector<MatchedPair> low;
    std::size_t id = 0;
    for (std::size_t i = 0; i < n_treated; ++i) {
      const Draw t = draw_unit(model, rng);
      units.push_back(make_unit(model, t, true, ++id));
      hidden.push_back(hidden_of(t, id));
    }
    for (std::size_t i = 0; i < n_treated; ++i) {
      Draw twin1 = draw_unit(model, rng);
      Draw twin2 = draw_unit(model, rng);
      twin2.x = twin1.x;
      twin2.higher = twin1.higher;
      const Unit c1 = make_unit(model, twin1, false, ++id);
      hidden.push_back(hidden_of(twin1, id));
      const Unit c2 = make_unit(model, twin2, false, ++id);
      hidden.push_back(hidden_of(twin2, id));
      const std::size_t j1 = 2 * i;
      const std::size_t j2 = 2 * i + 1;
      const bool first_higher = c1.outcome >= c2.outcome;
      high.push_back({i, first_higher ? j1 : j2});
      low.push_back({i, first_higher ? j2 : j1});
      units.push_back(c1);
      units.push_back(c2);
    }
    HiddenLedger ledger;
    for (std::size_t k = 0; k < units.size(); ++k) {
      (units[k].treated ? ledger.treated : ledger.control).push_back(hidden[k]);
    }
    Dataset data(covariate_names(model.n_observed()), std::move(units));
    MatchAssignment w_a(n_treated, 2 * n_treated, high);
    MatchAssignment w_b(n_treated, 2 * n_treated, low);
    const double ea = estimate_satt(data, w_a).estimate;
    const double eb = estimate_satt(data, w_b).estimate;
    if (ea * eb < 0.0) {
      return {std::move(data), std::move(ledger), std::move(w_a), std::move(w_b), ea, eb, s};
    }
  }
  throw NumericError("no opposite-sign instance found within the attempt budget");
}

}  // namespace matchbound
