#include "matchbound/formulations.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "matchbound/errors.hpp"
#include "matchbound/format.hpp"

namespace matchbound {

const char* to_string(FormulationKind kind) {
  switch (kind) {
    case FormulationKind::f1: return "f1";
    case FormulationKind::f3: return "f3";
    case FormulationKind::f4: return "f4";
    case FormulationKind::f5: return "f5";
  }
  return "unknown";
}

FormulationKind parse_formulation(const std::string& text) {
  if (text == "f1") return FormulationKind::f1;
  if (text == "f2" || text == "f3") return FormulationKind::f3;
  if (text == "f4") return FormulationKind::f4;
  if (text == "f5") return FormulationKind::f5;
  throw ConfigurationError("unknown formulation '" + text + "' (expected f1, f2, f3, f4 or f5)");
}

EstimandKind estimand_of(FormulationKind kind) {
  return (kind == FormulationKind::f1 || kind == FormulationKind::f3) ? EstimandKind::satt
                                                                       : EstimandKind::ssatt;
}

namespace {

std::string pair_name(const char* prefix, std::size_t i, std::size_t j) {
  return std::string(prefix) + "_" + std::to_string(i) + "_" + std::to_string(j);
}

void add_w_columns(MipModel& model, std::size_t nt, std::size_t nc) {
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      model.add_variable({pair_name("w", i, j), 0.0, 1.0, VarKind::binary, VarRole::w}, i, j);
    }
  }
}

void add_control_reuse_rows(MipModel& model, std::size_t nt, std::size_t nc, double cap) {
  for (std::size_t j = 0; j < nc; ++j) {
    Constraint row{"reuse_" + std::to_string(j), {}, Comparator::less_equal, cap};
    for (std::size_t i = 0; i < nt; ++i) row.terms.push_back({model.require_column(VarRole::w, i, j), 1.0});
    model.add_constraint(std::move(row));
  }
}

void add_treated_rows(MipModel& model, std::size_t nt, std::size_t nc, Comparator cmp, double rhs,
                      const char* prefix) {
  for (std::size_t i = 0; i < nt; ++i) {
    Constraint row{prefix + std::to_string(i), {}, cmp, rhs};
    for (std::size_t j = 0; j < nc; ++j) row.terms.push_back({model.require_column(VarRole::w, i, j), 1.0});
    model.add_constraint(std::move(row));
  }
}

void check_capacity(const Dataset& data, const QualitySpec& spec) {
  if (data.n_control() * spec.max_control_reuse < data.n_treated()) {
    throw CapacityError("N^c * K^c = " + std::to_string(data.n_control() * spec.max_control_reuse) +
                        " cannot cover N^t = " + std::to_string(data.n_treated()) + " treated units");
  }
}

}  // namespace

void validate_spec(const Dataset& data, const QualitySpec& spec, FormulationKind kind,
                   const ConstraintContext& ctx) {
  if (spec.max_control_reuse < 1) throw ValidationError("max_control_reuse must be >= 1");
  if (spec.tolerance_multiplier < 0.0) throw ValidationError("tolerance multiplier must be >= 0");
  const auto nonneg = [](std::optional<double> v, const char* what) {
    if (v && !(*v >= 0.0)) throw ValidationError(std::string(what) + " must be >= 0");
  };
  nonneg(spec.distance_budget, "distance budget");
  nonneg(spec.caliper, "caliper");
  nonneg(spec.balance_cap, "balance cap");
  for (const auto& t : spec.moment_targets) {
    if (t.covariate >= data.n_covariates()) throw ValidationError("moment target covariate out of range");
    if (t.order < 1) throw ValidationError("moment order must be >= 1");
    if (!(t.bound >= 0.0)) throw ValidationError("moment bound must be >= 0");
  }
  for (const auto& t : spec.quantile_targets) {
    if (ctx.grid == nullptr) throw ConfigurationError("quantile targets need a quantile grid");
    if (t.covariate >= data.n_covariates() || t.covariate >= ctx.grid->treated_values.size()) {
      throw ValidationError("quantile target covariate out of range");
    }
    if (t.quantile_index >= ctx.grid->proportions.size()) {
      throw ValidationError("quantile target index out of range");
    }
    if (!(t.bound >= 0.0)) throw ValidationError("quantile bound must be >= 0");
  }
  for (std::size_t p : spec.exact_on) {
    if (p >= data.n_covariates()) throw ValidationError("exact-match covariate out of range");
  }
  if ((spec.distance_budget || spec.caliper) && ctx.distances == nullptr) {
    throw ConfigurationError("distance budget or caliper requested without a distance matrix");
  }
  if (ctx.distances != nullptr &&
      (ctx.distances->n_treated() != data.n_treated() || ctx.distances->n_control() != data.n_control())) {
    throw ValidationError("distance matrix shape does not match the dataset");
  }
  switch (kind) {
    case FormulationKind::f1:
      if (spec.match_count && *spec.match_count != data.n_treated()) {
        throw ValidationError("one-to-one SATT matching needs match_count == N^t");
      }
      check_capacity(data, spec);
      break;
    case FormulationKind::f3:
      check_capacity(data, spec);
      break;
    case FormulationKind::f4: {
      if (!spec.match_count) throw ValidationError("fixed-size sSATT matching needs match_count M");
      const std::size_t limit = std::min(data.n_treated(), data.n_control() * spec.max_control_reuse);
      if (*spec.match_count < 1 || *spec.match_count > limit) {
        throw ValidationError("match_count M = " + std::to_string(*spec.match_count) +
                              " outside [1, " + std::to_string(limit) + "]");
      }
      break;
    }
    case FormulationKind::f5:
      break;
  }
}

MipModel build_f1(const Dataset& data, const QualitySpec& spec, Sense sense) {
  const std::size_t nt = data.n_treated();
  const std::size_t nc = data.n_control();
  if (spec.match_count && *spec.match_count != nt) {
    throw ValidationError("one-to-one SATT matching needs match_count == N^t");
  }
  check_capacity(data, spec);
  MipModel model(sense);
  add_w_columns(model, nt, nc);
  add_control_reuse_rows(model, nt, nc, static_cast<double>(spec.max_control_reuse));
  add_treated_rows(model, nt, nc, Comparator::equal, 1.0, "assign_");
  model.set_objective_offset(data.mean_treated_outcome());
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      model.set_objective_coefficient(model.require_column(VarRole::w, i, j),
                                      -data.control(j).outcome / static_cast<double>(nt));
    }
  }
  return model;
}

MipModel build_f3(const Dataset& data, const QualitySpec& spec, Sense sense) {
  const std::size_t nt = data.n_treated();
  const std::size_t nc = data.n_control();
  check_capacity(data, spec);
  MipModel model(sense);
  add_w_columns(model, nt, nc);
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      model.add_variable({pair_name("v", i, j), 0.0, 1.0, VarKind::continuous, VarRole::v}, i, j);
    }
  }
  // z_i = 1 / (number of controls matched to i) never exceeds 1.
  for (std::size_t i = 0; i < nt; ++i) {
    model.add_variable({"z_" + std::to_string(i), 0.0, 1.0, VarKind::continuous, VarRole::z_i}, i, 0);
  }
  for (std::size_t i = 0; i < nt; ++i) {
    const std::size_t z = model.require_column(VarRole::z_i, i, 0);
    for (std::size_t j = 0; j < nc; ++j) {
      const std::size_t v = model.require_column(VarRole::v, i, j);
      const std::size_t w = model.require_column(VarRole::w, i, j);
      const std::string tag = std::to_string(i) + "_" + std::to_string(j);
      model.add_constraint({"v_le_z_" + tag, {{v, 1.0}, {z, -1.0}}, Comparator::less_equal, 0.0});
      model.add_constraint({"v_le_w_" + tag, {{v, 1.0}, {w, -1.0}}, Comparator::less_equal, 0.0});
      model.add_constraint({"v_ge_z_" + tag, {{v, 1.0}, {z, -1.0}, {w, -1.0}}, Comparator::greater_equal, -1.0});
    }
    Constraint normalize{"vsum_" + std::to_string(i), {}, Comparator::equal, 1.0};
    for (std::size_t j = 0; j < nc; ++j) normalize.terms.push_back({model.require_column(VarRole::v, i, j), 1.0});
    model.add_constraint(std::move(normalize));
  }
  add_treated_rows(model, nt, nc, Comparator::greater_equal, 1.0, "atleast_");
  const double cap = static_cast<double>(spec.max_control_reuse);
  if (spec.reuse_form == ReuseForm::per_control) {
    add_control_reuse_rows(model, nt, nc, cap);
  } else {
    for (std::size_t j = 0; j < nc; ++j) {
      Constraint row{"reuse_" + std::to_string(j), {}, Comparator::less_equal, 0.0};
      for (std::size_t i = 0; i < nt; ++i) {
        row.terms.push_back({model.require_column(VarRole::v, i, j), 1.0});
        row.terms.push_back({model.require_column(VarRole::z_i, i, 0), -cap});
      }
      model.add_constraint(std::move(row));
    }
  }
  model.set_objective_offset(data.mean_treated_outcome());
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      model.set_objective_coefficient(model.require_column(VarRole::v, i, j),
                                      -data.control(j).outcome / static_cast<double>(nt));
    }
  }
  return model;
}

MipModel build_f4(const Dataset& data, const QualitySpec& spec, Sense sense) {
  const std::size_t nt = data.n_treated();
  const std::size_t nc = data.n_control();
  if (!spec.match_count) throw ValidationError("fixed-size sSATT matching needs match_count M");
  const std::size_t m = *spec.match_count;
  const std::size_t limit = std::min(nt, nc * spec.max_control_reuse);
  if (m < 1 || m > limit) {
    throw ValidationError("match_count M = " + std::to_string(m) + " outside [1, " +
                          std::to_string(limit) + "]");
  }
  MipModel model(sense);
  add_w_columns(model, nt, nc);
  add_control_reuse_rows(model, nt, nc, static_cast<double>(spec.max_control_reuse));
  add_treated_rows(model, nt, nc, Comparator::less_equal, 1.0, "once_");
  Constraint total{"total_matches", {}, Comparator::equal, static_cast<double>(m)};
  for (std::size_t c = 0; c < model.n_variables(); ++c) total.terms.push_back({c, 1.0});
  model.add_constraint(std::move(total));
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      model.set_objective_coefficient(
          model.require_column(VarRole::w, i, j),
          (data.treated(i).outcome - data.control(j).outcome) / static_cast<double>(m));
    }
  }
  return model;
}

MipModel build_f5(const Dataset& data, const QualitySpec& spec, Sense sense) {
  const std::size_t nt = data.n_treated();
  const std::size_t nc = data.n_control();
  if (spec.max_control_reuse < 1) throw ValidationError("max_control_reuse must be >= 1");
  MipModel model(sense);
  add_w_columns(model, nt, nc);
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      model.add_variable({pair_name("u", i, j), 0.0, 1.0, VarKind::continuous, VarRole::u}, i, j);
    }
  }
  const std::size_t z = model.add_variable({"z", 0.0, 1.0, VarKind::continuous, VarRole::z});
  Constraint normalize{"usum", {}, Comparator::equal, 1.0};
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      const std::size_t u = model.require_column(VarRole::u, i, j);
      const std::size_t w = model.require_column(VarRole::w, i, j);
      const std::string tag = std::to_string(i) + "_" + std::to_string(j);
      model.add_constraint({"u_le_z_" + tag, {{u, 1.0}, {z, -1.0}}, Comparator::less_equal, 0.0});
      model.add_constraint({"u_le_w_" + tag, {{u, 1.0}, {w, -1.0}}, Comparator::less_equal, 0.0});
      model.add_constraint({"u_ge_z_" + tag, {{u, 1.0}, {z, -1.0}, {w, -1.0}}, Comparator::greater_equal, -1.0});
      normalize.terms.push_back({u, 1.0});
    }
  }
  model.add_constraint(std::move(normalize));
  for (std::size_t i = 0; i < nt; ++i) {
    Constraint row{"treated_once_" + std::to_string(i), {}, Comparator::less_equal, 0.0};
    for (std::size_t j = 0; j < nc; ++j) row.terms.push_back({model.require_column(VarRole::u, i, j), 1.0});
    row.terms.push_back({z, -1.0});
    model.add_constraint(std::move(row));
  }
  const double cap = static_cast<double>(spec.max_control_reuse);
  for (std::size_t j = 0; j < nc; ++j) {
    Constraint row{"reuse_" + std::to_string(j), {}, Comparator::less_equal, 0.0};
    for (std::size_t i = 0; i < nt; ++i) row.terms.push_back({model.require_column(VarRole::u, i, j), 1.0});
    row.terms.push_back({z, -cap});
    model.add_constraint(std::move(row));
  }
  // w-level counterpart of treated_once keeps the decoded W consistent.
  add_treated_rows(model, nt, nc, Comparator::less_equal, 1.0, "once_");
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      model.set_objective_coefficient(model.require_column(VarRole::u, i, j),
                                      data.treated(i).outcome - data.control(j).outcome);
    }
  }
  return model;
}

namespace {

/// Emits |offset + sum(terms)| <= bound as two rows.
void add_abs_rows(MipModel& model, const std::string& name, std::vector<LinearTerm> terms,
                  double offset, double bound, ConstraintFamily family) {
  std::vector<LinearTerm> negated = terms;
  for (auto& t : negated) t.coefficient = -t.coefficient;
  model.add_constraint({name + "_hi", std::move(terms), Comparator::less_equal, bound - offset, family});
  model.add_constraint({name + "_lo", std::move(negated), Comparator::less_equal, bound + offset, family});
}

struct PairVariables {
  VarRole role;
  double scale;  // multiplies every per-pair coefficient
};

PairVariables pair_variables(FormulationKind kind, const Dataset& data, const QualitySpec& spec) {
  const double nt = static_cast<double>(data.n_treated());
  switch (kind) {
    case FormulationKind::f1: return {VarRole::w, 1.0 / nt};
    case FormulationKind::f3: return {VarRole::v, 1.0 / nt};
    case FormulationKind::f4: return {VarRole::w, 1.0 / static_cast<double>(*spec.match_count)};
    case FormulationKind::f5: return {VarRole::u, 1.0};
  }
  return {VarRole::w, 1.0};
}

/// Balance row on a per-unit statistic f. SATT programs compare the treated
/// mean of f with the weighted matched-control mean; sSATT programs bound the
/// mean pairwise difference.
void add_balance_rows(MipModel& model, const Dataset& data, FormulationKind kind,
                      const PairVariables& vars, const std::string& name, double bound,
                      ConstraintFamily family, const std::function<double(const Unit&)>& f) {
  const std::size_t nt = data.n_treated();
  const std::size_t nc = data.n_control();
  std::vector<LinearTerm> terms;
  double offset = 0.0;
  if (estimand_of(kind) == EstimandKind::satt) {
    for (const auto& unit : data.treated()) offset += f(unit);
    offset = -offset / static_cast<double>(nt);
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t j = 0; j < nc; ++j) {
        const double c = vars.scale * f(data.control(j));
        if (c != 0.0) terms.push_back({model.require_column(vars.role, i, j), c});
      }
    }
  } else {
    for (std::size_t i = 0; i < nt; ++i) {
      const double ft = f(data.treated(i));
      for (std::size_t j = 0; j < nc; ++j) {
        const double c = vars.scale * (ft - f(data.control(j)));
        if (c != 0.0) terms.push_back({model.require_column(vars.role, i, j), c});
      }
    }
  }
  add_abs_rows(model, name, std::move(terms), offset, bound, family);
}

}  // namespace

void attach_constraints(MipModel& model, const Dataset& data, const QualitySpec& spec,
                        FormulationKind kind, const ConstraintContext& ctx) {
  validate_spec(data, spec, kind, ctx);
  const std::size_t nt = data.n_treated();
  const std::size_t nc = data.n_control();
  const PairVariables vars = pair_variables(kind, data, spec);
  const auto& names = data.covariate_names();

  if (spec.distance_budget) {
    const auto& d = *ctx.distances;
    Constraint row{"distance_budget", {}, Comparator::less_equal, *spec.distance_budget,
                   ConstraintFamily::distance};
    if (kind == FormulationKind::f5) {
      for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j < nc; ++j) {
          if (d(i, j) != 0.0) row.terms.push_back({model.require_column(VarRole::u, i, j), d(i, j)});
        }
      }
      row.terms.push_back({model.require_column(VarRole::z), -*spec.distance_budget});
      row.rhs = 0.0;
    } else {
      for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j < nc; ++j) {
          if (d(i, j) != 0.0) row.terms.push_back({model.require_column(VarRole::w, i, j), d(i, j)});
        }
      }
    }
    model.add_constraint(std::move(row));
  }

  if (spec.caliper) {
    const auto mask = caliper_mask(*ctx.distances, *spec.caliper);
    const VarRole role = kind == FormulationKind::f3   ? VarRole::v
                         : kind == FormulationKind::f5 ? VarRole::u
                                                       : VarRole::w;
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t j = 0; j < nc; ++j) {
        if (mask[i * nc + j] != 0) continue;
        model.add_constraint({"caliper_" + std::to_string(i) + "_" + std::to_string(j),
                              {{model.require_column(role, i, j), 1.0}},
                              Comparator::less_equal, 0.0, ConstraintFamily::caliper});
      }
    }
  }

  for (const auto& t : spec.moment_targets) {
    const std::size_t p = t.covariate;
    const int k = t.order;
    add_balance_rows(model, data, kind, vars,
                     "moment_" + names[p] + "_k" + std::to_string(k), t.bound,
                     ConstraintFamily::moment,
                     [p, k](const Unit& u) { return std::pow(u.covariates[p], k); });
  }

  if (spec.balance_cap) {
    for (std::size_t p = 0; p < data.n_covariates(); ++p) {
      add_balance_rows(model, data, kind, vars, "balance_" + names[p], *spec.balance_cap,
                       ConstraintFamily::balance, [p](const Unit& u) { return u.covariates[p]; });
    }
  }

  for (const auto& t : spec.quantile_targets) {
    const std::size_t p = t.covariate;
    const bool satt = estimand_of(kind) == EstimandKind::satt;
    const double threshold = satt ? ctx.grid->treated_values[p][t.quantile_index]
                                  : ctx.grid->pooled_values[p][t.quantile_index];
    add_balance_rows(model, data, kind, vars,
                     "quantile_" + names[p] + "_q" + std::to_string(t.quantile_index), t.bound,
                     ConstraintFamily::quantile,
                     [p, threshold](const Unit& u) { return u.covariates[p] <= threshold ? 1.0 : 0.0; });
  }

  if (!spec.exact_on.empty()) {
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t j = 0; j < nc; ++j) {
        const bool same = std::all_of(spec.exact_on.begin(), spec.exact_on.end(), [&](std::size_t p) {
          return exactly_equal(data.treated(i).covariates[p], data.control(j).covariates[p]);
        });
        if (same) continue;
        model.add_constraint({"exact_" + std::to_string(i) + "_" + std::to_string(j),
                              {{model.require_column(VarRole::w, i, j), 1.0}},
                              Comparator::less_equal, 0.0, ConstraintFamily::exact});
      }
    }
  }
}

MipModel build_model(FormulationKind kind, const Dataset& data, const QualitySpec& spec,
                     Sense sense, const ConstraintContext& ctx) {
  validate_spec(data, spec, kind, ctx);
  MipModel model = [&] {
    switch (kind) {
      case FormulationKind::f1: return build_f1(data, spec, sense);
      case FormulationKind::f3: return build_f3(data, spec, sense);
      case FormulationKind::f4: return build_f4(data, spec, sense);
      case FormulationKind::f5: return build_f5(data, spec, sense);
    }
    throw ConfigurationError("unknown formulation");
  }();
  attach_constraints(model, data, spec, kind, ctx);
  return model;
}

DecodedAssignment decode_assignment(const MipModel& model, const std::vector<double>& values,
                                    std::size_t n_treated, std::size_t n_control) {
  if (values.size() != model.n_variables()) throw ModelError("solution length does not match the model");
  std::vector<MatchedPair> pairs;
  double worst = 0.0;
  const auto z = model.column(VarRole::z);
  for (std::size_t i = 0; i < n_treated; ++i) {
    const auto zi = model.column(VarRole::z_i, i, 0);
    for (std::size_t j = 0; j < n_control; ++j) {
      const double w = values[model.require_column(VarRole::w, i, j)] > 0.5 ? 1.0 : 0.0;
      if (w == 1.0) pairs.push_back({i, j});
      if (const auto v = model.column(VarRole::v, i, j); v && zi) {
        worst = std::max(worst, std::abs(values[*v] - w * values[*zi]));
      }
      if (const auto u = model.column(VarRole::u, i, j); u && z) {
        worst = std::max(worst, std::abs(values[*u] - w * values[*z]));
      }
    }
  }
  return {MatchAssignment(n_treated, n_control, std::move(pairs)), worst};
}

namespace {

void push_upper(std::vector<SpecCheck>& out, std::string label, ConstraintFamily family,
                double measured, double bound) {
  out.push_back({std::move(label), family, measured, bound, bound - measured});
}

void push_equal(std::vector<SpecCheck>& out, std::string label, double measured, double target) {
  out.push_back({std::move(label), ConstraintFamily::structure, measured, target,
                 -std::abs(measured - target)});
}

}  // namespace

std::vector<SpecCheck> check_assignment(const Dataset& data, const MatchAssignment& w,
                                        const QualitySpec& spec, FormulationKind kind,
                                        const ConstraintContext& ctx) {
  std::vector<SpecCheck> out;
  const auto tcount = w.treated_match_counts();
  const auto ccount = w.control_use_counts();
  const double cap = static_cast<double>(spec.max_control_reuse);
  const EstimandKind estimand = estimand_of(kind);

  // Structural limits.
  for (std::size_t i = 0; i < tcount.size(); ++i) {
    const double n = static_cast<double>(tcount[i]);
    const std::string label = "treated[" + data.treated(i).id + "]";
    if (kind == FormulationKind::f1) {
      push_equal(out, label + " matches", n, 1.0);
    } else if (kind == FormulationKind::f3) {
      out.push_back({label + " matches", ConstraintFamily::structure, n, 1.0, n - 1.0});
    } else {
      push_upper(out, label + " matches", ConstraintFamily::structure, n, 1.0);
    }
  }
  if (kind == FormulationKind::f3 && spec.reuse_form == ReuseForm::aggregate) {
    double zsum = 0.0;
    for (std::size_t n : tcount) zsum += n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
    std::vector<double> vsum(ccount.size(), 0.0);
    for (const auto& pair : w.pairs()) vsum[pair.control] += 1.0 / static_cast<double>(tcount[pair.treated]);
    for (std::size_t j = 0; j < ccount.size(); ++j) {
      push_upper(out, "control[" + data.control(j).id + "] normalized reuse", ConstraintFamily::structure,
                 vsum[j], cap * zsum);
    }
  } else {
    for (std::size_t j = 0; j < ccount.size(); ++j) {
      push_upper(out, "control[" + data.control(j).id + "] reuse", ConstraintFamily::structure,
                 static_cast<double>(ccount[j]), cap);
    }
  }
  if (kind == FormulationKind::f4 && spec.match_count) {
    push_equal(out, "total matches", static_cast<double>(w.size()), static_cast<double>(*spec.match_count));
  }
  if (kind == FormulationKind::f5) {
    out.push_back({"total matches", ConstraintFamily::structure, static_cast<double>(w.size()), 1.0,
                   static_cast<double>(w.size()) - 1.0});
  }
  const bool measurable = estimand == EstimandKind::satt
                              ? std::all_of(tcount.begin(), tcount.end(), [](std::size_t n) { return n > 0; })
                              : !w.empty();
  if (!measurable) return out;

  const auto& names = data.covariate_names();
  if (spec.distance_budget && ctx.distances) {
    push_upper(out, "distance", ConstraintFamily::distance, aggregate_distance(w, *ctx.distances),
               *spec.distance_budget);
  }
  if (spec.caliper && ctx.distances) {
    double worst = 0.0;
    for (const auto& pair : w.pairs()) worst = std::max(worst, (*ctx.distances)(pair.treated, pair.control));
    push_upper(out, "caliper", ConstraintFamily::caliper, worst, *spec.caliper);
  }
  for (const auto& t : spec.moment_targets) {
    push_upper(out, "moment[" + names[t.covariate] + ",k=" + std::to_string(t.order) + "]",
               ConstraintFamily::moment, moment_gap(data, w, t.covariate, t.order, estimand), t.bound);
  }
  if (spec.balance_cap) {
    for (std::size_t p = 0; p < data.n_covariates(); ++p) {
      push_upper(out, "balance[" + names[p] + "]", ConstraintFamily::balance,
                 moment_gap(data, w, p, 1, estimand), *spec.balance_cap);
    }
  }
  for (const auto& t : spec.quantile_targets) {
    if (!ctx.grid) break;
    const auto gaps = quantile_gap(data, w, *ctx.grid, t.covariate, estimand);
    push_upper(out, "quantile[" + names[t.covariate] + ",h=" +
                        format_double(ctx.grid->proportions[t.quantile_index]) + "]",
               ConstraintFamily::quantile, gaps[t.quantile_index], t.bound);
  }
  if (!spec.exact_on.empty()) {
    double mismatched = 0.0;
    for (const auto& pair : w.pairs()) {
      for (std::size_t p : spec.exact_on) {
        if (!exactly_equal(data.treated(pair.treated).covariates[p], data.control(pair.control).covariates[p])) {
          mismatched += 1.0;
          break;
        }
      }
    }
    push_upper(out, "exact mismatches", ConstraintFamily::exact, mismatched, 0.0);
  }
  return out;
}

bool satisfies(const std::vector<SpecCheck>& checks, double tolerance) {
  return std::all_of(checks.begin(), checks.end(), [tolerance](const SpecCheck& c) {
    return c.slack >= -tolerance * (1.0 + std::abs(c.bound));
  });
}

}  // namespace matchbound
