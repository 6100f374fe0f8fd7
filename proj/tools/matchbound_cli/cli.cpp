#include "matchbound_cli/cli.hpp"

#include <CLI11/CLI11.hpp>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>
#include <sstream>

#include "matchbound/balance.hpp"
#include "matchbound/diagnostics.hpp"
#include "matchbound/errors.hpp"
#include "matchbound/format.hpp"
#include "matchbound/formulations.hpp"

namespace matchbound::cli {

using nlohmann::ordered_json;

const char* to_string(Command command) {
  switch (command) {
    case Command::bounds: return "bounds";
    case Command::sweep: return "sweep";
    case Command::profile: return "profile";
    case Command::compare: return "compare";
    case Command::simulate: return "simulate";
  }
  return "unknown";
}

namespace {

const std::vector<double> kDefaultSweep{0.0, 0.2, 0.4, 0.6, 0.9, 1.0};
constexpr double kDefaultEpsilon = 0.05;

// ---------------------------------------------------------------- inputs

std::vector<std::string> header_columns(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(file, line);
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cols;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
    cols.push_back(cell);
  }
  return cols;
}

CsvSchema schema_for(const RunConfig& cfg) {
  CsvSchema schema;
  schema.outcome = cfg.outcome_col;
  schema.treatment = cfg.treat_col;
  schema.score = cfg.score_col;
  schema.group = cfg.group_col;
  schema.id = cfg.id_col;
  schema.covariates = cfg.covariates;
  if (!schema.id || schema.covariates.empty()) {
    const auto cols = header_columns(cfg.input);
    const bool has_id = std::find(cols.begin(), cols.end(), "id") != cols.end();
    if (!schema.id && has_id) schema.id = "id";
    if (schema.covariates.empty()) {
      for (const auto& c : cols) {
        if (c == schema.outcome || c == schema.treatment || (schema.id && c == *schema.id) ||
            (schema.score && c == *schema.score) || (schema.group && c == *schema.group)) {
          continue;
        }
        schema.covariates.push_back(c);
      }
    }
  }
  return schema;
}

DistanceMatrix make_distances(const std::string& metric, const Dataset& data) {
  if (metric == "mahalanobis") return mahalanobis_distances(data);
  if (metric == "euclidean") return euclidean_distances(data);
  if (metric == "score") return score_distances(data);
  throw ConfigurationError("unknown distance '" + metric + "' (expected mahalanobis, euclidean or score)");
}

SolveOptions solve_options(const RunConfig& cfg) {
  SolveOptions opts;
  if (cfg.mode == "exact") {
    opts.mode = SolveMode::exact;
  } else if (cfg.mode == "relax-round") {
    opts.mode = SolveMode::relax_and_round;
  } else {
    throw ConfigurationError("unknown mode '" + cfg.mode + "' (expected exact or relax-round)");
  }
  opts.time_limit_seconds = cfg.time_limit;
  if (cfg.node_limit == 0) throw ConfigurationError("node limit must be positive");
  opts.node_limit = cfg.node_limit;
  opts.seed = cfg.seed;
  return opts;
}

ReuseForm reuse_form_of(const std::string& text) {
  if (text == "per-control") return ReuseForm::per_control;
  if (text == "aggregate") return ReuseForm::aggregate;
  throw ConfigurationError("unknown reuse form '" + text + "' (expected per-control or aggregate)");
}

/// Loaded inputs shared by every analysis command.
struct Workspace {
  std::unique_ptr<Dataset> data;
  std::unique_ptr<DistanceMatrix> distances;
  std::unique_ptr<QuantileGrid> grid;
  FormulationKind kind = FormulationKind::f1;
  Baseline baseline;

  ConstraintContext context() const { return {distances.get(), grid.get()}; }
};

Baseline make_baseline(const RunConfig& cfg, const Workspace& ws) {
  const Dataset& data = *ws.data;
  const EstimandKind estimand = estimand_of(ws.kind);
  const bool replace = data.n_control() < data.n_treated();
  if (cfg.baseline_runs == 0) throw ConfigurationError("baseline runs must be >= 1");

  Baseline b;
  std::vector<QualityProfile> profiles;
  double estimate_sum = 0.0;
  for (std::size_t r = 0; r < cfg.baseline_runs; ++r) {
    auto w = cfg.baseline_runs == 1 ? greedy_nn_match(data, *ws.distances, replace)
                                    : randomized_greedy_match(data, *ws.distances, replace, cfg.seed + r);
    profiles.push_back(profile_assignment(data, w, ws.distances.get(), ws.grid.get(), cfg.moments, estimand));
    estimate_sum += estimate(data, w, estimand).estimate;
    if (r == 0) b.assignment = std::move(w);
  }
  b.method = cfg.baseline_runs == 1 ? "greedy-nn" : "greedy-nn-randomized-x" + std::to_string(cfg.baseline_runs);
  b.estimate = estimate_sum / static_cast<double>(cfg.baseline_runs);
  b.profile = profiles.size() == 1 ? profiles.front() : average_profiles(profiles);

  QualitySpec& s = b.structure;
  s.max_control_reuse = cfg.kc ? *cfg.kc : std::max<std::size_t>(1, b.assignment->max_control_use());
  if (estimand == EstimandKind::ssatt) s.match_count = cfg.matches ? *cfg.matches : b.assignment->size();
  if (cfg.matches && estimand == EstimandKind::satt && ws.kind == FormulationKind::f1 &&
      *cfg.matches != data.n_treated()) {
    throw ConfigurationError("--matches applies to f4; f1 always matches every treated unit once");
  }
  s.caliper = cfg.caliper;
  for (const auto& name : cfg.exact_on) s.exact_on.push_back(data.covariate_index(name));
  s.reuse_form = reuse_form_of(cfg.reuse_form);
  return b;
}

Workspace load_workspace(const RunConfig& cfg) {
  if (cfg.input.empty()) throw ConfigurationError("--input is required for " + std::string(to_string(cfg.command)));
  Workspace ws;
  ws.kind = parse_formulation(cfg.formulation);
  ws.data = std::make_unique<Dataset>(load_dataset(cfg.input, schema_for(cfg)));
  ws.distances = std::make_unique<DistanceMatrix>(make_distances(cfg.distance, *ws.data));
  if (!cfg.quantiles.empty()) ws.grid = std::make_unique<QuantileGrid>(make_quantile_grid(*ws.data, cfg.quantiles));
  for (int k : cfg.moments) {
    if (k < 1) throw ConfigurationError("moment orders must be >= 1");
  }
  ws.baseline = make_baseline(cfg, ws);
  return ws;
}

// ---------------------------------------------------------------- outputs

bool wants(const RunConfig& cfg, const std::string& format) {
  return std::find(cfg.formats.begin(), cfg.formats.end(), format) != cfg.formats.end();
}

void write_text(const std::filesystem::path& path, const std::string& text, std::ostream& out) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write " + path.string());
  file << text;
  if (!file) throw IoError("failed writing " + path.string());
  out << "wrote " << path.string() << '\n';
}

ordered_json number_or_null(std::optional<double> v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::string cell(std::optional<double> v) { return v ? format_double(*v) : std::string(); }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

ordered_json pairs_json(const Dataset& data, const MatchAssignment& w) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : w.pairs()) arr.push_back({data.treated(p.treated).id, data.control(p.control).id});
  return arr;
}

ordered_json spec_json(const QualitySpec& spec, const Dataset& data, const QuantileGrid* grid) {
  const auto& names = data.covariate_names();
  ordered_json j;
  j["max_control_reuse"] = spec.max_control_reuse;
  j["match_count"] = spec.match_count ? ordered_json(*spec.match_count) : ordered_json(nullptr);
  j["tolerance_multiplier"] = spec.tolerance_multiplier;
  j["distance_budget"] = number_or_null(spec.distance_budget);
  j["caliper"] = number_or_null(spec.caliper);
  j["balance_cap"] = number_or_null(spec.balance_cap);
  j["reuse_form"] = spec.reuse_form == ReuseForm::per_control ? "per-control" : "aggregate";
  auto& moments = j["moment_targets"] = ordered_json::array();
  for (const auto& t : spec.moment_targets) {
    moments.push_back({{"covariate", names[t.covariate]}, {"order", t.order}, {"bound", t.bound}});
  }
  auto& quantiles = j["quantile_targets"] = ordered_json::array();
  for (const auto& t : spec.quantile_targets) {
    ordered_json q{{"covariate", names[t.covariate]}};
    q["proportion"] = grid ? ordered_json(grid->proportions[t.quantile_index]) : ordered_json(nullptr);
    q["bound"] = t.bound;
    quantiles.push_back(q);
  }
  auto& exact = j["exact_on"] = ordered_json::array();
  for (std::size_t p : spec.exact_on) exact.push_back(names[p]);
  return j;
}

ordered_json side_json(const BoundSide& side, const Dataset& data) {
  ordered_json j;
  j["status"] = to_string(side.solution.status);
  j["estimate"] = side.estimate ? ordered_json(side.estimate->estimate) : ordered_json(nullptr);
  j["n_matches"] = side.estimate ? ordered_json(side.estimate->n_matches) : ordered_json(nullptr);
  if (side.interval) {
    j["ci95"] = {{"lower", side.interval->lower}, {"upper", side.interval->upper}, {"method", side.interval->method}};
  } else {
    j["ci95"] = nullptr;
  }
  j["solver_objective"] = side.solution.values.empty() ? ordered_json(nullptr) : ordered_json(side.solution.objective);
  j["best_bound"] = side.solution.values.empty() && side.solution.status != SolveStatus::limit_reached
                        ? ordered_json(nullptr)
                        : ordered_json(side.solution.best_bound);
  j["nodes_explored"] = side.solution.nodes_explored;
  j["quality_ok"] = side.quality_ok;
  j["carried_forward"] = side.carried_forward;
  j["max_normalization_error"] = side.max_normalization_error;
  auto& checks = j["quality_check"] = ordered_json::array();
  for (const auto& c : side.quality_check) {
    checks.push_back({{"label", c.label},
                      {"family", to_string(c.family)},
                      {"measured", c.measured},
                      {"bound", c.bound},
                      {"slack", c.slack}});
  }
  auto& violations = j["constraint_violations"] = ordered_json::array();
  for (const auto& v : side.solution.constraint_violations) {
    violations.push_back({{"row", v.name},
                          {"family", to_string(v.family)},
                          {"lhs", v.lhs},
                          {"rhs", v.rhs},
                          {"amount", v.amount}});
  }
  j["pairs"] = side.assignment ? pairs_json(data, *side.assignment) : ordered_json::array();
  return j;
}

ordered_json profile_json(const QualityProfile& profile, const Dataset& data, const QuantileGrid* grid) {
  const auto& names = data.covariate_names();
  ordered_json j;
  j["estimand"] = to_string(profile.estimand_kind);
  auto& moments = j["moment_gaps"] = ordered_json::array();
  for (const auto& g : profile.moment_gaps) {
    moments.push_back({{"covariate", names[g.covariate]}, {"order", g.order}, {"gap", g.gap}});
  }
  auto& quantiles = j["quantile_gaps"] = ordered_json::array();
  for (const auto& g : profile.quantile_gaps) {
    ordered_json q{{"covariate", names[g.covariate]}};
    q["proportion"] = grid ? ordered_json(grid->proportions[g.quantile_index]) : ordered_json(nullptr);
    q["gap"] = g.gap;
    quantiles.push_back(q);
  }
  j["total_distance"] = number_or_null(profile.total_distance);
  j["max_pair_distance"] = number_or_null(profile.max_pair_distance);
  return j;
}

ordered_json baseline_json(const Workspace& ws) {
  ordered_json j;
  j["method"] = ws.baseline.method;
  j["estimate"] = ws.baseline.estimate;
  j["profile"] = profile_json(ws.baseline.profile, *ws.data, ws.grid.get());
  j["pairs"] = ws.baseline.assignment ? pairs_json(*ws.data, *ws.baseline.assignment) : ordered_json::array();
  return j;
}

ordered_json bounds_json(const BoundsResult& r, const Workspace& ws) {
  ordered_json j;
  j["formulation"] = to_string(r.formulation);
  j["estimand"] = to_string(estimand_of(r.formulation));
  j["feasible"] = r.feasible();
  j["width"] = r.feasible() ? ordered_json(r.width()) : ordered_json(nullptr);
  j["upper"] = side_json(r.upper, *ws.data);
  j["lower"] = side_json(r.lower, *ws.data);
  j["spec"] = spec_json(r.spec_used, *ws.data, ws.grid.get());
  if (r.infeasibility) {
    j["infeasibility"] = {{"binding_family", r.infeasibility->binding_family
                                                 ? ordered_json(to_string(*r.infeasibility->binding_family))
                                                 : ordered_json(nullptr)},
                          {"note", r.infeasibility->note}};
  } else {
    j["infeasibility"] = nullptr;
  }
  return j;
}

ordered_json run_header(const RunConfig& cfg, const Workspace& ws) {
  ordered_json j;
  j["command"] = to_string(cfg.command);
  j["formulation"] = to_string(ws.kind);
  j["mode"] = cfg.mode;
  j["distance"] = cfg.distance;
  j["seed"] = cfg.seed;
  j["n_treated"] = ws.data->n_treated();
  j["n_control"] = ws.data->n_control();
  j["covariates"] = ws.data->covariate_names();
  return j;
}

const char* kBoundsCsvHeader =
    "epsilon,bound,status,estimate,ci95_lower,ci95_upper,n_matches,solver_objective,best_bound,nodes,quality_ok,"
    "carried_forward\n";

std::string bounds_csv_row(double eps, const char* which, const BoundSide& side) {
  std::ostringstream row;
  row << format_double(eps) << ',' << which << ',' << to_string(side.solution.status) << ','
      << cell(side.estimate ? std::optional(side.estimate->estimate) : std::nullopt) << ','
      << cell(side.interval ? std::optional(side.interval->lower) : std::nullopt) << ','
      << cell(side.interval ? std::optional(side.interval->upper) : std::nullopt) << ','
      << (side.estimate ? std::to_string(side.estimate->n_matches) : std::string()) << ','
      << cell(side.solution.values.empty() ? std::nullopt : std::optional(side.solution.objective)) << ','
      << cell(side.solution.values.empty() ? std::nullopt : std::optional(side.solution.best_bound)) << ','
      << side.solution.nodes_explored << ',' << (side.quality_ok ? 1 : 0) << ',' << (side.carried_forward ? 1 : 0)
      << '\n';
  return row.str();
}

// ---------------------------------------------------------------- commands

BoundsOptions bounds_options(const RunConfig& cfg, std::ostream* trace) {
  BoundsOptions opts;
  opts.solver = solve_options(cfg);
  opts.solver.trace = trace;
  if (trace != nullptr) opts.threads = 1;
  return opts;
}

struct TraceSink {
  std::unique_ptr<std::ofstream> file;
  std::ostream* stream() { return file ? file.get() : nullptr; }
};

TraceSink open_trace(const RunConfig& cfg) {
  TraceSink sink;
  if (cfg.trace) {
    sink.file = std::make_unique<std::ofstream>(cfg.out / "trace.log", std::ios::binary);
    if (!*sink.file) throw IoError("cannot write trace.log");
  }
  return sink;
}

double single_epsilon(const RunConfig& cfg) {
  if (cfg.eps.size() > 1) throw ConfigurationError("this command takes one --eps value; use sweep for a grid");
  return cfg.eps.empty() ? kDefaultEpsilon : cfg.eps.front();
}

void write_models(const RunConfig& cfg, const Workspace& ws, const QualitySpec& spec, std::ostream& out) {
  if (!cfg.write_lp) return;
  const auto ctx = ws.context();
  write_text(cfg.out / "model_upper.lp", build_model(ws.kind, *ws.data, spec, Sense::maximize, ctx).to_lp_text(), out);
  write_text(cfg.out / "model_lower.lp", build_model(ws.kind, *ws.data, spec, Sense::minimize, ctx).to_lp_text(), out);
}

int cmd_bounds(const RunConfig& cfg, std::ostream& out) {
  const Workspace ws = load_workspace(cfg);
  const double eps = single_epsilon(cfg);
  const auto spec = spec_from_profile(ws.baseline.profile, eps, ws.baseline.structure);
  write_models(cfg, ws, spec, out);
  auto trace = open_trace(cfg);
  const auto result = matching_bounds(*ws.data, spec, ws.kind, ws.context(), bounds_options(cfg, trace.stream()));

  if (wants(cfg, "json")) {
    ordered_json j = run_header(cfg, ws);
    j["epsilon"] = eps;
    j["baseline"] = baseline_json(ws);
    j["bounds"] = bounds_json(result, ws);
    write_text(cfg.out / "bounds.json", j.dump(2) + "\n", out);
  }
  if (wants(cfg, "csv")) {
    write_text(cfg.out / "bounds.csv",
               std::string(kBoundsCsvHeader) + bounds_csv_row(eps, "upper", result.upper) +
                   bounds_csv_row(eps, "lower", result.lower),
               out);
  }
  if (!result.feasible()) {
    out << "infeasible: " << (result.infeasibility ? result.infeasibility->note : std::string("no assignment"))
        << '\n';
    return kExitInfeasible;
  }
  out << "upper " << format_double(result.upper.estimate->estimate) << " lower "
      << format_double(result.lower.estimate->estimate) << '\n';
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  const Workspace ws = load_workspace(cfg);
  const auto& eps = cfg.eps.empty() ? kDefaultSweep : cfg.eps;
  auto trace = open_trace(cfg);
  const auto sweep = epsilon_sweep(*ws.data, ws.baseline, eps, ws.kind, ws.context(), bounds_options(cfg, trace.stream()));

  if (wants(cfg, "json")) {
    ordered_json j = run_header(cfg, ws);
    j["baseline"] = baseline_json(ws);
    j["nested"] = sweep.nested;
    auto& points = j["points"] = ordered_json::array();
    for (const auto& p : sweep.points) points.push_back({{"epsilon", p.epsilon}, {"bounds", bounds_json(p.bounds, ws)}});
    write_text(cfg.out / "sweep.json", j.dump(2) + "\n", out);
  }
  if (wants(cfg, "csv")) {
    std::string text = kBoundsCsvHeader;
    for (const auto& p : sweep.points) text += bounds_csv_row(p.epsilon, "upper", p.bounds.upper);
    for (const auto& p : sweep.points) text += bounds_csv_row(p.epsilon, "lower", p.bounds.lower);
    write_text(cfg.out / "sweep.csv", text, out);
  }
  if (wants(cfg, "svg")) write_text(cfg.out / "sweep.svg", render_sweep_svg(sweep), out);

  const bool any = std::any_of(sweep.points.begin(), sweep.points.end(),
                               [](const SweepPoint& p) { return p.bounds.feasible(); });
  for (const auto& p : sweep.points) {
    out << "eps " << format_double(p.epsilon) << ": ";
    if (p.bounds.feasible()) {
      out << "[" << format_double(p.bounds.lower.estimate->estimate) << ", "
          << format_double(p.bounds.upper.estimate->estimate) << "]\n";
    } else {
      out << "infeasible\n";
    }
  }
  return any ? kExitOk : kExitInfeasible;
}

int cmd_profile(const RunConfig& cfg, std::ostream& out) {
  const Workspace ws = load_workspace(cfg);
  const auto spec = spec_from_profile(ws.baseline.profile, single_epsilon(cfg), ws.baseline.structure);
  if (wants(cfg, "json")) {
    ordered_json j = run_header(cfg, ws);
    j["baseline"] = baseline_json(ws);
    j["spec"] = spec_json(spec, *ws.data, ws.grid.get());
    write_text(cfg.out / "profile.json", j.dump(2) + "\n", out);
  }
  if (wants(cfg, "csv")) {
    const auto& names = ws.data->covariate_names();
    std::string text = "statistic,covariate,parameter,value\n";
    for (const auto& g : ws.baseline.profile.moment_gaps) {
      text += "moment," + csv_quote(names[g.covariate]) + "," + std::to_string(g.order) + "," + format_double(g.gap) + "\n";
    }
    for (const auto& g : ws.baseline.profile.quantile_gaps) {
      text += "quantile," + csv_quote(names[g.covariate]) + "," +
              format_double(ws.grid->proportions[g.quantile_index]) + "," + format_double(g.gap) + "\n";
    }
    if (ws.baseline.profile.total_distance) {
      text += "total_distance,,," + format_double(*ws.baseline.profile.total_distance) + "\n";
    }
    write_text(cfg.out / "profile.csv", text, out);
  }
  out << "baseline " << ws.baseline.method << " estimate " << format_double(ws.baseline.estimate) << '\n';
  return kExitOk;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out) {
  const Workspace ws = load_workspace(cfg);
  const double eps = single_epsilon(cfg);
  const auto spec = spec_from_profile(ws.baseline.profile, eps, ws.baseline.structure);
  const auto result = matching_bounds(*ws.data, spec, ws.kind, ws.context(), bounds_options(cfg, nullptr));
  if (!result.feasible()) {
    out << "infeasible: " << (result.infeasibility ? result.infeasibility->note : std::string("no assignment"))
        << '\n';
    return kExitInfeasible;
  }
  const auto diff = compare_assignments(*ws.data, *result.lower.assignment, *result.upper.assignment);
  if (wants(cfg, "csv")) {
    std::string text = "key,arm,lower_rows,upper_rows,lower_outcome_sum,upper_outcome_sum\n";
    for (const auto& r : diff.rows) {
      text += csv_quote(r.key) + "," + (r.treated ? "treated" : "control") + "," + std::to_string(r.lower_rows) + "," +
              std::to_string(r.upper_rows) + "," + format_double(r.lower_outcome_sum) + "," +
              format_double(r.upper_outcome_sum) + "\n";
    }
    write_text(cfg.out / "diff.csv", text, out);
  }
  if (wants(cfg, "json")) {
    ordered_json j = run_header(cfg, ws);
    j["epsilon"] = eps;
    j["lower_estimate"] = result.lower.estimate->estimate;
    j["upper_estimate"] = result.upper.estimate->estimate;
    j["shared_pairs"] = diff.shared_pairs;
    j["lower_only"] = diff.lower_only;
    j["upper_only"] = diff.upper_only;
    j["differing_controls"] = diff.differing_controls;
    write_text(cfg.out / "diff.json", j.dump(2) + "\n", out);
  }
  out << "shared " << diff.shared_pairs << " differing " << diff.differing_controls << '\n';
  return kExitOk;
}

SyntheticModel synthetic_model(const RunConfig& cfg) {
  if (cfg.n_covariates == 0) throw ConfigurationError("--n-covariates must be >= 1");
  SyntheticModel m;
  m.beta_observed.clear();
  for (std::size_t p = 0; p < cfg.n_covariates; ++p) m.beta_observed.push_back(p % 2 == 0 ? 1.0 : -0.5);
  m.beta_unobserved = {cfg.hidden_effect};
  m.treatment_effect = cfg.effect;
  m.noise_sd = cfg.noise_sd;
  m.nonlinearity = cfg.nonlinearity;
  m.propensity_observed.assign(cfg.n_covariates, 0.5);
  m.propensity_unobserved = {cfg.confounding};
  return m;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const auto model = synthetic_model(cfg);
  const auto draw = generate(model, cfg.n_treated, cfg.n_control, cfg.seed);
  write_text(cfg.out / "simulated.csv", dataset_to_csv(draw.data), out);
  std::string hidden = "id,treat";
  for (std::size_t q = 0; q < model.n_unobserved(); ++q) hidden += ",u" + std::to_string(q + 1);
  hidden += ",noise,higher_order\n";
  auto add = [&](const HiddenUnit& h, bool treated) {
    hidden += csv_quote(h.id) + (treated ? ",1" : ",0");
    for (double u : h.unobserved) hidden += "," + format_double(u);
    hidden += "," + format_double(h.noise) + "," + format_double(h.higher_order) + "\n";
  };
  for (const auto& h : draw.ledger.treated) add(h, true);
  for (const auto& h : draw.ledger.control) add(h, false);
  write_text(cfg.out / "hidden.csv", hidden, out);
  return kExitOk;
}

void emit_error(std::ostream& err, bool json, const std::string& kind, const std::string& message) {
  if (json) {
    err << ordered_json{{"error", kind}, {"message", message}}.dump() << '\n';
  } else {
    err << "error (" << kind << "): " << message << '\n';
  }
}

}  // namespace

int execute(const RunConfig& cfg, std::ostream& out) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec || !std::filesystem::is_directory(cfg.out)) throw IoError("cannot create output directory " + cfg.out.string());
  for (const auto& f : cfg.formats) {
    if (f != "json" && f != "csv" && f != "svg") throw ConfigurationError("unknown format '" + f + "'");
  }
  switch (cfg.command) {
    case Command::bounds: return cmd_bounds(cfg, out);
    case Command::sweep: return cmd_sweep(cfg, out);
    case Command::profile: return cmd_profile(cfg, out);
    case Command::compare: return cmd_compare(cfg, out);
    case Command::simulate: return cmd_simulate(cfg, out);
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  for (int k = 1; k < argc; ++k) {
    if (std::string(argv[k]) == "--json-errors") cfg.json_errors = true;
  }

  CLI::App app{"matchbound: bounds on matching estimators under match-quality constraints"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "matchbound 0.1.0");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
    sub->add_option("--formats", cfg.formats, "Artifacts to write: json,csv,svg")->delimiter(',')->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    sub->add_flag("--json-errors", cfg.json_errors, "Report errors as JSON on stderr");
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--input", cfg.input, "Input CSV")->required();
    sub->add_option("--outcome-col", cfg.outcome_col, "Outcome column")->capture_default_str();
    sub->add_option("--treat-col", cfg.treat_col, "Treatment column (0/1)")->capture_default_str();
    sub->add_option("--covariates", cfg.covariates, "Covariate columns (default: all other columns)")->delimiter(',');
    sub->add_option("--id-col", cfg.id_col, "Unit id column (default: 'id' when present)");
    sub->add_option("--score-col", cfg.score_col, "Precomputed score column");
    sub->add_option("--group-col", cfg.group_col, "Grouping column for assignment diffs");
    sub->add_option("--formulation", cfg.formulation, "f1, f3, f4 or f5 (f2 resolves to f3)")->capture_default_str();
    sub->add_option("--kc", cfg.kc, "Max uses per control (default: baseline's max)");
    sub->add_option("--matches", cfg.matches, "Number of matched pairs M (f4)");
    sub->add_option("--eps", cfg.eps, "Tolerance multiplier(s)")->delimiter(',');
    sub->add_option("--moments", cfg.moments, "Moment orders to balance")->delimiter(',')->capture_default_str();
    sub->add_option("--quantiles", cfg.quantiles, "Quantile proportions to balance")->delimiter(',');
    sub->add_option("--caliper", cfg.caliper, "Caliper radius on the distance");
    sub->add_option("--exact-on", cfg.exact_on, "Covariates to match exactly")->delimiter(',');
    sub->add_option("--distance", cfg.distance, "mahalanobis, euclidean or score")->capture_default_str();
    sub->add_option("--reuse-form", cfg.reuse_form, "f3 reuse row: per-control or aggregate")->capture_default_str();
    sub->add_option("--baseline-runs", cfg.baseline_runs, "Randomized baseline runs to average")->capture_default_str();
    sub->add_option("--mode", cfg.mode, "exact or relax-round")->capture_default_str();
    sub->add_option("--time-limit", cfg.time_limit, "Seconds per solve")->capture_default_str();
    sub->add_option("--node-limit", cfg.node_limit, "Branch-and-bound nodes per solve")->capture_default_str();
    sub->add_flag("--trace", cfg.trace, "Write one line per branch-and-bound node to trace.log");
  };

  auto* bounds = app.add_subcommand("bounds", "Upper and lower bounds at one tolerance");
  auto* sweep = app.add_subcommand("sweep", "Bounds over a tolerance grid");
  auto* profile = app.add_subcommand("profile", "Quality profile of the baseline match");
  auto* compare = app.add_subcommand("compare", "Diff of the lower- and upper-bound assignments");
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic dataset and its hidden ledger");
  for (auto* sub : {bounds, sweep, profile, compare}) {
    add_common(sub);
    add_data(sub);
  }
  bounds->add_flag("--write-lp", cfg.write_lp, "Also write model_upper.lp and model_lower.lp");
  add_common(simulate);
  simulate->add_option("--n-treated", cfg.n_treated)->capture_default_str();
  simulate->add_option("--n-control", cfg.n_control)->capture_default_str();
  simulate->add_option("--n-covariates", cfg.n_covariates)->capture_default_str();
  simulate->add_option("--effect", cfg.effect, "Treatment effect")->capture_default_str();
  simulate->add_option("--hidden-effect", cfg.hidden_effect, "Outcome weight on the unobserved covariate")
      ->capture_default_str();
  simulate->add_option("--confounding", cfg.confounding, "Treatment-rule weight on the unobserved covariate")
      ->capture_default_str();
  simulate->add_option("--noise-sd", cfg.noise_sd)->capture_default_str();
  simulate->add_option("--nonlinearity", cfg.nonlinearity, "Weight on the sum of squared covariates")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    emit_error(err, cfg.json_errors, "usage", e.what());
    return kExitUsage;
  }

  if (bounds->parsed()) cfg.command = Command::bounds;
  if (sweep->parsed()) cfg.command = Command::sweep;
  if (profile->parsed()) cfg.command = Command::profile;
  if (compare->parsed()) cfg.command = Command::compare;
  if (simulate->parsed()) cfg.command = Command::simulate;

  try {
    return execute(cfg, out);
  } catch (const Error& e) {
    emit_error(err, cfg.json_errors, e.kind(), e.what());
  } catch (const std::exception& e) {
    emit_error(err, cfg.json_errors, "internal", e.what());
  }
  return kExitUsage;
}

}  // namespace matchbound::cli
