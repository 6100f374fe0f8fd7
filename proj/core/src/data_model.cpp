#include "matchbound/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "matchbound/errors.hpp"
#include "matchbound/format.hpp"

namespace matchbound {

namespace {

// RFC 4180 style splitting: quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          current.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return std::string(text.substr(first, last - first + 1));
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  const std::string text = trim(cell);
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ParseError("row " + std::to_string(row) + ", column '" + column +
                     "': cannot parse '" + text + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw ParseError("row " + std::to_string(row) + ", column '" + column +
                     "': value is not finite");
  }
  return value;
}

std::string quote_if_needed(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Dataset::Dataset(std::vector<std::string> covariate_names, std::vector<Unit> units)
    : covariate_names_(std::move(covariate_names)) {
  const std::size_t p = covariate_names_.size();
  if (p == 0) throw ValidationError("dataset needs at least one covariate");
  std::size_t with_score = 0;
  for (auto& unit : units) {
    if (unit.covariates.size() != p) {
      throw ValidationError("unit '" + unit.id + "' has " + std::to_string(unit.covariates.size()) +
                            " covariates, expected " + std::to_string(p));
    }
    for (double x : unit.covariates) {
      if (!std::isfinite(x)) throw ValidationError("unit '" + unit.id + "' has a non-finite covariate");
    }
    if (!std::isfinite(unit.outcome)) throw ValidationError("unit '" + unit.id + "' has a non-finite outcome");
    if (unit.score) ++with_score;
    (unit.treated ? treated_ : control_).push_back(std::move(unit));
  }
  if (treated_.empty()) throw ValidationError("no treated units");
  if (control_.empty()) throw ValidationError("no control units");
  if (with_score != 0 && with_score != treated_.size() + control_.size()) {
    throw ValidationError("score column is only partially populated");
  }
  has_scores_ = with_score != 0;
}

std::size_t Dataset::covariate_index(const std::string& name) const {
  const auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
  if (it == covariate_names_.end()) throw SchemaError("unknown covariate '" + name + "'");
  return static_cast<std::size_t>(it - covariate_names_.begin());
}

double Dataset::mean_treated_outcome() const {
  double sum = 0.0;
  for (const auto& unit : treated_) sum += unit.outcome;
  return sum / static_cast<double>(treated_.size());
}

Dataset parse_dataset(const std::string& csv_text, const CsvSchema& schema) {
  if (schema.covariates.empty()) throw SchemaError("schema names no covariate columns");
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV has no header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM

  std::map<std::string, std::size_t> header;
  {
    const auto names = split_csv_line(line);
    for (std::size_t k = 0; k < names.size(); ++k) header.emplace(trim(names[k]), k);
  }
  const auto column = [&](const std::string& name) {
    const auto it = header.find(name);
    if (it == header.end()) throw SchemaError("missing column '" + name + "'");
    return it->second;
  };
  const std::size_t outcome_col = column(schema.outcome);
  const std::size_t treat_col = column(schema.treatment);
  std::vector<std::size_t> cov_cols;
  for (const auto& name : schema.covariates) cov_cols.push_back(column(name));
  const std::optional<std::size_t> id_col =
      schema.id ? std::optional(column(*schema.id)) : std::nullopt;
  const std::optional<std::size_t> score_col =
      schema.score ? std::optional(column(*schema.score)) : std::nullopt;
  const std::optional<std::size_t> group_col =
      schema.group ? std::optional(column(*schema.group)) : std::nullopt;

  std::vector<Unit> units;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    const auto cell = [&](std::size_t col, const std::string& name) -> const std::string& {
      if (col >= cells.size()) {
        throw ParseError("row " + std::to_string(row) + ", column '" + name + "': missing value");
      }
      return cells[col];
    };
    Unit unit;
    unit.id = id_col ? trim(cell(*id_col, *schema.id)) : std::to_string(row);
    unit.outcome = parse_number(cell(outcome_col, schema.outcome), row, schema.outcome);
    const double t = parse_number(cell(treat_col, schema.treatment), row, schema.treatment);
    if (t != 0.0 && t != 1.0) {
      throw ValidationError("row " + std::to_string(row) + ": treatment value " + format_double(t) +
                            " is not 0 or 1");
    }
    unit.treated = t == 1.0;
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      unit.covariates.push_back(parse_number(cell(cov_cols[k], schema.covariates[k]), row,
                                             schema.covariates[k]));
    }
    if (score_col) unit.score = parse_number(cell(*score_col, *schema.score), row, *schema.score);
    if (group_col) unit.group = trim(cell(*group_col, *schema.group));
    units.push_back(std::move(unit));
  }
  return Dataset(schema.covariates, std::move(units));
}

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), schema);
}

std::string dataset_to_csv(const Dataset& data) {
  std::ostringstream out;
  const bool with_group = std::any_of(data.treated().begin(), data.treated().end(),
                                      [](const Unit& u) { return !u.group.empty(); }) ||
                          std::any_of(data.control().begin(), data.control().end(),
                                      [](const Unit& u) { return !u.group.empty(); });
  out << "id,treat,outcome";
  for (const auto& name : data.covariate_names()) out << ',' << quote_if_needed(name);
  if (data.has_scores()) out << ",score";
  if (with_group) out << ",group";
  out << '\n';
  const auto emit = [&](const Unit& unit) {
    out << quote_if_needed(unit.id) << ',' << (unit.treated ? 1 : 0) << ','
        << format_double(unit.outcome);
    for (double x : unit.covariates) out << ',' << format_double(x);
    if (data.has_scores()) out << ',' << format_double(*unit.score);
    if (with_group) out << ',' << quote_if_needed(unit.group);
    out << '\n';
  };
  for (const auto& unit : data.treated()) emit(unit);
  for (const auto& unit : data.control()) emit(unit);
  return out.str();
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << dataset_to_csv(data);
}

MatchAssignment::MatchAssignment(std::size_t n_treated, std::size_t n_control,
                                 std::vector<MatchedPair> pairs)
    : n_treated_(n_treated),
      n_control_(n_control),
      pairs_(std::move(pairs)),
      control_use_(n_control, 0),
      treated_use_(n_treated, 0) {
  std::sort(pairs_.begin(), pairs_.end());
  if (std::adjacent_find(pairs_.begin(), pairs_.end()) != pairs_.end()) {
    throw ValidationError("assignment repeats a (treated, control) pair; weights are capped at 1");
  }
  for (const auto& pair : pairs_) {
    if (pair.treated >= n_treated || pair.control >= n_control) {
      throw ValidationError("assignment pair (" + std::to_string(pair.treated) + ", " +
                            std::to_string(pair.control) + ") is out of range");
    }
    ++control_use_[pair.control];
    ++treated_use_[pair.treated];
  }
}

bool MatchAssignment::contains(std::size_t i, std::size_t j) const {
  return std::binary_search(pairs_.begin(), pairs_.end(), MatchedPair{i, j});
}

std::size_t MatchAssignment::max_control_use() const {
  return control_use_.empty() ? 0 : *std::max_element(control_use_.begin(), control_use_.end());
}

const char* to_string(EstimandKind kind) {
  return kind == EstimandKind::satt ? "SATT" : "sSATT";
}

namespace {

void check_shape(const Dataset& data, const MatchAssignment& w) {
  if (w.n_treated() != data.n_treated() || w.n_control() != data.n_control()) {
    throw ValidationError("assignment shape does not match the dataset");
  }
}

}  // namespace

std::vector<double> satt_control_weights(const MatchAssignment& w) {
  std::vector<double> weights(w.n_control(), 0.0);
  const auto counts = w.treated_match_counts();
  const double nt = static_cast<double>(w.n_treated());
  for (const auto& pair : w.pairs()) {
    weights[pair.control] += 1.0 / (nt * static_cast<double>(counts[pair.treated]));
  }
  return weights;
}

EstimateReport estimate_satt(const Dataset& data, const MatchAssignment& w) {
  check_shape(data, w);
  const auto counts = w.treated_match_counts();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) {
      throw EstimandUndefinedError("treated unit '" + data.treated(i).id +
                                   "' is unmatched; SATT is undefined");
    }
  }
  // Per-treated average of matched control outcomes; pairs are sorted by
  // treated index so each treated block is contiguous.
  double control_sum = 0.0;
  const auto pairs = w.pairs();
  for (std::size_t k = 0; k < pairs.size();) {
    const std::size_t i = pairs[k].treated;
    double block = 0.0;
    std::size_t n = 0;
    for (; k < pairs.size() && pairs[k].treated == i; ++k, ++n) {
      block += data.control(pairs[k].control).outcome;
    }
    control_sum += block / static_cast<double>(n);
  }
  const double nt = static_cast<double>(data.n_treated());
  return {data.mean_treated_outcome() - control_sum / nt, data.n_treated(), EstimandKind::satt};
}

EstimateReport estimate_ssatt(const Dataset& data, const MatchAssignment& w) {
  check_shape(data, w);
  if (w.empty()) throw EstimandUndefinedError("assignment has no pairs; sSATT is undefined");
  const auto counts = w.treated_match_counts();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 1) {
      throw PreconditionError("treated unit '" + data.treated(i).id +
                              "' is matched more than once; sSATT needs at most one match");
    }
  }
  double sum = 0.0;
  for (const auto& pair : w.pairs()) {
    sum += data.treated(pair.treated).outcome - data.control(pair.control).outcome;
  }
  return {sum / static_cast<double>(w.size()), w.size(), EstimandKind::ssatt};
}

EstimateReport estimate(const Dataset& data, const MatchAssignment& w, EstimandKind kind) {
  return kind == EstimandKind::satt ? estimate_satt(data, w) : estimate_ssatt(data, w);
}

}  // namespace matchbound
