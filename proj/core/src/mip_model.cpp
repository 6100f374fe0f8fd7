#include "matchbound/mip_model.hpp"

#include <cmath>
#include <sstream>

#include "matchbound/errors.hpp"
#include "matchbound/format.hpp"

namespace matchbound {

const char* to_string(Sense sense) { return sense == Sense::maximize ? "maximize" : "minimize"; }

const char* to_string(ConstraintFamily family) {
  switch (family) {
    case ConstraintFamily::structure: return "structure";
    case ConstraintFamily::distance: return "distance";
    case ConstraintFamily::moment: return "moment";
    case ConstraintFamily::quantile: return "quantile";
    case ConstraintFamily::caliper: return "caliper";
    case ConstraintFamily::exact: return "exact";
    case ConstraintFamily::balance: return "balance";
  }
  return "unknown";
}

std::size_t MipModel::add_variable(Variable variable, std::size_t i, std::size_t j) {
  const std::size_t col = variables_.size();
  const auto key = std::make_tuple(variable.role, i, j);
  if (!index_.emplace(key, col).second) throw ModelError("duplicate variable '" + variable.name + "'");
  variables_.push_back(std::move(variable));
  objective_.push_back(0.0);
  return col;
}

void MipModel::add_constraint(Constraint constraint) {
  for (const auto& term : constraint.terms) {
    if (term.column >= variables_.size()) {
      throw ModelError("constraint '" + constraint.name + "' references undeclared column " +
                       std::to_string(term.column));
    }
  }
  constraints_.push_back(std::move(constraint));
}

std::optional<std::size_t> MipModel::column(VarRole role, std::size_t i, std::size_t j) const {
  const auto it = index_.find(std::make_tuple(role, i, j));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t MipModel::require_column(VarRole role, std::size_t i, std::size_t j) const {
  const auto col = column(role, i, j);
  if (!col) throw ModelError("model has no such variable");
  return *col;
}

void MipModel::set_objective_coefficient(std::size_t column, double coefficient) {
  objective_.at(column) = coefficient;
}

double MipModel::evaluate_objective(const std::vector<double>& values) const {
  double total = objective_offset_;
  for (std::size_t c = 0; c < objective_.size(); ++c) total += objective_[c] * values.at(c);
  return total;
}

double MipModel::evaluate_row(const Constraint& row, const std::vector<double>& values) const {
  double lhs = 0.0;
  for (const auto& term : row.terms) lhs += term.coefficient * values.at(term.column);
  return lhs;
}

void MipModel::validate() const {
  for (const auto& var : variables_) {
    if (!std::isfinite(var.lower) || !std::isfinite(var.upper) || var.lower > var.upper) {
      throw ModelError("variable '" + var.name + "' has an invalid range");
    }
    if (var.kind == VarKind::binary && (var.lower < 0.0 || var.upper > 1.0)) {
      throw ModelError("binary variable '" + var.name + "' outside [0,1]");
    }
  }
  for (const auto& row : constraints_) {
    if (!std::isfinite(row.rhs)) throw ModelError("constraint '" + row.name + "' has a non-finite rhs");
    for (const auto& term : row.terms) {
      if (term.column >= variables_.size()) {
        throw ModelError("constraint '" + row.name + "' references an undeclared column");
      }
      if (!std::isfinite(term.coefficient)) {
        throw ModelError("constraint '" + row.name + "' has a non-finite coefficient");
      }
    }
  }
}

std::string MipModel::to_lp_text() const {
  std::ostringstream out;
  const auto emit_terms = [&](const std::vector<LinearTerm>& terms) {
    bool first = true;
    for (const auto& term : terms) {
      if (term.coefficient == 0.0) continue;
      const double magnitude = std::abs(term.coefficient);
      out << (term.coefficient < 0 ? (first ? "-" : " - ") : (first ? "" : " + "));
      if (magnitude != 1.0) out << format_double(magnitude) << ' ';
      out << variables_[term.column].name;
      first = false;
    }
    if (first) out << '0';
  };
  out << (sense_ == Sense::maximize ? "Maximize" : "Minimize") << "\n obj: ";
  std::vector<LinearTerm> obj;
  for (std::size_t c = 0; c < objective_.size(); ++c) obj.push_back({c, objective_[c]});
  emit_terms(obj);
  if (objective_offset_ != 0.0) out << " + constant " << format_double(objective_offset_);
  out << "\nSubject To\n";
  for (const auto& row : constraints_) {
    out << ' ' << row.name << ": ";
    emit_terms(row.terms);
    switch (row.comparator) {
      case Comparator::less_equal: out << " <= "; break;
      case Comparator::equal: out << " = "; break;
      case Comparator::greater_equal: out << " >= "; break;
    }
    out << format_double(row.rhs) << '\n';
  }
  out << "Bounds\n";
  for (const auto& var : variables_) {
    out << ' ' << format_double(var.lower) << " <= " << var.name << " <= " << format_double(var.upper) << '\n';
  }
  out << "Binaries\n";
  for (const auto& var : variables_) {
    if (var.kind == VarKind::binary) out << ' ' << var.name << '\n';
  }
  out << "End\n";
  return out.str();
}

}  // namespace matchbound
