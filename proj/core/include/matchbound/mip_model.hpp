#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace matchbound {

enum class VarKind { binary, continuous };

/// Semantic role of a column. `w` are match indicators; `v`, `z_i` are the
/// per-treated normalization variables of the SATT fractional program; `u`,
/// `z` the single-denominator pair for the sub-sample program.
enum class VarRole { w, v, z_i, u, z };

enum class Comparator { less_equal, equal, greater_equal };

enum class Sense { maximize, minimize };

const char* to_string(Sense sense);

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  VarKind kind = VarKind::continuous;
  VarRole role = VarRole::w;
};

struct LinearTerm {
  std::size_t column = 0;
  double coefficient = 0.0;
};

/// Constraint families; the infeasibility probe drops these one at a time.
enum class ConstraintFamily { structure, distance, moment, quantile, caliper, exact, balance };

const char* to_string(ConstraintFamily family);

struct Constraint {
  std::string name;
  std::vector<LinearTerm> terms;
  Comparator comparator = Comparator::less_equal;
  double rhs = 0.0;
  ConstraintFamily family = ConstraintFamily::structure;
};

/// Solver-facing integer program. Columns are addressed by (role, i, j);
/// scalar roles use i = j = 0 and `z_i` uses j = 0.
class MipModel {
 public:
  explicit MipModel(Sense sense = Sense::maximize) : sense_(sense) {}

  std::size_t add_variable(Variable variable, std::size_t i = 0, std::size_t j = 0);
  void add_constraint(Constraint constraint);

  std::optional<std::size_t> column(VarRole role, std::size_t i = 0, std::size_t j = 0) const;
  std::size_t require_column(VarRole role, std::size_t i = 0, std::size_t j = 0) const;

  void set_objective_coefficient(std::size_t column, double coefficient);
  void set_objective_offset(double offset) { objective_offset_ = offset; }
  void set_sense(Sense sense) { sense_ = sense; }

  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const std::vector<double>& objective() const { return objective_; }
  double objective_offset() const { return objective_offset_; }
  Sense sense() const { return sense_; }

  std::size_t n_variables() const { return variables_.size(); }
  std::size_t n_constraints() const { return constraints_.size(); }

  /// Objective value (with offset) at a full column assignment.
  double evaluate_objective(const std::vector<double>& values) const;
  double evaluate_row(const Constraint& row, const std::vector<double>& values) const;

  /// Throws ModelError on an undeclared column, an unbounded or inverted
  /// variable range, or a binary outside [0,1].
  void validate() const;

  /// Human-readable LP-style dump; layout documented in the README.
  std::string to_lp_text() const;

 private:
  Sense sense_;
  std::vector<Variable> variables_;
  std::vector<Constraint> constraints_;
  std::vector<double> objective_;
  double objective_offset_ = 0.0;
  std::map<std::tuple<VarRole, std::size_t, std::size_t>, std::size_t> index_;
};

}  // namespace matchbound
