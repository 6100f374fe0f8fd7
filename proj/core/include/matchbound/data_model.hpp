#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace matchbound {

/// One observation. Ids are opaque strings; when the CSV has no id column
/// the 1-based data row number is used.
struct Unit {
  std::string id;
  double outcome = 0.0;
  bool treated = false;
  std::vector<double> covariates;
  std::optional<double> score;
  std::string group;
};

/// Treated and control arms in input order. Immutable once built.
class Dataset {
 public:
  /// Validates and partitions `units` by treatment, preserving row order
  /// within each arm. Throws ValidationError when an arm is empty, a
  /// covariate vector has the wrong length, or a value is not finite.
  Dataset(std::vector<std::string> covariate_names, std::vector<Unit> units);

  std::span<const Unit> treated() const { return treated_; }
  std::span<const Unit> control() const { return control_; }
  const Unit& treated(std::size_t i) const { return treated_.at(i); }
  const Unit& control(std::size_t j) const { return control_.at(j); }

  std::size_t n_treated() const { return treated_.size(); }
  std::size_t n_control() const { return control_.size(); }
  std::size_t n_covariates() const { return covariate_names_.size(); }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }

  /// Index of a covariate by name; throws SchemaError if absent.
  std::size_t covariate_index(const std::string& name) const;

  bool has_scores() const { return has_scores_; }
  double mean_treated_outcome() const;

 private:
  std::vector<std::string> covariate_names_;
  std::vector<Unit> treated_;
  std::vector<Unit> control_;
  bool has_scores_ = false;
};

/// Column mapping for CSV ingestion.
struct CsvSchema {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
  std::optional<std::string> id;
  std::optional<std::string> score;
  std::optional<std::string> group;
};

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema);
Dataset parse_dataset(const std::string& csv_text, const CsvSchema& schema);

/// Writes the dataset back in the CSV schema (`id,treat,outcome,<covariates>`
/// plus `score`/`group` when present). Numbers use shortest round-trip form.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
std::string dataset_to_csv(const Dataset& data);

struct MatchedPair {
  std::size_t treated = 0;
  std::size_t control = 0;
  auto operator<=>(const MatchedPair&) const = default;
};

/// Binary match matrix W stored as a sorted set of (treated, control) pairs.
/// Every stored pair has weight exactly 1 (per-entry cap U = 1).
class MatchAssignment {
 public:
  MatchAssignment(std::size_t n_treated, std::size_t n_control,
                  std::vector<MatchedPair> pairs);

  std::size_t n_treated() const { return n_treated_; }
  std::size_t n_control() const { return n_control_; }
  std::span<const MatchedPair> pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  bool contains(std::size_t i, std::size_t j) const;

  std::span<const std::size_t> control_use_counts() const { return control_use_; }
  std::span<const std::size_t> treated_match_counts() const { return treated_use_; }
  std::size_t max_control_use() const;

  bool operator==(const MatchAssignment& other) const = default;

 private:
  std::size_t n_treated_;
  std::size_t n_control_;
  std::vector<MatchedPair> pairs_;
  std::vector<std::size_t> control_use_;
  std::vector<std::size_t> treated_use_;
};

/// Which difference-in-means estimator an assignment is scored with.
enum class EstimandKind { satt, ssatt };

const char* to_string(EstimandKind kind);

struct EstimateReport {
  double estimate = 0.0;
  std::size_t n_matches = 0;
  EstimandKind estimand_kind = EstimandKind::satt;
};

/// SATT difference in means. Controls matched to the same treated unit are
/// averaged before the grand mean, so one-to-one and many-to-one assignments
/// share one estimator. Throws EstimandUndefinedError if a treated unit is
/// unmatched.
EstimateReport estimate_satt(const Dataset& data, const MatchAssignment& w);

/// Mean of matched pair differences over the selected sub-sample. Requires
/// every treated unit to be matched at most once.
EstimateReport estimate_ssatt(const Dataset& data, const MatchAssignment& w);

EstimateReport estimate(const Dataset& data, const MatchAssignment& w, EstimandKind kind);

/// Normalized per-control weights used by the SATT estimator:
/// omega_j = (1/N^t) sum_i w_ij / n_i. They sum to one.
std::vector<double> satt_control_weights(const MatchAssignment& w);

}  // namespace matchbound
