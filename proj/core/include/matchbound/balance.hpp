#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "matchbound/data_model.hpp"

namespace matchbound {

enum class MetricKind { mahalanobis, score_absolute_difference, euclidean, precomputed };

const char* to_string(MetricKind kind);

/// N^t x N^c matrix of non-negative pairwise distances, row-major by treated.
class DistanceMatrix {
 public:
  DistanceMatrix(std::size_t n_treated, std::size_t n_control, std::vector<double> entries,
                 MetricKind kind);

  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_control_ + j]; }
  std::size_t n_treated() const { return n_treated_; }
  std::size_t n_control() const { return n_control_; }
  MetricKind kind() const { return kind_; }
  const std::vector<double>& entries() const { return entries_; }

 private:
  std::size_t n_treated_;
  std::size_t n_control_;
  std::vector<double> entries_;
  MetricKind kind_;
};

/// Pooled-covariance Mahalanobis distance over both arms. A ridge of
/// 1e-8 * trace(S) / P is added when cond(S) exceeds 1e12; NumericError if the
/// regularized matrix is still singular.
DistanceMatrix mahalanobis_distances(const Dataset& data);
DistanceMatrix euclidean_distances(const Dataset& data);
/// |score_i - score_j| over the precomputed score column.
DistanceMatrix score_distances(const Dataset& data);

/// Per-covariate quantile thresholds. `treated_values[p][k]` is the type-1
/// quantile of the treated arm at `proportions[k]`; `pooled_values[p][k]`
/// is the same over both arms.
struct QuantileGrid {
  std::vector<double> proportions;
  std::vector<std::vector<double>> treated_values;
  std::vector<std::vector<double>> pooled_values;
};

/// Throws ValidationError unless proportions are strictly increasing in (0,1).
QuantileGrid make_quantile_grid(const Dataset& data, std::vector<double> proportions = {0.25, 0.5, 0.75});

/// Left-continuous inverse of the empirical CDF: the ceil(h*n)-th order statistic.
double empirical_quantile(std::vector<double> values, double proportion);

/// Absolute k-th moment gap on covariate p.
///
/// SATT form: |mean_i (x_ip^t)^k - sum_j omega_j (x_jp^c)^k| with omega the
/// estimator's normalized control weights (reduces to (1/N^t) sum w_ij x^k for
/// one-to-one assignments).
/// sSATT form: |(1/M) sum_ij w_ij [(x_ip^t)^k - (x_jp^c)^k]|.
double moment_gap(const Dataset& data, const MatchAssignment& w, std::size_t p, int k,
                  EstimandKind kind);

/// Per-quantile gap on covariate p. SATT compares the treated share below
/// each treated-arm threshold g_pk with the weighted matched-control share;
/// sSATT uses the pooled thresholds q_pk and the pairwise indicator difference.
std::vector<double> quantile_gap(const Dataset& data, const MatchAssignment& w,
                                 const QuantileGrid& grid, std::size_t p, EstimandKind kind);

double aggregate_distance(const MatchAssignment& w, const DistanceMatrix& d);

/// D_ij = 1 iff d_ij <= radius. Row-major, N^t x N^c.
std::vector<unsigned char> caliper_mask(const DistanceMatrix& d, double radius);

struct MomentGap {
  std::size_t covariate = 0;
  int order = 1;
  double gap = 0.0;
};

struct QuantileGapEntry {
  std::size_t covariate = 0;
  std::size_t quantile_index = 0;
  double gap = 0.0;
};

struct QualityProfile {
  EstimandKind estimand_kind = EstimandKind::satt;
  std::vector<MomentGap> moment_gaps;
  std::vector<QuantileGapEntry> quantile_gaps;
  std::optional<double> total_distance;
  std::optional<double> max_pair_distance;

  std::optional<double> moment(std::size_t covariate, int order) const;
};

/// Every statistic the constraint catalogue can bound, measured on `w`.
/// Quantile gaps are included when `grid` is given; distances when `d` is.
QualityProfile profile_assignment(const Dataset& data, const MatchAssignment& w,
                                  const DistanceMatrix* d, const QuantileGrid* grid,
                                  const std::vector<int>& orders, EstimandKind kind);

/// Elementwise mean of profiles sharing one layout (same covariates, orders,
/// quantiles). Used when a randomized baseline is run several times.
QualityProfile average_profiles(const std::vector<QualityProfile>& profiles);

/// Covariate-equality indicator for exact matching (|x^t - x^c| <= 1e-9).
bool exactly_equal(double a, double b);

}  // namespace matchbound
