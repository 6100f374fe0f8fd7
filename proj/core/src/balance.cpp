#include "matchbound/balance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "matchbound/errors.hpp"

namespace matchbound {

const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::mahalanobis: return "mahalanobis";
    case MetricKind::score_absolute_difference: return "score";
    case MetricKind::euclidean: return "euclidean";
    case MetricKind::precomputed: return "precomputed";
  }
  return "unknown";
}

DistanceMatrix::DistanceMatrix(std::size_t n_treated, std::size_t n_control,
                               std::vector<double> entries, MetricKind kind)
    : n_treated_(n_treated), n_control_(n_control), entries_(std::move(entries)), kind_(kind) {
  if (entries_.size() != n_treated * n_control) {
    throw ValidationError("distance matrix has " + std::to_string(entries_.size()) +
                          " entries, expected " + std::to_string(n_treated * n_control));
  }
  for (double e : entries_) {
    if (!std::isfinite(e) || e < 0.0) throw ValidationError("distance entries must be finite and >= 0");
  }
}

namespace {

Eigen::MatrixXd stacked_covariates(const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.n_treated() + data.n_control());
  const auto p = static_cast<Eigen::Index>(data.n_covariates());
  Eigen::MatrixXd x(n, p);
  Eigen::Index row = 0;
  for (const auto& arm : {data.treated(), data.control()}) {
    for (const auto& unit : arm) {
      for (Eigen::Index c = 0; c < p; ++c) x(row, c) = unit.covariates[static_cast<std::size_t>(c)];
      ++row;
    }
  }
  return x;
}

}  // namespace

DistanceMatrix mahalanobis_distances(const Dataset& data) {
  const Eigen::MatrixXd x = stacked_covariates(data);
  const auto n = x.rows();
  const auto p = x.cols();
  if (n < 2) throw NumericError("need at least two units to estimate a covariance");
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov = (centered.adjoint() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const double max_ev = eig.eigenvalues().maxCoeff();
  const double min_ev = eig.eigenvalues().minCoeff();
  if (max_ev <= 0.0) throw NumericError("all covariates are constant; covariance is zero");
  if (min_ev <= 0.0 || max_ev / min_ev > 1e12) {
    cov.diagonal().array() += 1e-8 * cov.trace() / static_cast<double>(p);
    eig.compute(cov);
    if (eig.eigenvalues().minCoeff() <= 0.0 ||
        eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff() > 1e16) {
      std::string names;
      for (Eigen::Index c = 0; c < p; ++c) {
        if (cov(c, c) <= 1e-300) names += (names.empty() ? "" : ", ") + data.covariate_names()[static_cast<std::size_t>(c)];
      }
      throw NumericError("pooled covariance is rank deficient after regularization" +
                         (names.empty() ? std::string() : " (constant: " + names + ")"));
    }
  }
  const Eigen::MatrixXd inverse = eig.eigenvectors() *
                                  eig.eigenvalues().cwiseInverse().asDiagonal() *
                                  eig.eigenvectors().transpose();

  const std::size_t nt = data.n_treated();
  const std::size_t nc = data.n_control();
  std::vector<double> entries(nt * nc);
  Eigen::VectorXd diff(p);
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      for (Eigen::Index c = 0; c < p; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        diff(c) = data.treated(i).covariates[cc] - data.control(j).covariates[cc];
      }
      entries[i * nc + j] = std::sqrt(std::max(0.0, diff.dot(inverse * diff)));
    }
  }
  return DistanceMatrix(nt, nc, std::move(entries), MetricKind::mahalanobis);
}

DistanceMatrix euclidean_distances(const Dataset& data) {
  const std::size_t nt = data.n_treated();
  const std::size_t nc = data.n_control();
  std::vector<double> entries(nt * nc);
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      double sum = 0.0;
      for (std::size_t c = 0; c < data.n_covariates(); ++c) {
        const double delta = data.treated(i).covariates[c] - data.control(j).covariates[c];
        sum += delta * delta;
      }
      entries[i * nc + j] = std::sqrt(sum);
    }
  }
  return DistanceMatrix(nt, nc, std::move(entries), MetricKind::euclidean);
}

DistanceMatrix score_distances(const Dataset& data) {
  if (!data.has_scores()) throw ConfigurationError("dataset has no score column");
  const std::size_t nt = data.n_treated();
  const std::size_t nc = data.n_control();
  std::vector<double> entries(nt * nc);
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      entries[i * nc + j] = std::abs(*data.treated(i).score - *data.control(j).score);
    }
  }
  return DistanceMatrix(nt, nc, std::move(entries), MetricKind::score_absolute_difference);
}

double empirical_quantile(std::vector<double> values, double proportion) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(proportion * n - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

QuantileGrid make_quantile_grid(const Dataset& data, std::vector<double> proportions) {
  for (std::size_t k = 0; k < proportions.size(); ++k) {
    if (!(proportions[k] > 0.0 && proportions[k] < 1.0)) {
      throw ValidationError("quantile proportions must lie strictly inside (0, 1)");
    }
    if (k > 0 && !(proportions[k] > proportions[k - 1])) {
      throw ValidationError("quantile proportions must be strictly increasing");
    }
  }
  QuantileGrid grid;
  grid.proportions = std::move(proportions);
  for (std::size_t p = 0; p < data.n_covariates(); ++p) {
    std::vector<double> treated;
    std::vector<double> pooled;
    for (const auto& unit : data.treated()) treated.push_back(unit.covariates[p]);
    pooled = treated;
    for (const auto& unit : data.control()) pooled.push_back(unit.covariates[p]);
    std::vector<double> g;
    std::vector<double> q;
    for (double h : grid.proportions) {
      g.push_back(empirical_quantile(treated, h));
      q.push_back(empirical_quantile(pooled, h));
    }
    grid.treated_values.push_back(std::move(g));
    grid.pooled_values.push_back(std::move(q));
  }
  return grid;
}

double moment_gap(const Dataset& data, const MatchAssignment& w, std::size_t p, int k,
                  EstimandKind kind) {
  if (k < 1) throw ValidationError("moment order must be >= 1");
  if (p >= data.n_covariates()) throw ValidationError("covariate index out of range");
  if (kind == EstimandKind::satt) {
    double treated = 0.0;
    for (const auto& unit : data.treated()) treated += std::pow(unit.covariates[p], k);
    treated /= static_cast<double>(data.n_treated());
    const auto weights = satt_control_weights(w);
    double control = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      if (weights[j] != 0.0) control += weights[j] * std::pow(data.control(j).covariates[p], k);
    }
    return std::abs(treated - control);
  }
  if (w.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& pair : w.pairs()) {
    sum += std::pow(data.treated(pair.treated).covariates[p], k) -
           std::pow(data.control(pair.control).covariates[p], k);
  }
  return std::abs(sum / static_cast<double>(w.size()));
}

std::vector<double> quantile_gap(const Dataset& data, const MatchAssignment& w,
                                 const QuantileGrid& grid, std::size_t p, EstimandKind kind) {
  if (p >= grid.treated_values.size()) throw ValidationError("quantile grid lacks this covariate");
  std::vector<double> gaps;
  if (kind == EstimandKind::satt) {
    const auto weights = satt_control_weights(w);
    for (double g : grid.treated_values[p]) {
      double treated_share = 0.0;
      for (const auto& unit : data.treated()) treated_share += unit.covariates[p] <= g ? 1.0 : 0.0;
      treated_share /= static_cast<double>(data.n_treated());
      double control_share = 0.0;
      for (std::size_t j = 0; j < weights.size(); ++j) {
        if (data.control(j).covariates[p] <= g) control_share += weights[j];
      }
      gaps.push_back(std::abs(treated_share - control_share));
    }
    return gaps;
  }
  for (double q : grid.pooled_values[p]) {
    if (w.empty()) {
      gaps.push_back(0.0);
      continue;
    }
    double sum = 0.0;
    for (const auto& pair : w.pairs()) {
      sum += (data.treated(pair.treated).covariates[p] <= q ? 1.0 : 0.0) -
             (data.control(pair.control).covariates[p] <= q ? 1.0 : 0.0);
    }
    gaps.push_back(std::abs(sum / static_cast<double>(w.size())));
  }
  return gaps;
}

double aggregate_distance(const MatchAssignment& w, const DistanceMatrix& d) {
  if (w.n_treated() != d.n_treated() || w.n_control() != d.n_control()) {
    throw ValidationError("distance matrix shape does not match the assignment");
  }
  double total = 0.0;
  for (const auto& pair : w.pairs()) total += d(pair.treated, pair.control);
  return total;
}

std::vector<unsigned char> caliper_mask(const DistanceMatrix& d, double radius) {
  if (radius < 0.0) throw ValidationError("caliper radius must be >= 0");
  std::vector<unsigned char> mask(d.entries().size());
  std::transform(d.entries().begin(), d.entries().end(), mask.begin(),
                 [radius](double e) { return static_cast<unsigned char>(e <= radius ? 1 : 0); });
  return mask;
}

std::optional<double> QualityProfile::moment(std::size_t covariate, int order) const {
  for (const auto& m : moment_gaps) {
    if (m.covariate == covariate && m.order == order) return m.gap;
  }
  return std::nullopt;
}

QualityProfile profile_assignment(const Dataset& data, const MatchAssignment& w,
                                  const DistanceMatrix* d, const QuantileGrid* grid,
                                  const std::vector<int>& orders, EstimandKind kind) {
  QualityProfile profile;
  profile.estimand_kind = kind;
  for (std::size_t p = 0; p < data.n_covariates(); ++p) {
    for (int k : orders) profile.moment_gaps.push_back({p, k, moment_gap(data, w, p, k, kind)});
  }
  if (grid != nullptr) {
    for (std::size_t p = 0; p < data.n_covariates(); ++p) {
      const auto gaps = quantile_gap(data, w, *grid, p, kind);
      for (std::size_t q = 0; q < gaps.size(); ++q) profile.quantile_gaps.push_back({p, q, gaps[q]});
    }
  }
  if (d != nullptr) {
    profile.total_distance = aggregate_distance(w, *d);
    double worst = 0.0;
    for (const auto& pair : w.pairs()) worst = std::max(worst, (*d)(pair.treated, pair.control));
    profile.max_pair_distance = worst;
  }
  return profile;
}

QualityProfile average_profiles(const std::vector<QualityProfile>& profiles) {
  if (profiles.empty()) throw ValidationError("no profiles to average");
  QualityProfile mean = profiles.front();
  const double n = static_cast<double>(profiles.size());
  for (std::size_t r = 1; r < profiles.size(); ++r) {
    const auto& other = profiles[r];
    if (other.moment_gaps.size() != mean.moment_gaps.size() ||
        other.quantile_gaps.size() != mean.quantile_gaps.size() ||
        other.total_distance.has_value() != mean.total_distance.has_value()) {
      throw ValidationError("profiles being averaged have different layouts");
    }
    for (std::size_t k = 0; k < mean.moment_gaps.size(); ++k) mean.moment_gaps[k].gap += other.moment_gaps[k].gap;
    for (std::size_t k = 0; k < mean.quantile_gaps.size(); ++k) mean.quantile_gaps[k].gap += other.quantile_gaps[k].gap;
    if (mean.total_distance) *mean.total_distance += *other.total_distance;
    if (mean.max_pair_distance) *mean.max_pair_distance += *other.max_pair_distance;
  }
  for (auto& m : mean.moment_gaps) m.gap /= n;
  for (auto& q : mean.quantile_gaps) q.gap /= n;
  if (mean.total_distance) *mean.total_distance /= n;
  if (mean.max_pair_distance) *mean.max_pair_distance /= n;
  return mean;
}

bool exactly_equal(double a, double b) { return std::abs(a - b) <= 1e-9; }

}  // namespace matchbound
