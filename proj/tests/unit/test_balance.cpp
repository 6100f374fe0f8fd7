#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>

#include "matchbound/balance.hpp"
#include "matchbound/errors.hpp"
#include "oracle.hpp"

using namespace matchbound;

namespace {

Unit unit(std::string id, bool treated, double y, std::vector<double> x) {
  Unit u;
  u.id = std::move(id);
  u.treated = treated;
  u.outcome = y;
  u.covariates = std::move(x);
  return u;
}

oracle::Matching random_one_to_one(std::mt19937_64& rng, std::size_t nt, std::size_t nc) {
  std::vector<std::size_t> controls(nc);
  for (std::size_t j = 0; j < nc; ++j) controls[j] = j;
  std::shuffle(controls.begin(), controls.end(), rng);
  oracle::Matching m(nt);
  for (std::size_t i = 0; i < nt; ++i) m[i] = {controls[i]};
  return m;
}

oracle::Matching random_many(std::mt19937_64& rng, std::size_t nt, std::size_t nc) {
  oracle::Matching m(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      if (rng() % 3 == 0) m[i].push_back(j);
    }
    if (m[i].empty()) m[i].push_back(rng() % nc);
  }
  return m;
}

}  // namespace

TEST(Mahalanobis, IdenticalVectorsGiveZero) {
  Dataset data({"a", "b"}, {unit("t", true, 0, {1, 2}), unit("c1", false, 0, {1, 2}), unit("c2", false, 0, {3, 0}),
                           unit("c3", false, 0, {0, 5})});
  EXPECT_EQ(mahalanobis_distances(data)(0, 0), 0.0);
}

TEST(Mahalanobis, UnitVarianceReducesToAbsoluteDifference) {
  // Pooled values {2, 0, 1 + 1/sqrt(2)... }: choose points with sample variance 1.
  // x = {2, 0, 1, 1} has mean 1 and sample variance (1 + 1 + 0 + 0) / 3 = 2/3; scale to variance 1.
  const double s = std::sqrt(1.5);
  Dataset data({"x"}, {unit("t", true, 0, {1 + s}), unit("c1", false, 0, {1 - s}), unit("c2", false, 0, {1}),
                       unit("c3", false, 0, {1})});
  EXPECT_NEAR(mahalanobis_distances(data)(0, 0), 2 * s, 1e-12);
}

TEST(Mahalanobis, MatchesDirectInverseComputation) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = oracle::random_instance(rng, 3, 3);
    const auto data = inst.dataset();
    const auto d = mahalanobis_distances(data);
    Eigen::MatrixXd x(6, 2);
    for (int r = 0; r < 6; ++r) {
      x(r, 0) = inst.units[r].covariates[0];
      x(r, 1) = inst.units[r].covariates[1];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / 5.0;
    const Eigen::MatrixXd inv = cov.inverse();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const Eigen::VectorXd diff = (x.row(i) - x.row(3 + j)).transpose();
        EXPECT_NEAR(d(i, j), std::sqrt(diff.dot(inv * diff)), 1e-9);
      }
    }
  }
}

TEST(Mahalanobis, ConstantCovariatesAreNumericError) {
  Dataset data({"x"}, {unit("t", true, 0, {1}), unit("c", false, 0, {1})});
  EXPECT_THROW(mahalanobis_distances(data), NumericError);
}

TEST(ScoreDistances, RequireScoreColumn) {
  Dataset data({"x"}, {unit("t", true, 0, {1}), unit("c", false, 0, {2})});
  EXPECT_THROW(score_distances(data), ConfigurationError);
  Unit t = unit("t", true, 0, {1});
  t.score = 0.7;
  Unit c = unit("c", false, 0, {2});
  c.score = 0.2;
  EXPECT_NEAR(score_distances(Dataset({"x"}, {t, c}))(0, 0), 0.5, 1e-15);
}

TEST(MomentGap, ExactMatchingGivesZero) {
  Dataset data({"x"}, {unit("t1", true, 0, {1.5}), unit("t2", true, 0, {-2}), unit("c1", false, 0, {-2}),
                       unit("c2", false, 0, {1.5}), unit("c3", false, 0, {9})});
  MatchAssignment w(2, 3, {{0, 1}, {1, 0}});
  for (int k = 1; k <= 3; ++k) {
    EXPECT_EQ(moment_gap(data, w, 0, k, EstimandKind::satt), 0.0);
    EXPECT_EQ(moment_gap(data, w, 0, k, EstimandKind::ssatt), 0.0);
  }
}

TEST(MomentGap, SinglePairSecondMoment) {
  Dataset data({"x"}, {unit("t", true, 0, {2}), unit("c", false, 0, {1})});
  EXPECT_DOUBLE_EQ(moment_gap(data, MatchAssignment(1, 1, {{0, 0}}), 0, 2, EstimandKind::satt), 3.0);
  EXPECT_DOUBLE_EQ(moment_gap(data, MatchAssignment(1, 1, {{0, 0}}), 0, 2, EstimandKind::ssatt), 3.0);
}

TEST(MomentGap, MatchesNaiveLoops) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    const auto inst = oracle::random_instance(rng, 4, 6);
    const auto data = inst.dataset();
    const auto one = random_one_to_one(rng, 4, 6);
    const auto many = random_many(rng, 4, 6);
    for (std::size_t p = 0; p < 2; ++p) {
      for (int k = 1; k <= 3; ++k) {
        EXPECT_NEAR(moment_gap(data, oracle::to_assignment(inst, one), p, k, EstimandKind::ssatt),
                    oracle::moment_gap(inst, one, p, k, false), 1e-12);
        EXPECT_NEAR(moment_gap(data, oracle::to_assignment(inst, many), p, k, EstimandKind::satt),
                    oracle::moment_gap(inst, many, p, k, true), 1e-12);
      }
    }
  }
}

TEST(QuantileGap, IdenticalArmsGiveZero) {
  Dataset data({"x"}, {unit("t1", true, 0, {1}), unit("t2", true, 0, {2}), unit("t3", true, 0, {3}),
                       unit("c1", false, 0, {3}), unit("c2", false, 0, {1}), unit("c3", false, 0, {2})});
  const auto grid = make_quantile_grid(data);
  MatchAssignment w(3, 3, {{0, 1}, {1, 2}, {2, 0}});
  for (double g : quantile_gap(data, w, grid, 0, EstimandKind::satt)) EXPECT_EQ(g, 0.0);
  for (double g : quantile_gap(data, w, grid, 0, EstimandKind::ssatt)) EXPECT_EQ(g, 0.0);
}

TEST(QuantileGap, SaturatedIndicatorAtMedian) {
  // Treated {1, 2, 3, 4}: type-1 median g = 2, treated share below = 0.5;
  // every matched control lies below g, so the control share is 1.
  Dataset data({"x"}, {unit("t1", true, 0, {1}), unit("t2", true, 0, {2}), unit("t3", true, 0, {3}),
                       unit("t4", true, 0, {4}), unit("c1", false, 0, {0}), unit("c2", false, 0, {-1})});
  const auto grid = make_quantile_grid(data, {0.5});
  ASSERT_EQ(grid.treated_values[0][0], 2.0);
  MatchAssignment w(4, 2, {{0, 0}, {1, 1}, {2, 0}, {3, 1}});
  EXPECT_DOUBLE_EQ(quantile_gap(data, w, grid, 0, EstimandKind::satt)[0], 0.5);
}

TEST(QuantileGap, MatchesIndicatorRecount) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 100; ++rep) {
    const auto inst = oracle::random_instance(rng, 4, 6);
    const auto data = inst.dataset();
    const auto grid = make_quantile_grid(data);
    const auto many = random_many(rng, 4, 6);
    const auto one = random_one_to_one(rng, 4, 6);
    for (std::size_t p = 0; p < 2; ++p) {
      const auto satt = quantile_gap(data, oracle::to_assignment(inst, many), grid, p, EstimandKind::satt);
      const auto ssatt = quantile_gap(data, oracle::to_assignment(inst, one), grid, p, EstimandKind::ssatt);
      for (std::size_t q = 0; q < 3; ++q) {
        const double g = grid.treated_values[p][q];
        double tshare = 0.0;
        double cshare = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
          tshare += inst.units[i].covariates[p] <= g ? 0.25 : 0.0;
          for (std::size_t j : many[i]) {
            cshare += (inst.units[4 + j].covariates[p] <= g ? 1.0 : 0.0) / static_cast<double>(many[i].size()) / 4.0;
          }
        }
        EXPECT_NEAR(satt[q], std::abs(tshare - cshare), 1e-12);

        const double h = grid.pooled_values[p][q];
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
          for (std::size_t j : one[i]) {
            s += (inst.units[i].covariates[p] <= h ? 1.0 : 0.0) - (inst.units[4 + j].covariates[p] <= h ? 1.0 : 0.0);
          }
        }
        EXPECT_NEAR(ssatt[q], std::abs(s) / 4.0, 1e-12);
      }
    }
  }
}

TEST(QuantileGrid, ValidatesProportions) {
  Dataset data({"x"}, {unit("t", true, 0, {1}), unit("c", false, 0, {2})});
  EXPECT_THROW(make_quantile_grid(data, {0.5, 0.5}), ValidationError);
  EXPECT_THROW(make_quantile_grid(data, {0.0}), ValidationError);
  EXPECT_THROW(make_quantile_grid(data, {1.0}), ValidationError);
}

TEST(EmpiricalQuantile, TypeOne) {
  EXPECT_EQ(empirical_quantile({4, 1, 3, 2}, 0.25), 1.0);
  EXPECT_EQ(empirical_quantile({4, 1, 3, 2}, 0.5), 2.0);
  EXPECT_EQ(empirical_quantile({4, 1, 3, 2}, 0.51), 3.0);
  EXPECT_EQ(empirical_quantile({4, 1, 3, 2}, 0.99), 4.0);
}

TEST(AggregateDistance, Sums) {
  DistanceMatrix d(2, 2, {0.3, 5, 5, 0.7}, MetricKind::precomputed);
  EXPECT_EQ(aggregate_distance(MatchAssignment(2, 2, {}), d), 0.0);
  EXPECT_DOUBLE_EQ(aggregate_distance(MatchAssignment(2, 2, {{0, 0}, {1, 1}}), d), 1.0);
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = oracle::random_instance(rng, 4, 6);
    DistanceMatrix dm(4, 6, inst.distances, MetricKind::euclidean);
    const auto m = random_many(rng, 4, 6);
    EXPECT_NEAR(aggregate_distance(oracle::to_assignment(inst, m), dm), oracle::total_distance(inst, m), 1e-12);
  }
}

TEST(DistanceMatrix, RejectsNegativeEntries) {
  EXPECT_THROW(DistanceMatrix(1, 1, {-1.0}, MetricKind::precomputed), ValidationError);
  EXPECT_THROW(DistanceMatrix(1, 2, {1.0}, MetricKind::precomputed), ValidationError);
}

TEST(CaliperMask, ExtremesMedianAndMonotone) {
  std::mt19937_64 rng(17);
  const auto inst = oracle::random_instance(rng, 4, 6);
  DistanceMatrix d(4, 6, inst.distances, MetricKind::euclidean);
  const double max_entry = *std::max_element(inst.distances.begin(), inst.distances.end());
  for (auto v : caliper_mask(d, max_entry)) EXPECT_EQ(v, 1);
  for (auto v : caliper_mask(d, 0.0)) EXPECT_EQ(v, 0);
  auto sorted = inst.distances;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const auto mask = caliper_mask(d, median);
  for (std::size_t k = 0; k < mask.size(); ++k) EXPECT_EQ(mask[k], inst.distances[k] <= median ? 1 : 0);
  const auto wider = caliper_mask(d, median * 1.5);
  for (std::size_t k = 0; k < mask.size(); ++k) EXPECT_LE(mask[k], wider[k]);
}

TEST(ProfileAssignment, PerfectCloneMatchIsZero) {
  Dataset data({"a", "b"}, {unit("t1", true, 0, {1, 2}), unit("t2", true, 0, {0, 1}), unit("c1", false, 0, {0, 1}),
                           unit("c2", false, 0, {1, 2}), unit("c3", false, 0, {5, 5})});
  const auto d = euclidean_distances(data);
  const auto grid = make_quantile_grid(data);
  MatchAssignment w(2, 3, {{0, 1}, {1, 0}});
  const auto prof = profile_assignment(data, w, &d, &grid, {1, 2, 3}, EstimandKind::satt);
  EXPECT_EQ(prof.moment_gaps.size(), 6u);
  for (const auto& g : prof.moment_gaps) EXPECT_EQ(g.gap, 0.0);
  for (const auto& g : prof.quantile_gaps) EXPECT_EQ(g.gap, 0.0);
  EXPECT_EQ(*prof.total_distance, 0.0);
  ASSERT_TRUE(prof.moment(1, 3).has_value());
  EXPECT_FALSE(prof.moment(1, 4).has_value());
}

TEST(ProfileAssignment, AverageIsElementwiseMean) {
  std::mt19937_64 rng(23);
  const auto inst = oracle::random_instance(rng, 4, 6);
  const auto data = inst.dataset();
  DistanceMatrix d(4, 6, inst.distances, MetricKind::euclidean);
  std::vector<QualityProfile> profiles;
  for (int r = 0; r < 5; ++r) {
    profiles.push_back(profile_assignment(data, oracle::to_assignment(inst, random_one_to_one(rng, 4, 6)), &d,
                                          nullptr, {1, 2}, EstimandKind::ssatt));
  }
  const auto mean = average_profiles(profiles);
  for (std::size_t k = 0; k < mean.moment_gaps.size(); ++k) {
    double s = 0.0;
    for (const auto& p : profiles) s += p.moment_gaps[k].gap;
    EXPECT_NEAR(mean.moment_gaps[k].gap, s / 5.0, 1e-15);
  }
  double s = 0.0;
  for (const auto& p : profiles) s += *p.total_distance;
  EXPECT_NEAR(*mean.total_distance, s / 5.0, 1e-15);
}
