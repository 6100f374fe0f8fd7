#include "simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "matchbound/errors.hpp"
#include "matchbound/solver.hpp"

namespace matchbound::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kRefactorInterval = 64;
constexpr std::size_t kDegenerateBeforeBland = 50;
constexpr double kStepTie = 1e-12;

enum class State : unsigned char { basic, at_lower, at_upper };

class DenseSimplex {
 public:
  DenseSimplex(const LpProblem& problem, std::span<const double> lower, std::span<const double> upper)
      : problem_(problem),
        m_(static_cast<std::size_t>(problem.matrix.rows())),
        n_(static_cast<std::size_t>(problem.matrix.cols())),
        total_(n_ + 2 * m_),
        lower_(total_),
        upper_(total_),
        x_(total_, 0.0),
        cost_(total_, 0.0),
        state_(total_, State::at_lower),
        basis_(m_),
        art_sign_(m_, 1.0),
        max_iterations_(100 * (m_ + total_) + 1000) {
    for (std::size_t j = 0; j < n_; ++j) {
      lower_[j] = lower[j];
      upper_[j] = upper[j];
      if (std::isfinite(lower_[j])) {
        x_[j] = lower_[j];
      } else if (std::isfinite(upper_[j])) {
        x_[j] = upper_[j];
        state_[j] = State::at_upper;
      }
    }
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t s = n_ + r;
      switch (problem_.comparators[r]) {
        case Comparator::less_equal: lower_[s] = 0.0; upper_[s] = kInf; break;
        case Comparator::greater_equal: lower_[s] = -kInf; upper_[s] = 0.0; state_[s] = State::at_upper; break;
        case Comparator::equal: lower_[s] = 0.0; upper_[s] = 0.0; break;
      }
      const std::size_t a = n_ + m_ + r;
      lower_[a] = 0.0;
      upper_[a] = kInf;
    }
    binv_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    for (std::size_t r = 0; r < m_; ++r) {
      double residual = problem_.rhs[r];
      for (std::size_t j = 0; j < n_; ++j) residual -= at(r, j) * x_[j];
      art_sign_[r] = residual >= 0.0 ? 1.0 : -1.0;
      const std::size_t a = n_ + m_ + r;
      x_[a] = std::abs(residual);
      state_[a] = State::basic;
      basis_[r] = a;
      binv_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) = art_sign_[r];
    }
  }

  LpResult run() {
    LpResult result;
    // Phase 1: minimize the sum of artificials.
    for (std::size_t r = 0; r < m_; ++r) cost_[n_ + m_ + r] = 1.0;
    LpStatus status = iterate();
    if (status == LpStatus::iteration_limit || status == LpStatus::unbounded) {
      result.status = LpStatus::iteration_limit;
      result.iterations = iterations_;
      return result;
    }
    double worst_artificial = 0.0;
    for (std::size_t r = 0; r < m_; ++r) worst_artificial = std::max(worst_artificial, x_[n_ + m_ + r]);
    if (worst_artificial > Tolerances::feasibility) {
      result.status = LpStatus::infeasible;
      result.iterations = iterations_;
      return result;
    }
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t a = n_ + m_ + r;
      upper_[a] = 0.0;
      cost_[a] = 0.0;
      if (state_[a] != State::basic) x_[a] = 0.0;
    }
    drive_out_artificials();

    // Phase 2.
    for (std::size_t j = 0; j < n_; ++j) cost_[j] = problem_.cost[j];
    bland_ = false;
    degenerate_ = 0;
    status = iterate();
    result.status = status;
    result.iterations = iterations_;
    if (status != LpStatus::optimal) return result;

    result.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    for (std::size_t j = 0; j < n_; ++j) result.x[j] = std::clamp(result.x[j], lower_[j], upper_[j]);
    result.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) result.objective += problem_.cost[j] * result.x[j];
    return result;
  }

 private:
  double at(std::size_t r, std::size_t j) const {
    return problem_.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
  }

  bool is_artificial(std::size_t j) const { return j >= n_ + m_; }

  /// B^{-1} a_j.
  Eigen::VectorXd ftran(std::size_t j) const {
    if (j < n_) return binv_ * problem_.matrix.col(static_cast<Eigen::Index>(j));
    if (j < n_ + m_) return binv_.col(static_cast<Eigen::Index>(j - n_));
    const std::size_t r = j - n_ - m_;
    return art_sign_[r] * binv_.col(static_cast<Eigen::Index>(r));
  }

  void refactor() {
    const auto m = static_cast<Eigen::Index>(m_);
    Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t j = basis_[r];
      const auto c = static_cast<Eigen::Index>(r);
      if (j < n_) {
        basis_matrix.col(c) = problem_.matrix.col(static_cast<Eigen::Index>(j));
      } else if (j < n_ + m_) {
        basis_matrix(static_cast<Eigen::Index>(j - n_), c) = 1.0;
      } else {
        basis_matrix(static_cast<Eigen::Index>(j - n_ - m_), c) = art_sign_[j - n_ - m_];
      }
    }
    binv_ = basis_matrix.partialPivLu().inverse();
    if (!binv_.allFinite()) throw NumericError("simplex basis became singular");
    since_refactor_ = 0;

    Eigen::VectorXd residual(m);
    for (std::size_t r = 0; r < m_; ++r) residual(static_cast<Eigen::Index>(r)) = problem_.rhs[r];
    for (std::size_t j = 0; j < total_; ++j) {
      if (state_[j] == State::basic || x_[j] == 0.0) continue;
      if (j < n_) {
        residual -= problem_.matrix.col(static_cast<Eigen::Index>(j)) * x_[j];
      } else if (j < n_ + m_) {
        residual(static_cast<Eigen::Index>(j - n_)) -= x_[j];
      } else {
        residual(static_cast<Eigen::Index>(j - n_ - m_)) -= art_sign_[j - n_ - m_] * x_[j];
      }
    }
    const Eigen::VectorXd xb = binv_ * residual;
    for (std::size_t r = 0; r < m_; ++r) x_[basis_[r]] = xb(static_cast<Eigen::Index>(r));
  }

  void pivot(std::size_t leave_row, std::size_t entering, const Eigen::VectorXd& alpha) {
    const auto lr = static_cast<Eigen::Index>(leave_row);
    const Eigen::RowVectorXd pivot_row = binv_.row(lr) / alpha(lr);
    binv_.noalias() -= alpha * pivot_row;
    binv_.row(lr) = pivot_row;
    basis_[leave_row] = entering;
    state_[entering] = State::basic;
    ++since_refactor_;
  }

  LpStatus iterate() {
    const auto m = static_cast<Eigen::Index>(m_);
    Eigen::VectorXd basic_cost(m);
    while (true) {
      if (++iterations_ > max_iterations_) return LpStatus::iteration_limit;
      if (since_refactor_ >= kRefactorInterval) refactor();

      for (std::size_t r = 0; r < m_; ++r) basic_cost(static_cast<Eigen::Index>(r)) = cost_[basis_[r]];
      const Eigen::VectorXd duals = binv_.transpose() * basic_cost;
      const Eigen::VectorXd priced = problem_.matrix.transpose() * duals;

      std::size_t entering = total_;
      double best_score = 0.0;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        if (state_[j] == State::basic || lower_[j] == upper_[j]) continue;
        const double reduced = cost_[j] - (j < n_ ? priced(static_cast<Eigen::Index>(j))
                                                  : duals(static_cast<Eigen::Index>(j - n_)));
        double score = 0.0;
        if (state_[j] == State::at_lower && reduced < -Tolerances::optimality) score = -reduced;
        if (state_[j] == State::at_upper && reduced > Tolerances::optimality) score = reduced;
        if (score == 0.0) continue;
        if (bland_) {
          entering = j;
          break;
        }
        if (score > best_score) {
          best_score = score;
          entering = j;
        }
      }
      if (entering == total_) return LpStatus::optimal;

      const double direction = state_[entering] == State::at_lower ? 1.0 : -1.0;
      const Eigen::VectorXd alpha = ftran(entering);

      double step = upper_[entering] - lower_[entering];
      std::size_t leave_row = m_;
      for (std::size_t r = 0; r < m_; ++r) {
        const double a = alpha(static_cast<Eigen::Index>(r));
        if (std::abs(a) <= Tolerances::pivot) continue;
        const std::size_t b = basis_[r];
        const double change = -direction * a;
        double limit;
        if (change < 0.0) {
          if (!std::isfinite(lower_[b])) continue;
          limit = (x_[b] - lower_[b]) / -change;
        } else {
          if (!std::isfinite(upper_[b])) continue;
          limit = (upper_[b] - x_[b]) / change;
        }
        limit = std::max(limit, 0.0);
        if (limit < step - kStepTie) {
          step = limit;
          leave_row = r;
        } else if (leave_row != m_ && std::abs(limit - step) <= kStepTie) {
          const bool better = bland_ ? basis_[r] < basis_[leave_row]
                                     : std::abs(a) > std::abs(alpha(static_cast<Eigen::Index>(leave_row)));
          if (better) {
            step = std::min(step, limit);
            leave_row = r;
          }
        }
      }
      if (!std::isfinite(step)) return LpStatus::unbounded;

      for (std::size_t r = 0; r < m_; ++r) {
        x_[basis_[r]] -= step * direction * alpha(static_cast<Eigen::Index>(r));
      }
      x_[entering] += direction * step;

      if (leave_row == m_) {
        // Bound flip: the entering column reaches its opposite bound.
        if (direction > 0) {
          x_[entering] = upper_[entering];
          state_[entering] = State::at_upper;
        } else {
          x_[entering] = lower_[entering];
          state_[entering] = State::at_lower;
        }
      } else {
        const std::size_t leaving = basis_[leave_row];
        const double change = -direction * alpha(static_cast<Eigen::Index>(leave_row));
        if (change < 0.0) {
          x_[leaving] = lower_[leaving];
          state_[leaving] = State::at_lower;
        } else {
          x_[leaving] = upper_[leaving];
          state_[leaving] = State::at_upper;
        }
        pivot(leave_row, entering, alpha);
      }

      if (step <= kStepTie) {
        if (++degenerate_ > kDegenerateBeforeBland) bland_ = true;
      } else {
        degenerate_ = 0;
        bland_ = false;
      }
    }
  }

  // After phase 1, swap zero-valued basic artificials for real columns where
  // the basis row allows it; rows that do not allow it are redundant.
  void drive_out_artificials() {
    bool changed = false;
    for (std::size_t r = 0; r < m_; ++r) {
      if (!is_artificial(basis_[r])) continue;
      const Eigen::RowVectorXd rho = binv_.row(static_cast<Eigen::Index>(r));
      const Eigen::VectorXd row_struct = problem_.matrix.transpose() * rho.transpose();
      std::size_t best = total_;
      double best_mag = 1e-7;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        if (state_[j] == State::basic) continue;
        const double val = j < n_ ? row_struct(static_cast<Eigen::Index>(j)) : rho(static_cast<Eigen::Index>(j - n_));
        if (std::abs(val) > best_mag) {
          best_mag = std::abs(val);
          best = j;
        }
      }
      if (best == total_) continue;
      const std::size_t leaving = basis_[r];
      state_[leaving] = State::at_lower;
      x_[leaving] = 0.0;
      pivot(r, best, ftran(best));
      changed = true;
    }
    if (changed) refactor();
  }

  const LpProblem& problem_;
  std::size_t m_;
  std::size_t n_;
  std::size_t total_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> x_;
  std::vector<double> cost_;
  std::vector<State> state_;
  std::vector<std::size_t> basis_;
  std::vector<double> art_sign_;
  Eigen::MatrixXd binv_;
  std::size_t since_refactor_ = 0;
  std::size_t iterations_ = 0;
  std::size_t max_iterations_;
  std::size_t degenerate_ = 0;
  bool bland_ = false;
};

}  // namespace

LpProblem make_lp(const MipModel& model) {
  model.validate();
  LpProblem lp;
  const std::size_t n = model.n_variables();
  const double sign = model.sense() == Sense::maximize ? -1.0 : 1.0;
  lp.cost.resize(n);
  for (std::size_t j = 0; j < n; ++j) lp.cost[j] = sign * model.objective()[j];
  for (const auto& var : model.variables()) {
    lp.lower.push_back(var.lower);
    lp.upper.push_back(var.upper);
  }

  std::vector<std::vector<double>> kept_rows;
  std::vector<double> dense(n);
  for (const auto& row : model.constraints()) {
    std::fill(dense.begin(), dense.end(), 0.0);
    for (const auto& term : row.terms) dense[term.column] += term.coefficient;
    std::size_t nnz = 0;
    std::size_t single = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (dense[j] != 0.0) {
        ++nnz;
        single = j;
      }
    }
    if (nnz == 0) {
      const double slack = row.rhs;
      const bool ok = (row.comparator == Comparator::less_equal && slack >= -Tolerances::feasibility) ||
                      (row.comparator == Comparator::greater_equal && slack <= Tolerances::feasibility) ||
                      (row.comparator == Comparator::equal && std::abs(slack) <= Tolerances::feasibility);
      if (!ok) lp.trivially_infeasible = true;
      continue;
    }
    if (nnz == 1) {
      const double a = dense[single];
      const double bound = row.rhs / a;
      Comparator cmp = row.comparator;
      if (a < 0.0 && cmp != Comparator::equal) {
        cmp = cmp == Comparator::less_equal ? Comparator::greater_equal : Comparator::less_equal;
      }
      if (cmp != Comparator::greater_equal) lp.upper[single] = std::min(lp.upper[single], bound);
      if (cmp != Comparator::less_equal) lp.lower[single] = std::max(lp.lower[single], bound);
      continue;
    }
    kept_rows.push_back(dense);
    lp.rhs.push_back(row.rhs);
    lp.comparators.push_back(row.comparator);
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (model.variables()[j].kind == VarKind::binary) {
      lp.lower[j] = std::ceil(lp.lower[j] - Tolerances::integrality);
      lp.upper[j] = std::floor(lp.upper[j] + Tolerances::integrality);
    }
    if (lp.lower[j] > lp.upper[j] + Tolerances::feasibility) lp.trivially_infeasible = true;
    if (lp.lower[j] > lp.upper[j]) lp.lower[j] = lp.upper[j];
  }
  lp.matrix.resize(static_cast<Eigen::Index>(kept_rows.size()), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < kept_rows.size(); ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      lp.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = kept_rows[r][j];
    }
  }
  return lp;
}

LpResult solve_dense_lp(const LpProblem& problem, std::span<const double> lower,
                        std::span<const double> upper) {
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (lower[j] > upper[j] + Tolerances::feasibility) return {LpStatus::infeasible, {}, 0.0, 0};
  }
  if (problem.trivially_infeasible) return {LpStatus::infeasible, {}, 0.0, 0};
  DenseSimplex simplex(problem, lower, upper);
  return simplex.run();
}

}  // namespace matchbound::detail
