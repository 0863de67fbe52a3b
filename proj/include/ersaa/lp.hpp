#ifndef ERSAA_LP_HPP
#define ERSAA_LP_HPP

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <vector>

#include "ersaa/types.hpp"

namespace ersaa {

// Bounded-variable standard form: minimize c'v subject to Av = b, l <= v <= u.
struct LpProblem {
  Vector objective;
  Matrix eq_matrix;
  Vector eq_rhs;
  Vector lower;
  Vector upper;

  LpProblem() = default;
  LpProblem(Vector c, Matrix a, Vector b, Vector lo, Vector hi)
      : objective(std::move(c)),
        eq_matrix(std::move(a)),
        eq_rhs(std::move(b)),
        lower(std::move(lo)),
        upper(std::move(hi)) {
    validate();
  }

  Index rows() const { return eq_matrix.rows(); }
  Index cols() const { return eq_matrix.cols(); }

  void validate() const {
    const Index m = eq_matrix.rows(), p = eq_matrix.cols();
    if (objective.size() != p || lower.size() != p || upper.size() != p)
      throw DimensionMismatch("lp: column data lengths differ");
    if (eq_rhs.size() != m) throw DimensionMismatch("lp: rhs length");
    for (Index j = 0; j < p; ++j)
      if (lower(j) > upper(j)) throw DomainError("lp: lower bound above upper bound");
    for (Index i = 0; i < m; ++i) {
      if (eq_matrix.row(i).cwiseAbs().maxCoeff() < 1e-300 && std::abs(eq_rhs(i)) > 1e-300)
        throw DomainError("lp: all-zero row with nonzero rhs");
    }
  }
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
  LpStatus status = LpStatus::optimal;
  double objective_value = 0.0;
  Vector primal;
  Vector dual;
  Vector reduced_costs;
  // Final basis, one structural column index per row; -1 marks a slot still
  // held by a phase-1 artificial.
  std::vector<Index> basis_columns;
};

namespace lpdetail {

enum class VarState : unsigned char { basic, at_lower, at_upper, free_nonbasic };

// Revised simplex with a dense LU of the basis plus product-form eta updates,
// refactorized every 100 pivots. Dantzig pricing with lowest-index tie breaks;
// Bland's rule engaged after 3(m+p) degenerate pivots to guarantee
// termination.
class Simplex {
 public:
  explicit Simplex(const LpProblem& p)
      : prob_(p), m_(p.rows()), n_struct_(p.cols()), n_total_(p.cols() + p.rows()) {
    if (!p.objective.allFinite())
      throw DomainError("lp: non-finite objective");
    if (!p.eq_matrix.allFinite() || !p.eq_rhs.allFinite())
      throw DomainError("lp: non-finite constraint data");
  }

  LpSolution solve() {
    setup_phase1();
    run(phase1_cost_, /*phase2=*/false);
    double bmax = m_ > 0 ? prob_.eq_rhs.cwiseAbs().maxCoeff() : 0.0;
    if (phase_objective(phase1_cost_) > feas_tol_ * (1.0 + bmax)) {
      LpSolution s;
      s.status = LpStatus::infeasible;
      return s;
    }
    // Artificials are pinned at zero for phase 2; any that stay basic sit at
    // value zero and can only leave.
    for (Index j = n_struct_; j < n_total_; ++j) {
      lower_[j] = 0.0;
      upper_[j] = 0.0;
      if (state_[j] != VarState::basic) {
        state_[j] = VarState::at_lower;
        x_[j] = 0.0;
      }
    }
    Vector cost = Vector::Zero(n_total_);
    cost.head(n_struct_) = prob_.objective;
    degen_count_ = 0;
    bland_ = false;
    bool bounded = run(cost, /*phase2=*/true);
    LpSolution s;
    if (!bounded) {
      s.status = LpStatus::unbounded;
      return s;
    }
    s.status = LpStatus::optimal;
    s.primal = x_.head(n_struct_);
    s.objective_value = prob_.objective.dot(s.primal);
    Vector cb(m_);
    for (Index i = 0; i < m_; ++i) cb(i) = cost(basis_[static_cast<std::size_t>(i)]);
    s.dual = btran(cb);
    s.reduced_costs.resize(n_struct_);
    for (Index j = 0; j < n_struct_; ++j)
      s.reduced_costs(j) = prob_.objective(j) - s.dual.dot(prob_.eq_matrix.col(j));
    s.basis_columns.reserve(static_cast<std::size_t>(m_));
    for (Index i = 0; i < m_; ++i) {
      Index j = basis_[static_cast<std::size_t>(i)];
      s.basis_columns.push_back(j < n_struct_ ? j : -1);
    }
    return s;
  }

 private:
  const LpProblem& prob_;
  Index m_, n_struct_, n_total_;

  std::vector<Index> basis_;
  std::vector<VarState> state_;
  Vector x_;
  Vector lower_, upper_;
  Vector art_sign_;
  Vector phase1_cost_;

  Eigen::PartialPivLU<Matrix> base_lu_;
  struct Eta {
    Index row;
    Vector w;
  };
  std::vector<Eta> etas_;
  int pivots_since_refactor_ = 0;
  long degen_count_ = 0;
  bool bland_ = false;

  static constexpr double opt_tol_ = 1e-9;
  static constexpr double feas_tol_ = 1e-7;
  static constexpr double pivot_tol_ = 1e-10;
  static constexpr double degen_tol_ = 1e-12;

  Vector column(Index j) const {
    if (j < n_struct_) return prob_.eq_matrix.col(j);
    Vector e = Vector::Zero(m_);
    e(j - n_struct_) = art_sign_(j - n_struct_);
    return e;
  }

  void setup_phase1() {
    lower_.resize(n_total_);
    upper_.resize(n_total_);
    lower_.head(n_struct_) = prob_.lower;
    upper_.head(n_struct_) = prob_.upper;
    lower_.tail(m_).setZero();
    upper_.tail(m_).setConstant(kInf);

    x_ = Vector::Zero(n_total_);
    state_.assign(static_cast<std::size_t>(n_total_), VarState::at_lower);
    for (Index j = 0; j < n_struct_; ++j) {
      if (std::isfinite(lower_(j))) {
        state_[static_cast<std::size_t>(j)] = VarState::at_lower;
        x_(j) = lower_(j);
      } else if (std::isfinite(upper_(j))) {
        state_[static_cast<std::size_t>(j)] = VarState::at_upper;
        x_(j) = upper_(j);
      } else {
        state_[static_cast<std::size_t>(j)] = VarState::free_nonbasic;
        x_(j) = 0.0;
      }
    }
    Vector r = prob_.eq_rhs;
    for (Index j = 0; j < n_struct_; ++j)
      if (x_(j) != 0.0) r -= prob_.eq_matrix.col(j) * x_(j);
    art_sign_.resize(m_);
    basis_.resize(static_cast<std::size_t>(m_));
    for (Index i = 0; i < m_; ++i) {
      art_sign_(i) = r(i) >= 0 ? 1.0 : -1.0;
      Index j = n_struct_ + i;
      basis_[static_cast<std::size_t>(i)] = j;
      state_[static_cast<std::size_t>(j)] = VarState::basic;
      x_(j) = std::abs(r(i));
    }
    phase1_cost_ = Vector::Zero(n_total_);
    phase1_cost_.tail(m_).setOnes();
    degen_count_ = 0;
    bland_ = false;
    refactor();
  }

  double phase_objective(const Vector& cost) const {
    double v = 0.0;
    for (Index j = 0; j < n_total_; ++j) v += cost(j) * x_(j);
    return v;
  }

  void refactor() {
    if (m_ > 0) {
      Matrix b(m_, m_);
      for (Index i = 0; i < m_; ++i) b.col(i) = column(basis_[static_cast<std::size_t>(i)]);
      base_lu_.compute(b);
      Vector diag = base_lu_.matrixLU().diagonal().cwiseAbs();
      double dmax = diag.maxCoeff();
      double dmin = diag.minCoeff();
      if (dmin <= 0.0 || dmax / dmin > 1e14)
        throw NumericalBreakdown("lp: basis condition estimate exceeds 1e14");
    }
    etas_.clear();
    pivots_since_refactor_ = 0;
    if (m_ == 0) return;
    // Recompute basic values from scratch to shed accumulated drift.
    Vector r = prob_.eq_rhs;
    for (Index j = 0; j < n_total_; ++j)
      if (state_[static_cast<std::size_t>(j)] != VarState::basic && x_(j) != 0.0)
        r -= column(j) * x_(j);
    Vector xb = base_lu_.solve(r);
    for (Index i = 0; i < m_; ++i) x_(basis_[static_cast<std::size_t>(i)]) = xb(i);
  }

  Vector ftran(Vector v) const {
    if (m_ == 0) return v;
    Vector y = base_lu_.solve(v);
    for (const Eta& e : etas_) {
      double t = y(e.row) / e.w(e.row);
      y -= t * e.w;
      y(e.row) = t;
    }
    return y;
  }

  Vector btran(Vector v) const {
    if (m_ == 0) return v;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double dot = it->w.dot(v);
      v(it->row) = (v(it->row) - (dot - it->w(it->row) * v(it->row))) / it->w(it->row);
    }
    return base_lu_.transpose().solve(v);
  }

  // Returns false when the problem is unbounded in this phase.
  bool run(const Vector& cost, bool phase2) {
    const long pivot_limit = 20000 + 200L * static_cast<long>(m_ + n_total_);
    Vector cb(m_);
    for (long iter = 0; iter < pivot_limit; ++iter) {
      for (Index i = 0; i < m_; ++i) cb(i) = cost(basis_[static_cast<std::size_t>(i)]);
      Vector lambda = btran(cb);

      Index enter = -1;
      double best_score = opt_tol_;
      int enter_dir = 0;
      for (Index j = 0; j < n_total_; ++j) {
        VarState st = state_[static_cast<std::size_t>(j)];
        if (st == VarState::basic) continue;
        if (lower_(j) == upper_(j)) continue;  // fixed (phase-2 artificials)
        double d = cost(j) - lambda.dot(column(j));
        int dir = 0;
        double score = 0.0;
        if (st == VarState::at_lower && d < -opt_tol_) {
          dir = +1;
          score = -d;
        } else if (st == VarState::at_upper && d > opt_tol_) {
          dir = -1;
          score = d;
        } else if (st == VarState::free_nonbasic && std::abs(d) > opt_tol_) {
          dir = d < 0 ? +1 : -1;
          score = std::abs(d);
        } else {
          continue;
        }
        if (bland_) {
          enter = j;
          enter_dir = dir;
          break;
        }
        if (score > best_score) {
          best_score = score;
          enter = j;
          enter_dir = dir;
        }
      }
      if (enter < 0) return true;  // phase optimal

      Vector w = ftran(column(enter));

      // Ratio test over basic bounds plus the entering variable's own span.
      double t_max = kInf;
      Index leave_slot = -1;
      double own_span = upper_(enter) - lower_(enter);
      bool own_blocks = std::isfinite(own_span);
      if (own_blocks) t_max = own_span;
      for (Index i = 0; i < m_; ++i) {
        double rate = -enter_dir * w(i);
        if (std::abs(rate) <= pivot_tol_) continue;
        Index k = basis_[static_cast<std::size_t>(i)];
        double t;
        if (rate > 0) {
          if (!std::isfinite(upper_(k))) continue;
          t = (upper_(k) - x_(k)) / rate;
        } else {
          if (!std::isfinite(lower_(k))) continue;
          t = (lower_(k) - x_(k)) / rate;
        }
        if (t < 0) t = 0;
        bool better;
        if (t < t_max - degen_tol_) {
          better = true;
        } else if (t <= t_max + degen_tol_ && leave_slot >= 0) {
          // Tie: lowest variable index for Bland, largest pivot otherwise.
          Index cur = basis_[static_cast<std::size_t>(leave_slot)];
          better = bland_ ? k < cur
                          : std::abs(w(i)) >
                                std::abs(w(leave_slot)) + 1e-15;
        } else {
          better = t < t_max;
        }
        if (better) {
          t_max = std::min(t_max, std::max(t, 0.0));
          leave_slot = i;
        }
      }

      if (!std::isfinite(t_max)) {
        if (phase2) return false;  // unbounded
        throw NumericalBreakdown("lp: phase-1 ray; inconsistent state");
      }

      if (t_max <= degen_tol_) {
        ++degen_count_;
        if (degen_count_ >= 3 * static_cast<long>(m_ + n_total_)) bland_ = true;
      }

      // Apply the step.
      double step = enter_dir * t_max;
      x_(enter) += step;
      for (Index i = 0; i < m_; ++i) x_(basis_[static_cast<std::size_t>(i)]) -= step * w(i);

      if (leave_slot < 0) {
        // Entering variable ran to its opposite bound; no basis change.
        state_[static_cast<std::size_t>(enter)] =
            enter_dir > 0 ? VarState::at_upper : VarState::at_lower;
        x_(enter) = enter_dir > 0 ? upper_(enter) : lower_(enter);
        continue;
      }

      Index leave = basis_[static_cast<std::size_t>(leave_slot)];
      double rate = -enter_dir * w(leave_slot);
      state_[static_cast<std::size_t>(leave)] =
          rate > 0 ? VarState::at_upper : VarState::at_lower;
      x_(leave) = rate > 0 ? upper_(leave) : lower_(leave);
      state_[static_cast<std::size_t>(enter)] = VarState::basic;
      basis_[static_cast<std::size_t>(leave_slot)] = enter;
      etas_.push_back({leave_slot, std::move(w)});
      if (++pivots_since_refactor_ >= 100) refactor();
    }
    throw NumericalBreakdown("lp: pivot limit exceeded");
  }
};

}  // namespace lpdetail

inline LpSolution solve_lp(const LpProblem& problem) {
  lpdetail::Simplex s(problem);
  return s.solve();
}

// Fixed-point dump for bug reports.
inline void write_lp_debug(const LpProblem& p, std::ostream& out) {
  out << std::fixed << std::setprecision(12);
  out << "lp " << p.rows() << " rows " << p.cols() << " cols\n";
  out << "objective";
  for (Index j = 0; j < p.cols(); ++j) out << " " << p.objective(j);
  out << "\nrhs";
  for (Index i = 0; i < p.rows(); ++i) out << " " << p.eq_rhs(i);
  out << "\nlower";
  for (Index j = 0; j < p.cols(); ++j) out << " " << p.lower(j);
  out << "\nupper";
  for (Index j = 0; j < p.cols(); ++j) out << " " << p.upper(j);
  out << "\n";
  for (Index i = 0; i < p.rows(); ++i) {
    out << "row " << i;
    for (Index j = 0; j < p.cols(); ++j) out << " " << p.eq_matrix(i, j);
    out << "\n";
  }
}

}  // namespace ersaa

#endif  // ERSAA_LP_HPP
