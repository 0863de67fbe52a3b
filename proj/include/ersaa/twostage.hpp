#ifndef ERSAA_TWOSTAGE_HPP
#define ERSAA_TWOSTAGE_HPP

#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ersaa/lp.hpp"
#include "ersaa/scenario.hpp"

namespace ersaa {

// Two-stage stochastic LP with fixed recourse:
//   min  c_z' z + E[ V(z, Y) ],   V(z, y) = min { c_v' v : W v = h(y) - T z, v >= 0 }
// First-stage feasible set is an LpProblem skeleton whose leading d_z columns
// are z (the skeleton's objective is ignored; extra columns are slacks).
struct TwoStageLp {
  Vector c_z;
  Index d_z = 0;
  LpProblem first_stage;
  Matrix W;         // m2 x d_v
  Matrix T;         // m2 x d_z
  Vector c_v;       // d_v
  Matrix h_matrix;  // m2 x d_y
  Vector h_offset;  // m2

  Index m2() const { return W.rows(); }
  Index dv() const { return W.cols(); }
  Index dy() const { return h_matrix.cols(); }

  Vector h(const Vector& y) const {
    if (y.size() != h_matrix.cols()) throw DimensionMismatch("h(y): length");
    return h_matrix * y + h_offset;
  }

  Vector recourse_rhs(const Vector& z, const Vector& y) const {
    if (z.size() != d_z) throw DimensionMismatch("recourse_rhs: z length");
    return h(y) - T * z;
  }

  void validate() const {
    if (c_z.size() != d_z || T.cols() != d_z) throw DimensionMismatch("two-stage: d_z");
    if (T.rows() != W.rows() || h_matrix.rows() != W.rows() || h_offset.size() != W.rows())
      throw DimensionMismatch("two-stage: row counts");
    if (c_v.size() != W.cols()) throw DimensionMismatch("two-stage: c_v length");
    if (first_stage.cols() < d_z)
      throw DimensionMismatch("two-stage: first stage narrower than z");
    Eigen::ColPivHouseholderQR<Matrix> qr(W.transpose());
    qr.setThreshold(1e-10);
    if (qr.rank() < W.rows()) throw RankDeficient("two-stage: W lacks full row rank");
    // Dual feasibility { lambda : lambda' W <= c_v } checked by one LP.
    const Index m = W.rows(), dv = W.cols();
    Matrix a(dv, m + dv);
    a.leftCols(m) = W.transpose();
    a.rightCols(dv) = Matrix::Identity(dv, dv);
    Vector lo(m + dv), hi(m + dv);
    lo.head(m).setConstant(-kInf);
    hi.head(m).setConstant(kInf);
    lo.tail(dv).setZero();
    hi.tail(dv).setConstant(kInf);
    LpProblem feas(Vector::Zero(m + dv), a, c_v, lo, hi);
    if (solve_lp(feas).status != LpStatus::optimal)
      throw DomainError("two-stage: dual feasible set is empty");
  }
};

struct SolveResult {
  Vector z_star;
  double objective = 0.0;  // incumbent upper bound
  long iterations = 0;
  long cuts = 0;
  bool converged = true;
  double gap = 0.0;
  double lower_bound = -kInf;
};

struct RecourseValue {
  double value = 0.0;
  Vector dual;
};

namespace tsdetail {

// Scenario rows merged by bitwise equality; weights renormalized so a fully
// collapsed set carries weight exactly 1.
struct Dedup {
  Matrix points;
  Vector weights;
};

inline Dedup dedup_scenarios(const ScenarioSet& s) {
  std::map<std::string, Index> seen;
  std::vector<Index> group_of(static_cast<std::size_t>(s.size()));
  std::vector<Index> first_row;
  for (Index i = 0; i < s.size(); ++i) {
    std::string key(static_cast<std::size_t>(s.dy()) * sizeof(double), '\0');
    for (Index j = 0; j < s.dy(); ++j) {
      double v = s.points(i, j);
      std::memcpy(key.data() + static_cast<std::size_t>(j) * sizeof(double), &v, sizeof(double));
    }
    auto [it, inserted] = seen.emplace(std::move(key), static_cast<Index>(first_row.size()));
    if (inserted) first_row.push_back(i);
    group_of[static_cast<std::size_t>(i)] = it->second;
  }
  Dedup d;
  d.points.resize(static_cast<Index>(first_row.size()), s.dy());
  d.weights = Vector::Zero(static_cast<Index>(first_row.size()));
  for (std::size_t g = 0; g < first_row.size(); ++g)
    d.points.row(static_cast<Index>(g)) = s.points.row(first_row[g]);
  for (Index i = 0; i < s.size(); ++i) d.weights(group_of[static_cast<std::size_t>(i)]) += s.weights(i);
  double total = d.weights.sum();
  if (total > 0) d.weights /= total;
  return d;
}

}  // namespace tsdetail

// Solves second-stage LPs for a fixed model, reusing optimal bases across
// right-hand sides. A pooled basis is dual feasible by construction, so it is
// optimal for any rhs at which it is primal feasible; only the feasibility
// check is needed on a hit.
class RecourseSolver {
 public:
  explicit RecourseSolver(const TwoStageLp& model) : model_(&model) {}

  RecourseValue solve(const Vector& z, const Vector& y) {
    return solve_rhs(model_->recourse_rhs(z, y));
  }

  // A pooled basis is dual feasible regardless of the rhs, so by weak duality
  // any pooled basis that turns out primal feasible here is optimal. Entries
  // are tried in decreasing dual-objective order: the maximizer is the likely
  // optimal basis. Tie order is insertion order, keeping results a pure
  // function of the call history.
  RecourseValue solve_rhs(const Vector& rhs) {
    const std::size_t np = pool_.size();
    scores_.resize(np);
    tried_.assign(np, false);
    for (std::size_t i = 0; i < np; ++i) scores_[i] = pool_[i].dual.dot(rhs);
    for (std::size_t round = 0; round < np; ++round) {
      std::size_t best = np;
      for (std::size_t i = 0; i < np; ++i)
        if (!tried_[i] && (best == np || scores_[i] > scores_[best])) best = i;
      if (best == np) break;
      tried_[best] = true;
      if (auto hit = try_entry(best, rhs)) return *hit;
    }
    return cold_solve(rhs);
  }

 private:
  struct PoolEntry {
    std::vector<Index> basis;
    Eigen::PartialPivLU<Matrix> lu;
    Vector dual;
    Vector cb;
  };

  const TwoStageLp* model_;
  std::vector<PoolEntry> pool_;
  std::vector<double> scores_;
  std::vector<char> tried_;

  std::optional<RecourseValue> try_entry(std::size_t i, const Vector& rhs) const {
    const PoolEntry& e = pool_[i];
    Vector xb = e.lu.solve(rhs);
    if ((xb.array() >= -1e-9).all()) return RecourseValue{e.cb.dot(xb), e.dual};
    return std::nullopt;
  }

  RecourseValue cold_solve(const Vector& rhs) {
    const Index m = model_->m2(), dv = model_->dv();
    LpProblem p(model_->c_v, model_->W, rhs, Vector::Zero(dv), Vector::Constant(dv, kInf));
    LpSolution sol = solve_lp(p);
    if (sol.status == LpStatus::infeasible)
      throw RecourseInfeasible("second stage infeasible; complete recourse violated");
    if (sol.status == LpStatus::unbounded)
      throw NumericalBreakdown("second stage unbounded; dual set should be nonempty");

    // Pool the final basis unless a phase-1 artificial is still in it.
    std::vector<Index> basis = sol.basis_columns;
    std::sort(basis.begin(), basis.end());
    if (!basis.empty() && basis.front() < 0) basis.clear();
    if (!basis.empty()) {
      PoolEntry e;
      e.basis = basis;
      Matrix b(m, m);
      for (Index i = 0; i < m; ++i) b.col(i) = model_->W.col(basis[static_cast<std::size_t>(i)]);
      e.lu.compute(b);
      e.cb.resize(m);
      for (Index i = 0; i < m; ++i) e.cb(i) = model_->c_v(basis[static_cast<std::size_t>(i)]);
      e.dual = e.lu.transpose().solve(e.cb);
      Vector xb = e.lu.solve(rhs);
      if ((xb.array() >= -1e-9).all()) {
        double value = e.cb.dot(xb);
        Vector dual = e.dual;
        if (!already_pooled(e.basis)) pool_.push_back(std::move(e));
        return {value, std::move(dual)};
      }
    }
    return {sol.objective_value, sol.dual};
  }

  bool already_pooled(const std::vector<Index>& basis) const {
    for (const auto& e : pool_)
      if (e.basis == basis) return true;
    return false;
  }
};

inline RecourseValue second_stage_value(const TwoStageLp& model, const Vector& z,
                                        const Vector& y) {
  RecourseSolver s(model);
  return s.solve(z, y);
}

inline double cost(const TwoStageLp& model, const Vector& z, const Vector& y) {
  return model.c_z.dot(z) + second_stage_value(model, z, y).value;
}

// Weighted SAA objective at a fixed first-stage decision. Always evaluates
// through a fresh recourse solver so the result is a pure function of its
// arguments.
inline double saa_objective(const TwoStageLp& model, const ScenarioSet& scenarios,
                            const Vector& z) {
  auto d = tsdetail::dedup_scenarios(scenarios);
  RecourseSolver solver(model);
  double total = 0.0;
  for (Index g = 0; g < d.points.rows(); ++g) {
    double v = solver.solve(z, d.points.row(g).transpose()).value;
    total += d.weights(g) * v;
  }
  return model.c_z.dot(z) + total;
}

namespace tsdetail {

// Master/extensive assembly shares the first-stage block layout:
// [first-stage columns | extras], with z as the leading d_z columns.
inline void fill_first_stage(const TwoStageLp& model, Matrix& a, Vector& b, Vector& lo,
                             Vector& hi, Vector& c) {
  const LpProblem& fs = model.first_stage;
  const Index r1 = fs.rows(), p1 = fs.cols();
  a.setZero();
  if (r1 > 0) {
    a.topLeftCorner(r1, p1) = fs.eq_matrix;
    b.head(r1) = fs.eq_rhs;
  }
  lo.setConstant(-kInf);
  hi.setConstant(kInf);
  lo.head(p1) = fs.lower;
  hi.head(p1) = fs.upper;
  c.setZero();
  c.head(model.d_z) = model.c_z;
}

}  // namespace tsdetail

inline SolveResult solve_extensive(const TwoStageLp& model, const ScenarioSet& scenarios,
                                   Index variable_cap = 200000) {
  if (scenarios.size() < 1) throw EmptyInput("solve_extensive: no scenarios");
  auto d = tsdetail::dedup_scenarios(scenarios);
  const Index s = d.points.rows();
  const Index p1 = model.first_stage.cols(), r1 = model.first_stage.rows();
  const Index m2 = model.m2(), dv = model.dv();
  const Index cols = p1 + s * dv;
  const Index rows = r1 + s * m2;
  if (cols > variable_cap)
    throw SizeCapExceeded("solve_extensive: " + std::to_string(cols) + " variables exceed cap");

  Matrix a = Matrix::Zero(rows, cols);
  Vector b = Vector::Zero(rows);
  Vector lo(cols), hi(cols), c(cols);
  tsdetail::fill_first_stage(model, a, b, lo, hi, c);
  for (Index i = 0; i < s; ++i) {
    const Index row0 = r1 + i * m2, col0 = p1 + i * dv;
    a.block(row0, 0, m2, model.d_z) = model.T;
    a.block(row0, col0, m2, dv) = model.W;
    b.segment(row0, m2) = model.h(d.points.row(i).transpose());
    lo.segment(col0, dv).setZero();
    hi.segment(col0, dv).setConstant(kInf);
    c.segment(col0, dv) = d.weights(i) * model.c_v;
  }
  LpSolution sol = solve_lp(LpProblem(std::move(c), std::move(a), std::move(b), std::move(lo),
                                      std::move(hi)));
  if (sol.status == LpStatus::infeasible)
    throw RecourseInfeasible("solve_extensive: infeasible deterministic equivalent");
  if (sol.status == LpStatus::unbounded)
    throw NumericalBreakdown("solve_extensive: unbounded; is the first stage compact?");
  SolveResult r;
  r.z_star = sol.primal.head(model.d_z);
  r.objective = sol.objective_value;
  r.lower_bound = sol.objective_value;
  r.iterations = 1;
  return r;
}

// Single-cut L-shaped method. Optimality cuts come from second-stage duals;
// complete recourse means feasibility cuts are never needed (asserted by the
// RecourseInfeasible error path).
inline SolveResult solve_lshaped(const TwoStageLp& model, const ScenarioSet& scenarios,
                                 double tol = 1e-9, long max_iter = 500) {
  if (!(tol > 0)) throw DomainError("solve_lshaped: tol must be positive");
  if (scenarios.size() < 1) throw EmptyInput("solve_lshaped: no scenarios");
  auto d = tsdetail::dedup_scenarios(scenarios);
  const Index s = d.points.rows();
  const Index p1 = model.first_stage.cols(), r1 = model.first_stage.rows();

  std::vector<Vector> h_cache(static_cast<std::size_t>(s));
  for (Index i = 0; i < s; ++i)
    h_cache[static_cast<std::size_t>(i)] = model.h(d.points.row(i).transpose());

  struct Cut {
    double alpha;
    Vector beta;  // theta >= alpha + beta' z
  };
  std::vector<Cut> cuts;

  auto solve_master = [&](bool with_theta) -> std::pair<Vector, double> {
    const Index ncuts = with_theta ? static_cast<Index>(cuts.size()) : 0;
    const Index cols = p1 + (with_theta ? 1 : 0) + ncuts;
    const Index rows = r1 + ncuts;
    Matrix a = Matrix::Zero(rows, cols);
    Vector b = Vector::Zero(rows);
    Vector lo(cols), hi(cols), c(cols);
    tsdetail::fill_first_stage(model, a, b, lo, hi, c);
    if (with_theta) {
      const Index th = p1;
      c(th) = 1.0;
      lo(th) = -kInf;
      hi(th) = kInf;
      for (Index t = 0; t < ncuts; ++t) {
        const auto& cut = cuts[static_cast<std::size_t>(t)];
        a.block(r1 + t, 0, 1, model.d_z) = -cut.beta.transpose();
        a(r1 + t, th) = 1.0;
        a(r1 + t, p1 + 1 + t) = -1.0;  // surplus
        b(r1 + t) = cut.alpha;
        lo(p1 + 1 + t) = 0.0;
        hi(p1 + 1 + t) = kInf;
        c(p1 + 1 + t) = 0.0;
      }
    }
    LpSolution sol = solve_lp(LpProblem(std::move(c), std::move(a), std::move(b), std::move(lo),
                                        std::move(hi)));
    if (sol.status == LpStatus::infeasible)
      throw RecourseInfeasible("solve_lshaped: first-stage problem infeasible");
    if (sol.status == LpStatus::unbounded)
      throw NumericalBreakdown("solve_lshaped: unbounded master; is Z compact?");
    return {sol.primal.head(model.d_z), sol.objective_value};
  };

  RecourseSolver recourse(model);
  Vector z = solve_master(false).first;
  double lower = -kInf;
  double best_upper = kInf;
  Vector best_z = z;
  SolveResult res;
  for (long it = 1; it <= max_iter; ++it) {
    double expected = 0.0;
    double alpha = 0.0;
    Vector agg_dual = Vector::Zero(model.m2());
    for (Index i = 0; i < s; ++i) {
      Vector rhs = h_cache[static_cast<std::size_t>(i)] - model.T * z;
      RecourseValue rv = recourse.solve_rhs(rhs);
      expected += d.weights(i) * rv.value;
      alpha += d.weights(i) * rv.dual.dot(h_cache[static_cast<std::size_t>(i)]);
      agg_dual += d.weights(i) * rv.dual;
    }
    double upper = model.c_z.dot(z) + expected;
    if (upper < best_upper) {
      best_upper = upper;
      best_z = z;
    }
    Vector beta = -model.T.transpose() * agg_dual;
    cuts.push_back({alpha, beta});

    auto [z_new, master_obj] = solve_master(true);
    lower = std::max(lower, master_obj);  // cut accumulation: nondecreasing
    res.iterations = it;
    res.cuts = static_cast<long>(cuts.size());
    double gap = (best_upper - lower) / std::max(1.0, std::abs(best_upper));
    res.gap = gap;
    if (gap <= tol) {
      res.converged = true;
      break;
    }
    res.converged = false;
    z = z_new;
  }
  res.z_star = best_z;
  res.objective = best_upper;
  res.lower_bound = lower;
  return res;
}

// ---------------------------------------------------------------------------
// Plain-text serialization

namespace tsdetail {

inline void write_vector(std::ostream& out, const char* name, const Vector& v) {
  out << name << "\n";
  for (Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << format_double(v(i));
  out << "\n";
}

inline void write_matrix(std::ostream& out, const char* name, const Matrix& m) {
  out << name << " " << m.rows() << " " << m.cols() << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << format_double(m(i, j));
    out << "\n";
  }
}

class BlockReader {
 public:
  explicit BlockReader(std::istream& in) : in_(in) {}

  std::string next_token() {
    std::string t;
    if (!(in_ >> t)) throw IoError("instance format: unexpected end of file");
    return t;
  }

  void expect(const std::string& tok) {
    std::string t = next_token();
    if (t != tok) throw IoError("instance format: expected '" + tok + "', got '" + t + "'");
  }

  long integer() {
    std::string t = next_token();
    try {
      return std::stol(t);
    } catch (...) {
      throw IoError("instance format: expected integer, got '" + t + "'");
    }
  }

  std::uint64_t u64() {
    std::string t = next_token();
    try {
      return std::stoull(t);
    } catch (...) {
      throw IoError("instance format: expected unsigned integer, got '" + t + "'");
    }
  }

  Vector vector(const std::string& name, Index len) {
    expect(name);
    Vector v(len);
    for (Index i = 0; i < len; ++i) v(i) = parse_double(next_token());
    return v;
  }

  Matrix matrix(const std::string& name) {
    expect(name);
    Index rows = integer(), cols = integer();
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = parse_double(next_token());
    return m;
  }

 private:
  std::istream& in_;
};

}  // namespace tsdetail

inline void write_two_stage(const TwoStageLp& model, std::ostream& out,
                            const std::vector<std::string>& meta = {}) {
  out << "ersaa-two-stage v1\n";
  out << "dims " << model.d_z << " " << model.m2() << " " << model.dv() << " " << model.dy()
      << "\n";
  tsdetail::write_vector(out, "c_z", model.c_z);
  out << "first_stage " << model.first_stage.rows() << " " << model.first_stage.cols() << "\n";
  tsdetail::write_vector(out, "fs_lower", model.first_stage.lower);
  tsdetail::write_vector(out, "fs_upper", model.first_stage.upper);
  tsdetail::write_matrix(out, "fs_matrix", model.first_stage.eq_matrix);
  tsdetail::write_vector(out, "fs_rhs", model.first_stage.eq_rhs);
  tsdetail::write_matrix(out, "W", model.W);
  tsdetail::write_matrix(out, "T", model.T);
  tsdetail::write_vector(out, "c_v", model.c_v);
  tsdetail::write_matrix(out, "h_matrix", model.h_matrix);
  tsdetail::write_vector(out, "h_offset", model.h_offset);
  for (const auto& m : meta) out << "meta " << m << "\n";
  out << "end\n";
}

inline TwoStageLp read_two_stage(std::istream& in) {
  tsdetail::BlockReader r(in);
  r.expect("ersaa-two-stage");
  r.expect("v1");
  r.expect("dims");
  Index dz = r.integer(), m2 = r.integer(), dv = r.integer(), dy = r.integer();
  TwoStageLp m;
  m.d_z = dz;
  m.c_z = r.vector("c_z", dz);
  r.expect("first_stage");
  Index r1 = r.integer(), p1 = r.integer();
  Vector fs_lo = r.vector("fs_lower", p1);
  Vector fs_hi = r.vector("fs_upper", p1);
  Matrix fs_a = r.matrix("fs_matrix");
  Vector fs_b = r.vector("fs_rhs", r1);
  if (fs_a.rows() != r1 || fs_a.cols() != p1) throw IoError("instance: first-stage block shape");
  m.first_stage = LpProblem(Vector::Zero(p1), std::move(fs_a), std::move(fs_b), std::move(fs_lo),
                            std::move(fs_hi));
  m.W = r.matrix("W");
  m.T = r.matrix("T");
  m.c_v = r.vector("c_v", dv);
  m.h_matrix = r.matrix("h_matrix");
  m.h_offset = r.vector("h_offset", m2);
  if (m.W.rows() != m2 || m.W.cols() != dv || m.T.rows() != m2 || m.h_matrix.rows() != m2 ||
      m.h_matrix.cols() != dy)
    throw IoError("instance: block shapes disagree with dims");
  // Trailing meta lines are informational.
  std::string tok;
  while (in >> tok) {
    if (tok == "end") break;
    if (tok == "meta") {
      std::string line;
      std::getline(in, line);
    }
  }
  m.validate();
  return m;
}

inline void write_two_stage(const TwoStageLp& model, const std::string& path,
                            const std::vector<std::string>& meta = {}) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for write: " + path);
  write_two_stage(model, f, meta);
}

inline TwoStageLp read_two_stage(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  return read_two_stage(f);
}

}  // namespace ersaa

#endif  // ERSAA_TWOSTAGE_HPP
