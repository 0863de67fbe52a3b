// Independent reference implementations used to freeze expected values.
// Everything here is deliberately naive: explicit inverses, exhaustive
// enumeration, brute-force loops.
#ifndef ERSAA_TESTS_ORACLES_HPP
#define ERSAA_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ersaa/lp.hpp"
#include "ersaa/rng.hpp"
#include "ersaa/types.hpp"

namespace oracle {

using ersaa::Index;
using ersaa::Matrix;
using ersaa::Vector;

// OLS by explicit normal equations with a dense inverse.
inline Matrix normal_eq_ols(const Matrix& x, const Matrix& y) {
  Matrix gram = x.transpose() * x;
  Matrix coef_t = gram.inverse() * x.transpose() * y;
  return coef_t.transpose();  // d_y x d_x
}

// Weighted variant.
inline Matrix normal_eq_wls(const Matrix& x, const Matrix& y, const Vector& w) {
  Matrix xw = x;
  Matrix yw = y;
  for (Index i = 0; i < x.rows(); ++i) {
    xw.row(i) *= std::sqrt(w(i));
    yw.row(i) *= std::sqrt(w(i));
  }
  return normal_eq_ols(xw, yw);
}

// Brute-force 1-D lasso: grid minimization of (1/2n)||y - t x||^2 + lambda |t|.
inline double lasso_1d_grid(const Vector& x, const Vector& y, double lambda, double lo,
                            double hi, int steps = 2000001) {
  const double n = static_cast<double>(x.size());
  double best_t = 0.0, best_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i < steps; ++i) {
    double t = lo + (hi - lo) * static_cast<double>(i) / (steps - 1);
    double v = (y - t * x).squaredNorm() / (2.0 * n) + lambda * std::abs(t);
    if (v < best_v) {
      best_v = v;
      best_t = t;
    }
  }
  return best_t;
}

// Exhaustive kNN: full stable sort by (distance, index).
inline Vector knn_predict(const Matrix& xs, const Matrix& ys, const Vector& q, Index k) {
  std::vector<std::pair<double, Index>> d;
  for (Index i = 0; i < xs.rows(); ++i)
    d.push_back({(xs.row(i).transpose() - q).squaredNorm(), i});
  std::sort(d.begin(), d.end());
  Vector out = Vector::Zero(ys.cols());
  for (Index i = 0; i < k; ++i) out += ys.row(d[static_cast<std::size_t>(i)].second).transpose();
  return out / static_cast<double>(k);
}

// Drop-one OLS refit by normal equations.
inline Matrix drop_one_ols(const Matrix& x, const Matrix& y, Index skip) {
  Matrix xs(x.rows() - 1, x.cols()), ys(y.rows() - 1, y.cols());
  Index r = 0;
  for (Index i = 0; i < x.rows(); ++i) {
    if (i == skip) continue;
    xs.row(r) = x.row(i);
    ys.row(r) = y.row(i);
    ++r;
  }
  return normal_eq_ols(xs, ys);
}

// Exhaustive vertex enumeration for min c'v, Av = b, l <= v <= u with all
// bounds finite: every basis choice crossed with every lower/upper assignment
// of the nonbasic columns.
struct VertexResult {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  Vector argmin;
};

inline void enumerate_bases(const ersaa::LpProblem& p, Index start, std::vector<Index>& pick,
                            VertexResult& best) {
  const Index m = p.rows(), n = p.cols();
  if (static_cast<Index>(pick.size()) == m) {
    std::vector<bool> basic(static_cast<std::size_t>(n), false);
    for (Index j : pick) basic[static_cast<std::size_t>(j)] = true;
    Matrix bmat(m, m);
    for (Index i = 0; i < m; ++i) bmat.col(i) = p.eq_matrix.col(pick[static_cast<std::size_t>(i)]);
    Eigen::FullPivLU<Matrix> lu(bmat);
    if (!lu.isInvertible()) return;
    std::vector<Index> nonbasic;
    for (Index j = 0; j < n; ++j)
      if (!basic[static_cast<std::size_t>(j)]) nonbasic.push_back(j);
    const auto patterns = static_cast<std::size_t>(1) << nonbasic.size();
    for (std::size_t mask = 0; mask < patterns; ++mask) {
      Vector v = Vector::Zero(n);
      Vector rhs = p.eq_rhs;
      for (std::size_t t = 0; t < nonbasic.size(); ++t) {
        Index j = nonbasic[t];
        double val = (mask >> t) & 1 ? p.upper(j) : p.lower(j);
        v(j) = val;
        rhs -= p.eq_matrix.col(j) * val;
      }
      Vector xb = lu.solve(rhs);
      bool ok = true;
      for (Index i = 0; i < m; ++i) {
        Index j = pick[static_cast<std::size_t>(i)];
        if (xb(i) < p.lower(j) - 1e-9 || xb(i) > p.upper(j) + 1e-9) {
          ok = false;
          break;
        }
        v(j) = xb(i);
      }
      if (!ok) continue;
      double obj = p.objective.dot(v);
      best.feasible = true;
      if (obj < best.objective) {
        best.objective = obj;
        best.argmin = v;
      }
    }
    return;
  }
  for (Index j = start; j < n; ++j) {
    pick.push_back(j);
    enumerate_bases(p, j + 1, pick, best);
    pick.pop_back();
  }
}

inline VertexResult lp_vertex_enumeration(const ersaa::LpProblem& p) {
  VertexResult best;
  std::vector<Index> pick;
  enumerate_bases(p, 0, pick, best);
  return best;
}

// Vertices of the dual polyhedron { lambda : lambda' W <= c_v }: solve every
// m-subset of tight constraints, keep feasible solutions.
inline std::vector<Vector> dual_vertices(const Matrix& w, const Vector& c_v) {
  const Index m = w.rows(), n = w.cols();
  std::vector<Vector> verts;
  std::vector<Index> pick;
  std::vector<Index> cols(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) cols[static_cast<std::size_t>(j)] = j;
  std::vector<bool> select(static_cast<std::size_t>(n), false);
  std::fill(select.begin(), select.begin() + m, true);
  // Iterate all C(n, m) subsets via permutations of the selection mask.
  std::sort(select.begin(), select.end());
  do {
    std::vector<Index> active;
    for (Index j = 0; j < n; ++j)
      if (select[static_cast<std::size_t>(j)]) active.push_back(j);
    if (static_cast<Index>(active.size()) != m) continue;
    Matrix a(m, m);
    Vector rhs(m);
    for (Index i = 0; i < m; ++i) {
      a.row(i) = w.col(active[static_cast<std::size_t>(i)]).transpose();
      rhs(i) = c_v(active[static_cast<std::size_t>(i)]);
    }
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) continue;
    Vector lambda = lu.solve(rhs);
    if (((w.transpose() * lambda).array() <= c_v.array() + 1e-8).all()) {
      bool dup = false;
      for (const auto& v : verts)
        if ((v - lambda).cwiseAbs().maxCoeff() < 1e-8) {
          dup = true;
          break;
        }
      if (!dup) verts.push_back(lambda);
    }
  } while (std::next_permutation(select.begin(), select.end()));
  return verts;
}

// Seeded random matrix with entries uniform in (lo, hi).
inline Matrix random_matrix(ersaa::Rng& rng, Index rows, Index cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline Matrix random_gaussian(ersaa::Rng& rng, Index rows, Index cols, double sd = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, sd);
  return m;
}

}  // namespace oracle

#endif  // ERSAA_TESTS_ORACLES_HPP
