#ifndef ERSAA_REGRESS_HPP
#define ERSAA_REGRESS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "ersaa/dataset.hpp"
#include "ersaa/rng.hpp"
#include "ersaa/types.hpp"

namespace ersaa {

enum class LinearKind { ols, wls, lasso };
enum class HeteroKind { identity, loglinear };
enum class FeatureTransform { log_abs, log1p };

struct LinearModel {
  Matrix coef;  // d_y x d_x
  LinearKind kind = LinearKind::ols;
  double lambda = 0.0;
};

struct KnnModel {
  Index k = 1;
  Dataset training;
};

using PointModel = std::variant<LinearModel, KnnModel>;

// Diagonal log-linear heteroscedasticity model. Row j of pi holds
// [intercept, slopes over the non-intercept covariates]; q_j(x) is the
// exponential of half the fitted log-variance, so it is positive everywhere.
struct HeteroModel {
  HeteroKind kind = HeteroKind::identity;
  Matrix pi;  // d_y x (1 + #non-intercept covariates); empty for identity
  FeatureTransform feature_transform = FeatureTransform::log1p;
  double delta = 1e-4;
  bool skip_first_covariate = false;  // training data had an intercept column
};

struct LooBundle {
  Matrix loo_residuals;   // n x d_y, rows e^i / (1 - h^i)
  Vector leverages;       // n, each in [0, 1)
  Matrix gram_inverse;    // d_x x d_x
  Matrix base_residuals;  // n x d_y
};

namespace detail {

inline double transform_value(FeatureTransform t, double v) {
  if (t == FeatureTransform::log1p) {
    if (v < 0) throw DomainError("log1p transform requires nonnegative covariates");
    return std::log1p(v);
  }
  if (v == 0.0) throw DomainError("log|x| transform undefined at 0");
  return std::log(std::abs(v));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// OLS / WLS

inline LinearModel fit_ols(const Dataset& data,
                           const std::optional<Vector>& weights = std::nullopt) {
  const Index n = data.n(), dx = data.dx();
  if (n < dx) throw RankDeficient("fit_ols: fewer samples than covariates");
  Matrix x = data.covariates;
  Matrix y = data.responses;
  if (weights) {
    if (weights->size() != n) throw DimensionMismatch("fit_ols: weight length");
    Index positive = 0;
    for (Index i = 0; i < n; ++i) {
      double w = (*weights)(i);
      if (w < 0) throw DomainError("fit_ols: negative weight");
      if (w > 0) ++positive;
      double s = std::sqrt(w);
      x.row(i) *= s;
      y.row(i) *= s;
    }
    if (positive < dx) throw RankDeficient("fit_ols: too few positive weights");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < dx) throw RankDeficient("fit_ols: design is rank deficient");
  Matrix coef_t = qr.solve(y);  // d_x x d_y
  LinearModel m;
  m.coef = coef_t.transpose();
  m.kind = weights ? LinearKind::wls : LinearKind::ols;
  return m;
}

// ---------------------------------------------------------------------------
// Lasso: cyclic coordinate descent on standardized features, intercept
// unpenalized, coefficients reported on the original scale. The penalty
// applies to the standardized coefficients (glmnet convention), so the KKT
// conditions read |<x_std_k, r>|/n <= lambda.

namespace detail {

struct LassoWork {
  Matrix xs;             // n x F standardized non-intercept columns
  std::vector<Index> cols;  // original column index per standardized column
  Vector mean, scale;    // per standardized column
  Vector ymean;          // per output (zero when no intercept)
  bool intercept = false;
};

inline LassoWork lasso_prepare(const Dataset& data) {
  const Index n = data.n(), dx = data.dx();
  LassoWork w;
  w.intercept = data.intercept_mode;
  const Index first = w.intercept ? 1 : 0;
  std::vector<Index> keep;
  for (Index j = first; j < dx; ++j) keep.push_back(j);
  w.xs.resize(n, static_cast<Index>(keep.size()));
  w.mean.resize(static_cast<Index>(keep.size()));
  w.scale.resize(static_cast<Index>(keep.size()));
  Index f = 0;
  for (Index j : keep) {
    double mu = w.intercept ? data.covariates.col(j).mean() : 0.0;
    Vector c = data.covariates.col(j).array() - mu;
    double s = std::sqrt(c.squaredNorm() / static_cast<double>(n));
    w.mean(f) = mu;
    w.scale(f) = s;
    if (s > 1e-12)
      w.xs.col(f) = c / s;
    else
      w.xs.col(f).setZero();  // constant column: slope pinned at 0
    w.cols.push_back(j);
    ++f;
  }
  bool any_varying = (w.scale.array() > 1e-12).any();
  if (!any_varying)
    throw DegenerateDesign("fit_lasso: all non-intercept columns are constant");
  w.ymean.resize(data.dy());
  for (Index j = 0; j < data.dy(); ++j)
    w.ymean(j) = w.intercept ? data.responses.col(j).mean() : 0.0;
  return w;
}

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// One output column; beta is the standardized-coefficient vector (warm start
// in, solution out). Returns the residual vector for KKT checks.
inline Vector lasso_cd(const LassoWork& w, const Vector& y_centered, double lambda,
                       Vector& beta) {
  const Index n = w.xs.rows(), F = w.xs.cols();
  Vector r = y_centered - w.xs * beta;
  const double tol = 1e-7;
  const int max_sweeps = 100000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index k = 0; k < F; ++k) {
      if (w.scale(k) <= 1e-12) continue;
      double old = beta(k);
      double rho = w.xs.col(k).dot(r) / static_cast<double>(n) + old;
      double next = soft_threshold(rho, lambda);
      if (next != old) {
        r += w.xs.col(k) * (old - next);
        beta(k) = next;
        max_change = std::max(max_change, std::abs(next - old));
      }
    }
    if (max_change <= tol) break;
  }
  return r;
}

}  // namespace detail

inline LinearModel fit_lasso(const Dataset& data, double lambda) {
  if (lambda < 0) throw DomainError("fit_lasso: negative lambda");
  const Index n = data.n(), dx = data.dx(), dy = data.dy();
  if (n < 2) throw RankDeficient("fit_lasso: need at least two samples");
  auto w = detail::lasso_prepare(data);
  const Index F = w.xs.cols();
  Matrix coef = Matrix::Zero(dy, dx);
  for (Index j = 0; j < dy; ++j) {
    Vector yc = data.responses.col(j).array() - w.ymean(j);
    Vector beta = Vector::Zero(F);
    detail::lasso_cd(w, yc, lambda, beta);
    double icpt = w.ymean(j);
    for (Index f = 0; f < F; ++f) {
      if (w.scale(f) <= 1e-12) continue;
      double orig = beta(f) / w.scale(f);
      coef(j, w.cols[static_cast<std::size_t>(f)]) = orig;
      icpt -= orig * w.mean(f);
    }
    if (w.intercept) coef(j, 0) = icpt;
  }
  LinearModel m;
  m.coef = coef;
  m.kind = LinearKind::lasso;
  m.lambda = lambda;
  return m;
}

// Smallest lambda for which every slope is zero, on standardized features.
inline double lasso_lambda_max(const Dataset& data) {
  auto w = detail::lasso_prepare(data);
  double lmax = 0.0;
  for (Index j = 0; j < data.dy(); ++j) {
    Vector yc = data.responses.col(j).array() - w.ymean(j);
    for (Index f = 0; f < w.xs.cols(); ++f) {
      if (w.scale(f) <= 1e-12) continue;
      lmax = std::max(lmax, std::abs(w.xs.col(f).dot(yc)) / static_cast<double>(data.n()));
    }
  }
  return lmax;
}

// Decreasing-lambda path with warm starts; returns one model per lambda.
inline std::vector<LinearModel> fit_lasso_path(const Dataset& data,
                                               const std::vector<double>& lambdas) {
  auto w = detail::lasso_prepare(data);
  const Index F = w.xs.cols(), dy = data.dy(), dx = data.dx();
  Matrix betas = Matrix::Zero(dy, F);
  std::vector<LinearModel> out;
  out.reserve(lambdas.size());
  for (double lambda : lambdas) {
    Matrix coef = Matrix::Zero(dy, dx);
    for (Index j = 0; j < dy; ++j) {
      Vector yc = data.responses.col(j).array() - w.ymean(j);
      Vector beta = betas.row(j).transpose();
      detail::lasso_cd(w, yc, lambda, beta);
      betas.row(j) = beta.transpose();
      double icpt = w.ymean(j);
      for (Index f = 0; f < F; ++f) {
        if (w.scale(f) <= 1e-12) continue;
        double orig = beta(f) / w.scale(f);
        coef(j, w.cols[static_cast<std::size_t>(f)]) = orig;
        icpt -= orig * w.mean(f);
      }
      if (w.intercept) coef(j, 0) = icpt;
    }
    LinearModel m;
    m.coef = coef;
    m.kind = LinearKind::lasso;
    m.lambda = lambda;
    out.push_back(std::move(m));
  }
  return out;
}

// 100 log-spaced penalties from lambda_max down to 1e-3 * lambda_max.
inline std::vector<double> lasso_lambda_grid(const Dataset& data, int count = 100) {
  double lmax = lasso_lambda_max(data);
  if (lmax <= 0) lmax = 1.0;
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  double lmin = 1e-3 * lmax;
  for (int i = 0; i < count; ++i) {
    double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid.push_back(lmax * std::pow(lmin / lmax, t));
  }
  return grid;
}

// ---------------------------------------------------------------------------
// kNN

inline KnnModel fit_knn(const Dataset& data, Index k) {
  if (k < 1 || k > data.n()) throw KOutOfRange("fit_knn: k outside [1, n]");
  return KnnModel{k, data};
}

namespace detail {

// Indices of the k nearest training covariates under Euclidean distance,
// ties broken toward the earliest index.
inline std::vector<Index> knn_indices(const Matrix& train, const Vector& x, Index k) {
  const Index n = train.rows();
  std::vector<std::pair<double, Index>> d(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    d[static_cast<std::size_t>(i)] = {(train.row(i).transpose() - x).squaredNorm(), i};
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  std::vector<Index> idx(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i)].second;
  return idx;
}

}  // namespace detail

inline Vector predict(const LinearModel& m, const Vector& x) {
  if (x.size() != m.coef.cols()) throw DimensionMismatch("predict: covariate length");
  return m.coef * x;
}

inline Vector predict(const KnnModel& m, const Vector& x) {
  if (x.size() != m.training.dx()) throw DimensionMismatch("predict: covariate length");
  auto idx = detail::knn_indices(m.training.covariates, x, m.k);
  Vector out = Vector::Zero(m.training.dy());
  for (Index i : idx) out += m.training.responses.row(i).transpose();
  return out / static_cast<double>(m.k);
}

inline Vector predict(const PointModel& m, const Vector& x) {
  return std::visit([&](const auto& mm) { return predict(mm, x); }, m);
}

// ---------------------------------------------------------------------------
// Heteroscedasticity estimation

namespace detail {

inline Matrix hetero_design(const Dataset& data, FeatureTransform t) {
  const Index first = data.intercept_mode ? 1 : 0;
  const Index F = data.dx() - first;
  Matrix d(data.n(), 1 + F);
  d.col(0).setOnes();
  for (Index i = 0; i < data.n(); ++i)
    for (Index f = 0; f < F; ++f)
      d(i, 1 + f) = transform_value(t, data.covariates(i, first + f));
  return d;
}

}  // namespace detail

inline HeteroModel fit_hetero_loglinear(const Dataset& data, const PointModel& point_model,
                                        double delta,
                                        FeatureTransform transform = FeatureTransform::log1p) {
  if (!(delta > 0)) throw NonpositiveDelta("fit_hetero_loglinear: delta must be positive");
  Matrix design = detail::hetero_design(data, transform);
  Matrix target(data.n(), data.dy());
  for (Index i = 0; i < data.n(); ++i) {
    Vector f = predict(point_model, data.covariates.row(i).transpose());
    for (Index j = 0; j < data.dy(); ++j) {
      double mag = std::max(delta, std::abs(data.responses(i, j) - f(j)));
      target(i, j) = 2.0 * std::log(mag);
    }
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols())
    throw RankDeficient("fit_hetero_loglinear: transformed design is rank deficient");
  HeteroModel m;
  m.kind = HeteroKind::loglinear;
  m.pi = Matrix(qr.solve(target)).transpose();
  m.feature_transform = transform;
  m.delta = delta;
  m.skip_first_covariate = data.intercept_mode;
  return m;
}

// Diagonal of Q(x) as a vector of strictly positive entries.
inline Vector q_diagonal(const HeteroModel& m, const Vector& x, Index dy) {
  if (m.kind == HeteroKind::identity) return Vector::Ones(dy);
  const Index first = m.skip_first_covariate ? 1 : 0;
  const Index F = m.pi.cols() - 1;
  if (x.size() - first != F) throw DimensionMismatch("q_diagonal: covariate length");
  Vector feat(1 + F);
  feat(0) = 1.0;
  for (Index f = 0; f < F; ++f)
    feat(1 + f) = detail::transform_value(m.feature_transform, x(first + f));
  Vector logq2 = m.pi * feat;
  return (0.5 * logq2.array()).exp();
}

inline Matrix q_matrix(const HeteroModel& m, const Vector& x, Index dy) {
  return Matrix(q_diagonal(m, x, dy).asDiagonal());
}

// ---------------------------------------------------------------------------
// Leave-one-out machinery for OLS

inline LooBundle loo_ols(const Dataset& data) {
  const Index n = data.n(), dx = data.dx();
  if (n < dx) throw RankDeficient("loo_ols: fewer samples than covariates");
  const Matrix& x = data.covariates;
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < dx) throw RankDeficient("loo_ols: design is rank deficient");
  Matrix coef_t = qr.solve(data.responses);
  Matrix resid = data.responses - x * coef_t;

  // Leverages from the thin Q factor: h_i = ||Q_i.||^2.
  Matrix thin_q = qr.householderQ() * Matrix::Identity(n, dx);
  Vector lev(n);
  for (Index i = 0; i < n; ++i) lev(i) = thin_q.row(i).squaredNorm();

  for (Index i = 0; i < n; ++i)
    if (lev(i) >= 1.0 - 1e-10)
      throw LeverageOne("loo_ols: leverage at 1; leave-one-out undefined");

  // (X'X)^-1 = P R^-1 R^-T P' from the pivoted factorization.
  Matrix r = qr.matrixR().topLeftCorner(dx, dx).template triangularView<Eigen::Upper>();
  Matrix rinv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(dx, dx));
  Matrix gram_inv_perm = rinv * rinv.transpose();
  Matrix p = qr.colsPermutation();
  Matrix gram_inv = p * gram_inv_perm * p.transpose();

  LooBundle b;
  b.leverages = lev;
  b.base_residuals = resid;
  b.gram_inverse = gram_inv;
  b.loo_residuals.resize(n, data.dy());
  for (Index i = 0; i < n; ++i) b.loo_residuals.row(i) = resid.row(i) / (1.0 - lev(i));
  return b;
}

// f_n(x) - f_{-i}(x) = (x' (X'X)^-1 x^i) e^i / (1 - h^i), exact for OLS.
inline Vector loo_predict_delta(const LooBundle& bundle, const Dataset& data,
                                const Vector& x, Index i) {
  if (i < 0 || i >= data.n()) throw IndexOutOfRange("loo_predict_delta: index");
  if (x.size() != data.dx()) throw DimensionMismatch("loo_predict_delta: covariate length");
  double scale = x.dot(bundle.gram_inverse * data.covariates.row(i).transpose()) /
                 (1.0 - bundle.leverages(i));
  return scale * bundle.base_residuals.row(i).transpose();
}

// ---------------------------------------------------------------------------
// Generic drop-one refits

struct FitSpec {
  enum class Kind { ols, lasso, knn } kind = Kind::ols;
  double lambda = 0.0;  // lasso
  Index k = 1;          // knn

  static FitSpec ols() { return {}; }
  static FitSpec lasso(double lambda) { return {Kind::lasso, lambda, 1}; }
  static FitSpec knn(Index k) { return {Kind::knn, 0.0, k}; }
};

struct HeteroSpec {
  HeteroKind kind = HeteroKind::identity;
  double delta = 1e-4;
  FeatureTransform transform = FeatureTransform::log1p;
};

inline PointModel fit_point(const Dataset& data, const FitSpec& spec) {
  switch (spec.kind) {
    case FitSpec::Kind::ols:
      return fit_ols(data);
    case FitSpec::Kind::lasso:
      return fit_lasso(data, spec.lambda);
    case FitSpec::Kind::knn:
      return fit_knn(data, spec.k);
  }
  throw Error("fit_point: unreachable");
}

struct LooFit {
  PointModel point;
  HeteroModel hetero;
};

inline std::vector<LooFit> loo_refit(const Dataset& data, const FitSpec& spec,
                                     const HeteroSpec& hetero = {}) {
  std::vector<LooFit> fits;
  fits.reserve(static_cast<std::size_t>(data.n()));
  for (Index i = 0; i < data.n(); ++i) {
    try {
      Dataset di = data.without_row(i);
      LooFit f;
      f.point = fit_point(di, spec);
      if (hetero.kind == HeteroKind::loglinear)
        f.hetero = fit_hetero_loglinear(di, f.point, hetero.delta, hetero.transform);
      fits.push_back(std::move(f));
    } catch (const Error& e) {
      throw Error("loo_refit omitting index " + std::to_string(i) + ": " + e.what());
    }
  }
  return fits;
}

// ---------------------------------------------------------------------------
// Cross-validation

namespace detail {

inline std::vector<std::vector<Index>> cv_folds(Index n, Index folds, std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng = Rng::from(seed, {stream::cv_folds});
  for (Index i = n - 1; i > 0; --i) {
    auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(folds));
  for (Index f = 0; f < folds; ++f) {
    Index lo = f * n / folds, hi = (f + 1) * n / folds;
    out[static_cast<std::size_t>(f)].assign(perm.begin() + lo, perm.begin() + hi);
  }
  return out;
}

inline Dataset subset(const Dataset& data, const std::vector<Index>& rows) {
  Matrix x(static_cast<Index>(rows.size()), data.dx());
  Matrix y(static_cast<Index>(rows.size()), data.dy());
  Index r = 0;
  for (Index i : rows) {
    x.row(r) = data.covariates.row(i);
    y.row(r) = data.responses.row(i);
    ++r;
  }
  return Dataset(std::move(x), std::move(y), data.intercept_mode);
}

}  // namespace detail

// Mean held-out squared prediction error of `spec` with the grid value
// substituted for its hyperparameter, over seeded contiguous folds.
inline double cv_score(const Dataset& data, const FitSpec& base, double value,
                       Index folds, std::uint64_t seed) {
  auto fold_rows = detail::cv_folds(data.n(), folds, seed);
  double total = 0.0;
  for (const auto& hold : fold_rows) {
    std::vector<char> held(static_cast<std::size_t>(data.n()), 0);
    for (Index i : hold) held[static_cast<std::size_t>(i)] = 1;
    std::vector<Index> train_rows;
    for (Index i = 0; i < data.n(); ++i)
      if (!held[static_cast<std::size_t>(i)]) train_rows.push_back(i);
    Dataset train = detail::subset(data, train_rows);
    FitSpec spec = base;
    if (base.kind == FitSpec::Kind::knn)
      spec.k = std::min(static_cast<Index>(std::llround(value)), train.n());
    else if (base.kind == FitSpec::Kind::lasso)
      spec.lambda = value;
    PointModel m = fit_point(train, spec);
    for (Index i : hold) {
      Vector pred = predict(m, data.covariates.row(i).transpose());
      total += (data.responses.row(i).transpose() - pred).squaredNorm();
    }
  }
  return total / static_cast<double>(data.n());
}

inline double cv_select(const Dataset& data, const FitSpec& base,
                        const std::vector<double>& grid, Index folds, std::uint64_t seed) {
  if (grid.empty()) throw EmptyGrid("cv_select: empty grid");
  if (folds < 2) throw DomainError("cv_select: need at least 2 folds");
  if (data.n() < folds) throw DomainError("cv_select: more folds than samples");
  double best_value = grid.front();
  double best_score = kInf;
  bool first = true;
  for (double v : grid) {
    double s = cv_score(data, base, v, folds, seed);
    bool better;
    if (first) {
      better = true;
      first = false;
    } else if (s < best_score) {
      better = true;
    } else if (s == best_score) {
      // Ties go to the simpler model: smaller k, larger lambda.
      better = base.kind == FitSpec::Kind::lasso ? v > best_value : v < best_value;
    } else {
      better = false;
    }
    if (better) {
      best_score = s;
      best_value = v;
    }
  }
  return best_value;
}

// All integers in [floor(n^0.1), ceil(n^0.9)], thinned to 50 geometrically
// spaced values when the range is large.
inline std::vector<double> knn_k_grid(Index n) {
  auto lo = static_cast<Index>(std::floor(std::pow(static_cast<double>(n), 0.1)));
  auto hi = static_cast<Index>(std::ceil(std::pow(static_cast<double>(n), 0.9)));
  lo = std::max<Index>(lo, 1);
  hi = std::min<Index>(hi, n);
  std::vector<double> grid;
  Index count = hi - lo + 1;
  if (count <= 50) {
    for (Index k = lo; k <= hi; ++k) grid.push_back(static_cast<double>(k));
  } else {
    Index prev = 0;
    for (int i = 0; i < 50; ++i) {
      double t = static_cast<double>(i) / 49.0;
      auto k = static_cast<Index>(std::llround(
          static_cast<double>(lo) * std::pow(static_cast<double>(hi) / static_cast<double>(lo), t)));
      k = std::clamp(k, lo, hi);
      if (k != prev) {
        grid.push_back(static_cast<double>(k));
        prev = k;
      }
    }
  }
  return grid;
}

}  // namespace ersaa

#endif  // ERSAA_REGRESS_HPP
