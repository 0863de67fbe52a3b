#ifndef ERSAA_SCENARIO_HPP
#define ERSAA_SCENARIO_HPP

#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "ersaa/regress.hpp"

namespace ersaa {

// Box support for the responses; entries may be +-inf. Componentwise clamp is
// the exact Euclidean projection onto a box.
struct SupportBox {
  Vector lower;
  Vector upper;

  SupportBox() = default;
  SupportBox(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size())
      throw DimensionMismatch("support box: bound lengths differ");
    for (Index j = 0; j < lower.size(); ++j)
      if (lower(j) > upper(j)) throw DomainError("support box: empty");
  }

  static SupportBox unbounded(Index dy) {
    return SupportBox(Vector::Constant(dy, -kInf), Vector::Constant(dy, kInf));
  }
  static SupportBox nonnegative(Index dy) {
    return SupportBox(Vector::Zero(dy), Vector::Constant(dy, kInf));
  }

  Vector project(const Vector& v) const {
    if (v.size() != lower.size()) throw DimensionMismatch("project: length");
    return v.cwiseMax(lower).cwiseMin(upper);
  }
};

struct ScenarioSet {
  Matrix points;   // m x d_y
  Vector weights;  // m, nonnegative, sums to 1

  Index size() const { return points.rows(); }
  Index dy() const { return points.cols(); }
};

struct ResidualMatrix {
  Matrix values;  // n x d_y
};

// epsilon_hat^i = Q(x^i)^-1 (y^i - f(x^i))
inline ResidualMatrix empirical_residuals(const Dataset& data, const PointModel& f,
                                          const HeteroModel& q) {
  Matrix vals(data.n(), data.dy());
  for (Index i = 0; i < data.n(); ++i) {
    Vector x = data.covariates.row(i).transpose();
    Vector r = data.responses.row(i).transpose() - predict(f, x);
    Vector qd = q_diagonal(q, x, data.dy());
    vals.row(i) = (r.array() / qd.array()).transpose();
  }
  return ResidualMatrix{std::move(vals)};
}

// Leave-one-out residuals, each row using the model trained without that row.
inline ResidualMatrix loo_residuals(const Dataset& data, const std::vector<LooFit>& fits) {
  if (static_cast<Index>(fits.size()) != data.n())
    throw DimensionMismatch("loo_residuals: model count");
  Matrix vals(data.n(), data.dy());
  for (Index i = 0; i < data.n(); ++i) {
    const auto& fit = fits[static_cast<std::size_t>(i)];
    Vector x = data.covariates.row(i).transpose();
    Vector r = data.responses.row(i).transpose() - predict(fit.point, x);
    Vector qd = q_diagonal(fit.hetero, x, data.dy());
    vals.row(i) = (r.array() / qd.array()).transpose();
  }
  return ResidualMatrix{std::move(vals)};
}

// OLS shortcut: rows are e^i / (1 - h^i) without refitting.
inline ResidualMatrix loo_residuals(const LooBundle& bundle) {
  return ResidualMatrix{bundle.loo_residuals};
}

namespace detail {

inline ScenarioSet affine_scenarios(const Vector& center, const Vector& qdiag,
                                    const Matrix& residuals, const SupportBox& support) {
  const Index n = residuals.rows();
  ScenarioSet s;
  s.points.resize(n, residuals.cols());
  for (Index i = 0; i < n; ++i)
    s.points.row(i) =
        support.project(center + (qdiag.array() * residuals.row(i).transpose().array()).matrix())
            .transpose();
  s.weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
  return s;
}

}  // namespace detail

inline ScenarioSet build_er_saa(const Vector& x, const PointModel& f, const HeteroModel& q,
                                const ResidualMatrix& residuals, const SupportBox& support) {
  Vector center = predict(f, x);
  if (center.size() != residuals.values.cols())
    throw DimensionMismatch("build_er_saa: residual width");
  return detail::affine_scenarios(center, q_diagonal(q, x, center.size()), residuals.values,
                                  support);
}

// Same construction as ER-SAA with leave-one-out residuals substituted.
inline ScenarioSet build_j_saa(const Vector& x, const PointModel& f, const HeteroModel& q,
                               const ResidualMatrix& loo_res, const SupportBox& support) {
  return build_er_saa(x, f, q, loo_res, support);
}

inline ScenarioSet build_jplus_saa(const Vector& x, const std::vector<LooFit>& loo_models,
                                   const ResidualMatrix& loo_res, const SupportBox& support) {
  const Index n = loo_res.values.rows();
  if (static_cast<Index>(loo_models.size()) != n)
    throw DimensionMismatch("build_jplus_saa: model count");
  ScenarioSet s;
  s.points.resize(n, loo_res.values.cols());
  for (Index i = 0; i < n; ++i) {
    const auto& fit = loo_models[static_cast<std::size_t>(i)];
    Vector center = predict(fit.point, x);
    Vector qd = q_diagonal(fit.hetero, x, center.size());
    s.points.row(i) =
        support.project(center + (qd.array() * loo_res.values.row(i).transpose().array()).matrix())
            .transpose();
  }
  s.weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
  return s;
}

// J+ for homoscedastic OLS via the rank-one update: f_{-i}(x) = f_n(x) - delta_i(x).
inline ScenarioSet build_jplus_saa_ols(const Vector& x, const LinearModel& full,
                                       const LooBundle& bundle, const Dataset& data,
                                       const SupportBox& support) {
  const Index n = data.n();
  Vector fx = predict(full, x);
  ScenarioSet s;
  s.points.resize(n, data.dy());
  for (Index i = 0; i < n; ++i) {
    Vector center = fx - loo_predict_delta(bundle, data, x, i);
    s.points.row(i) =
        support.project(center + bundle.loo_residuals.row(i).transpose()).transpose();
  }
  s.weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
  return s;
}

inline ScenarioSet build_n_saa(const Dataset& data) {
  ScenarioSet s;
  s.points = data.responses;
  s.weights = Vector::Constant(data.n(), 1.0 / static_cast<double>(data.n()));
  return s;
}

inline ScenarioSet build_pp(const Vector& x, const PointModel& f, const SupportBox& support) {
  ScenarioSet s;
  Vector p = support.project(predict(f, x));
  s.points.resize(1, p.size());
  s.points.row(0) = p.transpose();
  s.weights = Vector::Constant(1, 1.0);
  return s;
}

// Reweighted SAA: all historical responses, weight 1/k on the k nearest
// covariate rows to x, zero elsewhere.
inline ScenarioSet build_knn_saa(const Dataset& data, const Vector& x, Index k) {
  if (k < 1 || k > data.n()) throw KOutOfRange("build_knn_saa: k outside [1, n]");
  ScenarioSet s;
  s.points = data.responses;
  s.weights = Vector::Zero(data.n());
  for (Index i : detail::knn_indices(data.covariates, x, k))
    s.weights(i) = 1.0 / static_cast<double>(k);
  return s;
}

struct MeanDeviationBound {
  double lhs;
  double rhs;
};

// Homoscedastic mean-deviation bound: the average distance between the
// constructed scenarios and the true-model scenarios is at most the
// prediction error at x plus the average training-point estimation error.
inline MeanDeviationBound check_mean_deviation_bound(const Vector& x, const PointModel& f,
                                       bool q_true_identity,
                                       const std::function<Vector(const Vector&)>& f_true,
                                       const ResidualMatrix& residuals, const Dataset& data) {
  if (!q_true_identity || !f_true)
    throw TrueModelUnavailable("check_mean_deviation_bound: needs homoscedastic true model");
  const Index n = data.n();
  if (residuals.values.rows() != n)
    throw DimensionMismatch("check_mean_deviation_bound: residual rows");
  Vector fx = predict(f, x);
  Vector fsx = f_true(x);
  double lhs = 0.0, avg_train_err = 0.0;
  for (Index i = 0; i < n; ++i) {
    Vector xi = data.covariates.row(i).transpose();
    Vector eps_true = data.responses.row(i).transpose() - f_true(xi);
    Vector dev = (fx + residuals.values.row(i).transpose()) - (fsx + eps_true);
    lhs += dev.norm();
    avg_train_err += (predict(f, xi) - f_true(xi)).norm();
  }
  lhs /= static_cast<double>(n);
  avg_train_err /= static_cast<double>(n);
  return {lhs, (fx - fsx).norm() + avg_train_err};
}

inline void write_scenarios_csv(const ScenarioSet& s, std::ostream& out) {
  out << "w";
  for (Index j = 0; j < s.dy(); ++j) out << ",y" << (j + 1);
  out << "\n";
  for (Index i = 0; i < s.size(); ++i) {
    out << format_double(s.weights(i));
    for (Index j = 0; j < s.dy(); ++j) out << "," << format_double(s.points(i, j));
    out << "\n";
  }
}

inline void write_scenarios_csv(const ScenarioSet& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for write: " + path);
  write_scenarios_csv(s, f);
}

inline ScenarioSet read_scenarios_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw IoError("scenario csv: missing header");
  auto cols = split_csv_line(header);
  if (cols.empty() || cols[0] != "w") throw IoError("scenario csv: expected 'w' column");
  const Index dy = static_cast<Index>(cols.size()) - 1;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (static_cast<Index>(cells.size()) != dy + 1) throw IoError("scenario csv: ragged row");
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(parse_double(c));
    rows.push_back(std::move(r));
  }
  ScenarioSet s;
  s.points.resize(static_cast<Index>(rows.size()), dy);
  s.weights.resize(static_cast<Index>(rows.size()));
  for (Index i = 0; i < s.size(); ++i) {
    s.weights(i) = rows[static_cast<std::size_t>(i)][0];
    for (Index j = 0; j < dy; ++j) s.points(i, j) = rows[static_cast<std::size_t>(i)][1 + j];
  }
  return s;
}

}  // namespace ersaa

#endif  // ERSAA_SCENARIO_HPP
