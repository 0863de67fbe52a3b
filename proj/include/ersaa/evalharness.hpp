#ifndef ERSAA_EVALHARNESS_HPP
#define ERSAA_EVALHARNESS_HPP

#include <chrono>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "ersaa/bench.hpp"
#include "ersaa/parallel.hpp"

namespace ersaa {

// Multiple-replication certification output. gaps(k) is the candidate's
// estimated optimality gap on batch k; b99 is the normalized 99% upper
// confidence bound on the gap, in percent of the mean batch optimum.
struct UcbReport {
  Vector gaps;
  Vector batch_optima;
  Vector batch_costs;
  double v_bar = 0.0;
  double gap_mean = 0.0;
  double gap_std = 0.0;
  double b99 = 0.0;
  bool absolute = false;  // |v_bar| below guard: b99 reports the absolute bound
};

namespace evdetail {

inline ScenarioSet fi_batch(const TwoStageLp& model, const DemandModel& demand,
                            const Vector& x, Index n_eval, std::uint64_t seed, int batch) {
  Vector fx = f_star(demand, x);
  Vector qx = q_star_diag(demand, x);
  if (fx.size() != model.dy()) throw DimensionMismatch("fi_batch: demand width");
  Rng rng = Rng::from(seed, {stream::evaluation, static_cast<std::uint64_t>(batch)});
  ScenarioSet s;
  s.points.resize(n_eval, fx.size());
  for (Index i = 0; i < n_eval; ++i)
    for (Index j = 0; j < fx.size(); ++j)
      s.points(i, j) = fx(j) + qx(j) * rng.normal(0.0, demand.sigma);
  s.weights = Vector::Constant(n_eval, 1.0 / static_cast<double>(n_eval));
  return s;
}

inline void check_candidate_feasible(const TwoStageLp& model, const Vector& z) {
  if (z.size() != model.d_z) throw InfeasibleCandidate("candidate: wrong length");
  const LpProblem& fs = model.first_stage;
  for (Index i = 0; i < model.d_z; ++i)
    if (z(i) < fs.lower(i) - 1e-7 || z(i) > fs.upper(i) + 1e-7)
      throw InfeasibleCandidate("candidate violates first-stage bounds");
  if (fs.rows() > 0) {
    // Fix z and let any slack columns absorb the equalities.
    Vector lo = fs.lower, hi = fs.upper;
    lo.head(model.d_z) = z;
    hi.head(model.d_z) = z;
    LpProblem feas(Vector::Zero(fs.cols()), fs.eq_matrix, fs.eq_rhs, lo, hi);
    if (solve_lp(feas).status != LpStatus::optimal)
      throw InfeasibleCandidate("candidate violates first-stage constraints");
  }
}

struct BatchStat {
  ScenarioSet scenarios;
  double optimum_eval = 0.0;  // batch argmin re-evaluated through saa_objective
};

inline BatchStat make_batch(const TwoStageLp& model, const DemandModel& demand,
                            const Vector& x, Index n_eval, std::uint64_t seed, int batch,
                            double tol, long max_iter) {
  BatchStat bs;
  bs.scenarios = fi_batch(model, demand, x, n_eval, seed, batch);
  SolveResult opt = solve_lshaped(model, bs.scenarios, tol, max_iter);
  bs.optimum_eval = saa_objective(model, bs.scenarios, opt.z_star);
  return bs;
}

inline UcbReport ucb_from_batches(const std::vector<BatchStat>& batches, const TwoStageLp& model,
                                  const Vector& z_hat, double t_multiplier) {
  const auto nb = static_cast<Index>(batches.size());
  UcbReport r;
  r.gaps.resize(nb);
  r.batch_optima.resize(nb);
  r.batch_costs.resize(nb);
  for (Index k = 0; k < nb; ++k) {
    const BatchStat& bs = batches[static_cast<std::size_t>(k)];
    double vhat = saa_objective(model, bs.scenarios, z_hat);
    // The batch optimum is estimated by the better of the batch argmin and
    // the candidate itself, both evaluated through the same code path; the
    // gap is then nonnegative by construction and exactly zero when the
    // candidate solves the batch problem.
    double vbar = std::min(bs.optimum_eval, vhat);
    r.batch_costs(k) = vhat;
    r.batch_optima(k) = vbar;
    r.gaps(k) = vhat - vbar;
  }
  r.v_bar = r.batch_optima.mean();
  r.gap_mean = r.gaps.mean();
  double var = 0.0;
  if (nb > 1) var = (r.gaps.array() - r.gap_mean).square().sum() / static_cast<double>(nb - 1);
  r.gap_std = std::sqrt(var);
  double bound = r.gap_mean + t_multiplier * std::sqrt(var / static_cast<double>(nb));
  if (std::abs(r.v_bar) < 1e-8) {
    r.absolute = true;
    r.b99 = bound;
  } else {
    r.b99 = 100.0 / std::abs(r.v_bar) * bound;
  }
  return r;
}

}  // namespace evdetail

// Multiple replication procedure: per batch, draw n_eval fresh errors, solve
// the full-information SAA at x (true f*, Q*; no projection), evaluate the
// candidate on the same batch, and form the normalized 99% UCB
//   b99 = (100/|v_bar|) (mean(G) + t_multiplier sqrt(var(G)/n_batches)).
inline UcbReport mrp_ucb(const TwoStageLp& model, const DemandModel& demand, const Vector& x,
                         const Vector& z_hat, Index n_eval = 1000, int n_batches = 30,
                         double t_multiplier = 2.462, std::uint64_t seed = 0,
                         double solver_tol = 1e-9, long solver_max_iter = 500) {
  if (n_eval < 1 || n_batches < 2) throw BadConfig("mrp_ucb: need n_eval >= 1, n_batches >= 2");
  evdetail::check_candidate_feasible(model, z_hat);
  std::vector<evdetail::BatchStat> batches(static_cast<std::size_t>(n_batches));
  for (int k = 0; k < n_batches; ++k) {
    try {
      batches[static_cast<std::size_t>(k)] =
          evdetail::make_batch(model, demand, x, n_eval, seed, k, solver_tol, solver_max_iter);
    } catch (const Error& e) {
      throw Error("mrp_ucb batch " + std::to_string(k) + ": " + e.what());
    }
  }
  return evdetail::ucb_from_batches(batches, model, z_hat, t_multiplier);
}

// ---------------------------------------------------------------------------
// Replication sweeps

struct ExperimentConfig {
  Index n_resources = 20;
  Index n_customers = 30;
  Index d_x = 10;
  double degree = 1.0;
  double sigma = 5.0;
  int omega = 1;
  Index median_mc_size = 10001;
  GenConfig gen;

  std::vector<std::string> methods;
  std::vector<Index> n_grid;
  int replications = 1;

  Index n_eval = 1000;
  int n_batches = 30;
  double t_multiplier = 2.462;

  double solver_tol = 1e-9;
  long solver_max_iter = 500;
  Index extensive_cap = 200000;
  bool project = true;
  double hetero_delta = 1e-4;
  unsigned threads = 0;
  std::uint64_t master_seed = 20240801;

  void validate() const {
    if (replications < 1) throw BadConfig("config: replications must be >= 1");
    if (n_eval < 1) throw BadConfig("config: n_eval must be >= 1");
    if (n_batches < 2) throw BadConfig("config: n_batches must be >= 2");
    if (methods.empty()) throw BadConfig("config: no methods selected");
    if (n_grid.empty()) throw BadConfig("config: empty n grid");
    if (!(degree == 0.5 || degree == 1.0 || degree == 2.0))
      throw BadConfig("config: p must be one of {0.5, 1, 2}");
    if (omega < 1 || omega > 3) throw BadConfig("config: omega must be in {1,2,3}");
    if (d_x < 3) throw BadConfig("config: d_x must be >= 3");
    if (!(t_multiplier > 0)) throw BadConfig("config: t_multiplier must be positive");
  }
};

inline const std::vector<std::string>& supported_methods() {
  static const std::vector<std::string> ms = {
      "er_ols",     "er_lasso", "er_knn", "j_ols",          "jplus_ols",    "n_saa",
      "pp_ols",     "pp_lasso", "knn_saa", "er_ols_hetero", "er_knn_hetero"};
  return ms;
}

// Scenario construction for one method. Raw covariates get an intercept
// column prepended for the regression-based pipelines.
inline ScenarioSet build_method_scenarios(const std::string& method, const Matrix& x_raw,
                                          const Matrix& y, const Vector& query_raw,
                                          const SupportBox& box, double hetero_delta,
                                          std::uint64_t cv_seed) {
  Dataset data = with_intercept(x_raw, y);
  Vector q(query_raw.size() + 1);
  q(0) = 1.0;
  q.tail(query_raw.size()) = query_raw;
  HeteroModel identity;

  if (method == "n_saa") return build_n_saa(data);
  if (method == "er_ols") {
    PointModel f = fit_ols(data);
    return build_er_saa(q, f, identity, empirical_residuals(data, f, identity), box);
  }
  if (method == "pp_ols") return build_pp(q, fit_ols(data), box);
  if (method == "er_lasso") {
    double lambda = cv_select(data, FitSpec::lasso(0.0), lasso_lambda_grid(data), 5, cv_seed);
    PointModel f = fit_lasso(data, lambda);
    return build_er_saa(q, f, identity, empirical_residuals(data, f, identity), box);
  }
  if (method == "pp_lasso") {
    double lambda = cv_select(data, FitSpec::lasso(0.0), lasso_lambda_grid(data), 5, cv_seed);
    return build_pp(q, fit_lasso(data, lambda), box);
  }
  if (method == "er_knn") {
    auto k = static_cast<Index>(
        cv_select(data, FitSpec::knn(1), knn_k_grid(data.n()), 5, cv_seed));
    PointModel f = fit_knn(data, k);
    return build_er_saa(q, f, identity, empirical_residuals(data, f, identity), box);
  }
  if (method == "knn_saa") {
    auto k = static_cast<Index>(
        cv_select(data, FitSpec::knn(1), knn_k_grid(data.n()), 5, cv_seed));
    return build_knn_saa(data, q, k);
  }
  if (method == "j_ols") {
    PointModel f = fit_ols(data);
    LooBundle bundle = loo_ols(data);
    return build_j_saa(q, f, identity, loo_residuals(bundle), box);
  }
  if (method == "jplus_ols") {
    LinearModel f = fit_ols(data);
    LooBundle bundle = loo_ols(data);
    return build_jplus_saa_ols(q, f, bundle, data, box);
  }
  if (method == "er_ols_hetero") {
    LinearModel f0 = fit_ols(data);
    HeteroModel het = fit_hetero_loglinear(data, f0, hetero_delta, FeatureTransform::log1p);
    // Two-step: refit each output by weighted least squares with weights
    // 1/q_j(x^i)^2.
    LinearModel f = f0;
    f.kind = LinearKind::wls;
    for (Index j = 0; j < data.dy(); ++j) {
      Vector w(data.n());
      for (Index i = 0; i < data.n(); ++i) {
        Vector qd = q_diagonal(het, data.covariates.row(i).transpose(), data.dy());
        w(i) = 1.0 / (qd(j) * qd(j));
      }
      Dataset single(data.covariates, data.responses.col(j), data.intercept_mode);
      f.coef.row(j) = fit_ols(single, w).coef.row(0);
    }
    return build_er_saa(q, f, het, empirical_residuals(data, f, het), box);
  }
  if (method == "er_knn_hetero") {
    auto k = static_cast<Index>(
        cv_select(data, FitSpec::knn(1), knn_k_grid(data.n()), 5, cv_seed));
    PointModel f = fit_knn(data, k);
    HeteroModel het = fit_hetero_loglinear(data, f, hetero_delta, FeatureTransform::log1p);
    return build_er_saa(q, f, het, empirical_residuals(data, f, het), box);
  }
  throw BadConfig("unknown method: " + method);
}

struct ResultRow {
  std::string method;
  Index n = 0;
  int replication = 0;
  double b99 = 0.0;
  double gap_mean = 0.0;
  double gap_std = 0.0;
  double v_bar = 0.0;
  long solve_ms = 0;
  std::string status = "ok";
};

// One full sweep: per replication draw a query covariate and training data
// (sizes share prefixes), fit every method at every n, certify each candidate
// against batch problems shared across methods for paired comparison.
inline std::vector<ResultRow> run_replications(const ExperimentConfig& cfg) {
  cfg.validate();
  for (const auto& m : cfg.methods) {
    const auto& sup = supported_methods();
    if (std::find(sup.begin(), sup.end(), m) == sup.end())
      throw BadConfig("unknown method: " + m);
  }
  ResourceAllocInstance inst = gen_instance(cfg.n_resources, cfg.n_customers,
                                            mix_seed(cfg.master_seed, {stream::instance}),
                                            cfg.gen);
  TwoStageLp model = to_two_stage(inst);
  Matrix corr = vine_correlation(cfg.d_x, mix_seed(cfg.master_seed, {stream::correlation}));
  CovariateSampler base_sampler(corr, mix_seed(cfg.master_seed, {stream::covariates}));
  DemandModel demand =
      gen_demand_model(base_sampler, cfg.n_customers, cfg.degree, cfg.sigma, cfg.omega,
                       mix_seed(cfg.master_seed, {stream::demand_model}), cfg.median_mc_size);
  SupportBox box = cfg.project ? SupportBox::nonnegative(cfg.n_customers)
                               : SupportBox::unbounded(cfg.n_customers);
  Index n_max = *std::max_element(cfg.n_grid.begin(), cfg.n_grid.end());

  const std::size_t cells_per_rep = cfg.methods.size() * cfg.n_grid.size();
  std::vector<ResultRow> rows(static_cast<std::size_t>(cfg.replications) * cells_per_rep);

  parallel_for(static_cast<std::size_t>(cfg.replications), cfg.threads, [&](std::size_t rep) {
    auto r = static_cast<std::uint64_t>(rep);
    CovariateSampler train_sampler(corr, mix_seed(cfg.master_seed, {stream::covariates, r}));
    Matrix x_train = sample_covariates(train_sampler, n_max);
    Matrix y_train =
        simulate_demand(demand, x_train, mix_seed(cfg.master_seed, {stream::errors, r}));
    CovariateSampler query_sampler(corr, mix_seed(cfg.master_seed, {stream::query, r}));
    Vector x_query = sample_covariates(query_sampler, 1).row(0).transpose();

    std::uint64_t eval_seed = mix_seed(cfg.master_seed, {stream::evaluation, r});
    std::vector<evdetail::BatchStat> batches(static_cast<std::size_t>(cfg.n_batches));
    for (int k = 0; k < cfg.n_batches; ++k)
      batches[static_cast<std::size_t>(k)] = evdetail::make_batch(
          model, demand, x_query, cfg.n_eval, eval_seed, k, cfg.solver_tol, cfg.solver_max_iter);

    std::size_t cell = rep * cells_per_rep;
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni, ++cell) {
        ResultRow& row = rows[cell];
        row.method = cfg.methods[mi];
        row.n = cfg.n_grid[ni];
        row.replication = static_cast<int>(rep);
        try {
          auto t0 = std::chrono::steady_clock::now();
          Matrix xs = x_train.topRows(row.n);
          Matrix ys = y_train.topRows(row.n);
          std::uint64_t cv_seed =
              mix_seed(cfg.master_seed, {stream::cv_folds, r, static_cast<std::uint64_t>(mi),
                                         static_cast<std::uint64_t>(ni)});
          ScenarioSet scen = build_method_scenarios(row.method, xs, ys, x_query, box,
                                                    cfg.hetero_delta, cv_seed);
          SolveResult solved = solve_lshaped(model, scen, cfg.solver_tol, cfg.solver_max_iter);
          auto t1 = std::chrono::steady_clock::now();
          row.solve_ms =
              std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
          UcbReport rep_ucb =
              evdetail::ucb_from_batches(batches, model, solved.z_star, cfg.t_multiplier);
          row.b99 = rep_ucb.b99;
          row.gap_mean = rep_ucb.gap_mean;
          row.gap_std = rep_ucb.gap_std;
          row.v_bar = rep_ucb.v_bar;
          row.status = rep_ucb.absolute ? "ok_absolute" : "ok";
        } catch (const Error& e) {
          row.status = std::string("error:") + e.what();
          row.b99 = row.gap_mean = row.gap_std = row.v_bar = std::nan("");
        }
      }
    }
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Percentiles and CSV output

struct Percentiles {
  double p5, p25, p50, p75, p95;
};

// Linear-interpolation quantiles on the sorted sample (inclusive method).
inline Percentiles percentiles(std::vector<double> values) {
  if (values.empty()) throw EmptyInput("percentiles: empty input");
  std::sort(values.begin(), values.end());
  auto at = [&](double q) {
    double pos = q * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + frac * (values[lo + 1] - values[lo]);
  };
  return {at(0.05), at(0.25), at(0.50), at(0.75), at(0.95)};
}

inline void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "method,n,replication,b99_percent,gap_mean,gap_std,v_bar,solve_ms,status\n";
  for (const auto& r : rows) {
    out << r.method << "," << r.n << "," << r.replication << "," << format_double(r.b99) << ","
        << format_double(r.gap_mean) << "," << format_double(r.gap_std) << ","
        << format_double(r.v_bar) << "," << r.solve_ms << "," << r.status << "\n";
  }
}

inline void write_summary_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "method,n,p5,p25,p50,p75,p95,count\n";
  std::vector<std::pair<std::string, Index>> groups;
  for (const auto& r : rows) {
    std::pair<std::string, Index> g{r.method, r.n};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }
  for (const auto& [method, n] : groups) {
    std::vector<double> vals;
    for (const auto& r : rows)
      if (r.method == method && r.n == n && r.status.rfind("ok", 0) == 0 && !std::isnan(r.b99))
        vals.push_back(r.b99);
    if (vals.empty()) continue;
    Percentiles p = percentiles(vals);
    out << method << "," << n << "," << format_double(p.p5) << "," << format_double(p.p25) << ","
        << format_double(p.p50) << "," << format_double(p.p75) << "," << format_double(p.p95)
        << "," << vals.size() << "\n";
  }
}

}  // namespace ersaa

#endif  // ERSAA_EVALHARNESS_HPP
