#ifndef ERSAA_BENCH_HPP
#define ERSAA_BENCH_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "ersaa/rng.hpp"
#include "ersaa/twostage.hpp"

namespace ersaa {

// Resource allocation: order z_i of resource i, allocate v_ij to customer
// type j, pay q_w_j per unit of unmet demand w_j.
struct ResourceAllocInstance {
  Index n_resources = 0;
  Index n_customers = 0;
  Vector c_z;  // order costs
  Vector rho;  // yields
  Matrix mu;   // service rates, |I| x |J|
  Vector q_w;  // unmet-demand penalties
  double z_max = 1e4;
};

// Demand model: Y_j = phi_j + sum_l zeta_jl X_l^p + q_j(X) eps_j with
// q_j(x)^2 = s_j exp(sum_l pi_jl log(1+x_l)) over the three active covariates.
struct DemandModel {
  Vector phi;                 // |J|
  Matrix zeta;                // |J| x 3
  std::vector<Index> active;  // three covariate indices
  double degree = 1.0;        // p in {0.5, 1, 2}
  double sigma = 5.0;
  int omega = 1;
  Matrix pi_star;  // |J| x 3
  Vector s;        // |J| median-calibration factors
};

struct CovariateSampler {
  Index d_x = 0;
  Matrix correlation;
  std::uint64_t seed = 0;
  Matrix chol;  // lower Cholesky factor of correlation

  CovariateSampler() = default;
  CovariateSampler(Matrix corr, std::uint64_t sd)
      : d_x(corr.rows()), correlation(std::move(corr)), seed(sd) {
    if (correlation.rows() != correlation.cols())
      throw DimensionMismatch("covariate sampler: correlation not square");
    Eigen::LLT<Matrix> llt(correlation);
    if (llt.info() != Eigen::Success) {
      // Shave off numerically indefinite directions.
      Matrix jittered = correlation + 1e-12 * Matrix::Identity(d_x, d_x);
      llt.compute(jittered);
      if (llt.info() != Eigen::Success)
        throw DomainError("covariate sampler: correlation not positive definite");
    }
    chol = llt.matrixL();
  }
};

// Random correlation matrix by the C-vine construction: partial correlations
// sampled from Beta(2,2) rescaled to (-1,1), composed into unconditional
// correlations by the standard recursion.
inline Matrix vine_correlation(Index d_x, std::uint64_t seed) {
  if (d_x < 1) throw BadConfig("vine_correlation: d_x must be positive");
  Rng rng = Rng::from(seed, {stream::correlation});
  Matrix partial = Matrix::Zero(d_x, d_x);
  Matrix corr = Matrix::Identity(d_x, d_x);
  for (Index k = 0; k < d_x - 1; ++k) {
    for (Index i = k + 1; i < d_x; ++i) {
      double p = 2.0 * rng.beta22() - 1.0;
      partial(k, i) = p;
      for (Index l = k - 1; l >= 0; --l)
        p = p * std::sqrt((1.0 - partial(l, k) * partial(l, k)) *
                          (1.0 - partial(l, i) * partial(l, i))) +
            partial(l, k) * partial(l, i);
      corr(k, i) = corr(i, k) = p;
    }
  }
  return corr;
}

// |v| componentwise with v ~ N(0, correlation); deterministic per seed, and
// a longer draw extends a shorter one row for row.
inline Matrix sample_covariates(const CovariateSampler& sampler, Index n) {
  if (n < 1) throw BadConfig("sample_covariates: n must be positive");
  Rng rng = Rng::from(sampler.seed, {stream::covariates});
  Matrix out(n, sampler.d_x);
  Vector z(sampler.d_x);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < sampler.d_x; ++j) z(j) = rng.normal();
    out.row(i) = (sampler.chol * z).cwiseAbs().transpose();
  }
  return out;
}

inline Vector f_star(const DemandModel& m, const Vector& x) {
  Vector y = m.phi;
  for (std::size_t l = 0; l < m.active.size(); ++l) {
    double v = std::pow(x(m.active[l]), m.degree);
    y += m.zeta.col(static_cast<Index>(l)) * v;
  }
  return y;
}

inline Vector q_star_diag(const DemandModel& m, const Vector& x) {
  const Index J = m.phi.size();
  if (m.omega == 1) return Vector::Ones(J);
  Vector logsum = Vector::Zero(J);
  for (std::size_t l = 0; l < m.active.size(); ++l)
    logsum += m.pi_star.col(static_cast<Index>(l)) * std::log1p(x(m.active[l]));
  return (m.s.array() * logsum.array().exp()).sqrt();
}

inline DemandModel gen_demand_model(const CovariateSampler& sampler, Index n_customers,
                                    double p, double sigma, int omega, std::uint64_t seed,
                                    Index median_mc_size = 10001) {
  if (!(p == 0.5 || p == 1.0 || p == 2.0))
    throw BadConfig("gen_demand_model: p must be one of {0.5, 1, 2}");
  if (omega < 1 || omega > 3) throw BadConfig("gen_demand_model: omega must be in {1,2,3}");
  if (sampler.d_x < 3)
    throw BadConfig("gen_demand_model: need at least three covariates");
  if (n_customers < 1) throw BadConfig("gen_demand_model: n_customers must be positive");
  if (sigma < 0) throw BadConfig("gen_demand_model: sigma must be nonnegative");
  if (median_mc_size < 1) throw BadConfig("gen_demand_model: median_mc_size");

  Rng rng = Rng::from(seed, {stream::demand_model});
  DemandModel m;
  m.degree = p;
  m.sigma = sigma;
  m.omega = omega;
  m.active = {0, 1, 2};
  const Index J = n_customers;
  m.phi.resize(J);
  for (Index j = 0; j < J; ++j) m.phi(j) = 50.0 + 5.0 * rng.normal();
  m.zeta.resize(J, 3);
  const double base[3] = {10.0, 5.0, 2.0};
  for (int l = 0; l < 3; ++l)
    for (Index j = 0; j < J; ++j) m.zeta(j, l) = base[l] + rng.uniform(-4.0, 4.0);

  m.pi_star = Matrix::Zero(J, 3);
  m.s = Vector::Ones(J);
  if (omega > 1) {
    double hi = 2.0 * (omega - 1) * (omega - 1);
    for (Index j = 0; j < J; ++j)
      for (int l = 0; l < 3; ++l) m.pi_star(j, l) = rng.uniform(0.0, hi);
    // Calibrate s_j so that P(q_j(X) > 1) is one half: q_j^2 = s_j E_j with
    // E_j = exp(sum pi log(1+X_l)), so s_j must be the reciprocal of the
    // median of E_j.
    CovariateSampler mc(sampler.correlation, mix_seed(seed, {stream::median_mc}));
    Matrix xs = sample_covariates(mc, median_mc_size);
    std::vector<double> vals(static_cast<std::size_t>(median_mc_size));
    for (Index j = 0; j < J; ++j) {
      for (Index i = 0; i < median_mc_size; ++i) {
        double ls = 0.0;
        for (std::size_t l = 0; l < m.active.size(); ++l)
          ls += m.pi_star(j, static_cast<Index>(l)) * std::log1p(xs(i, m.active[l]));
        vals[static_cast<std::size_t>(i)] = std::exp(ls);
      }
      auto mid = vals.begin() + median_mc_size / 2;
      std::nth_element(vals.begin(), mid, vals.end());
      m.s(j) = 1.0 / *mid;
    }
  }
  return m;
}

inline Matrix simulate_demand(const DemandModel& model, const Matrix& x, std::uint64_t seed) {
  if ((x.array() < 0).any())
    throw DomainError("simulate_demand: covariates must be nonnegative");
  for (Index l : model.active)
    if (l >= x.cols()) throw DimensionMismatch("simulate_demand: covariate width");
  Rng rng = Rng::from(seed, {stream::errors});
  const Index n = x.rows(), J = model.phi.size();
  Matrix y(n, J);
  for (Index i = 0; i < n; ++i) {
    Vector xi = x.row(i).transpose();
    Vector mean = f_star(model, xi);
    Vector q = q_star_diag(model, xi);
    for (Index j = 0; j < J; ++j) y(i, j) = mean(j) + q(j) * rng.normal(0.0, model.sigma);
  }
  return y;
}

// Cost-parameter scheme for c_z, rho, mu; the q_w recipe (lognormal tau times
// the max order cost) is fixed.
struct GenConfig {
  double cz_low = 8.0, cz_high = 12.0;
  double rho_low = 0.8, rho_high = 1.0;
  double mu_low = 0.5, mu_high = 2.0;
  double z_max = 1e4;
};

inline ResourceAllocInstance gen_instance(Index n_resources, Index n_customers,
                                          std::uint64_t seed, const GenConfig& config = {}) {
  if (n_resources < 1 || n_customers < 1)
    throw BadConfig("gen_instance: dimensions must be positive");
  if (!(config.cz_low > 0 && config.cz_high >= config.cz_low && config.rho_low > 0 &&
        config.rho_high >= config.rho_low && config.mu_low > 0 &&
        config.mu_high >= config.mu_low && config.z_max > 0))
    throw BadConfig("gen_instance: parameter ranges must be positive and ordered");
  Rng rng = Rng::from(seed, {stream::instance});
  ResourceAllocInstance inst;
  inst.n_resources = n_resources;
  inst.n_customers = n_customers;
  inst.z_max = config.z_max;
  inst.c_z.resize(n_resources);
  for (Index i = 0; i < n_resources; ++i) inst.c_z(i) = rng.uniform(config.cz_low, config.cz_high);
  inst.rho.resize(n_resources);
  for (Index i = 0; i < n_resources; ++i) inst.rho(i) = rng.uniform(config.rho_low, config.rho_high);
  inst.mu.resize(n_resources, n_customers);
  for (Index i = 0; i < n_resources; ++i)
    for (Index j = 0; j < n_customers; ++j) inst.mu(i, j) = rng.uniform(config.mu_low, config.mu_high);
  double cmax = inst.c_z.cwiseAbs().maxCoeff();
  inst.q_w.resize(n_customers);
  for (Index j = 0; j < n_customers; ++j) inst.q_w(j) = rng.lognormal(0.5, 0.05) * cmax;
  return inst;
}

// Equality-form recourse with documented column order: allocations v_ij
// (resource-major), unmet demand w_j, capacity slack_i, demand surplus_j.
// Rows: capacity i, then demand j. Unmet-demand and surplus columns make the
// recourse complete and W full row rank by construction.
inline TwoStageLp to_two_stage(const ResourceAllocInstance& inst) {
  const Index I = inst.n_resources, J = inst.n_customers;
  const Index m2 = I + J;
  const Index dv = I * J + J + I + J;
  TwoStageLp m;
  m.d_z = I;
  m.c_z = inst.c_z;
  m.W = Matrix::Zero(m2, dv);
  m.T = Matrix::Zero(m2, I);
  m.c_v = Vector::Zero(dv);
  const Index w_off = I * J, slack_off = I * J + J, surplus_off = I * J + J + I;
  for (Index i = 0; i < I; ++i) {
    for (Index j = 0; j < J; ++j) m.W(i, i * J + j) = 1.0;
    m.W(i, slack_off + i) = 1.0;
    m.T(i, i) = -inst.rho(i);
  }
  for (Index j = 0; j < J; ++j) {
    for (Index i = 0; i < I; ++i) m.W(I + j, i * J + j) = inst.mu(i, j);
    m.W(I + j, w_off + j) = 1.0;
    m.W(I + j, surplus_off + j) = -1.0;
    m.c_v(w_off + j) = inst.q_w(j);
  }
  m.h_matrix = Matrix::Zero(m2, J);
  for (Index j = 0; j < J; ++j) m.h_matrix(I + j, j) = 1.0;
  m.h_offset = Vector::Zero(m2);
  m.first_stage = LpProblem(Vector::Zero(I), Matrix::Zero(0, I), Vector::Zero(0),
                            Vector::Zero(I), Vector::Constant(I, inst.z_max));
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Demand model / sampler serialization

inline void write_demand_model(const DemandModel& m, const CovariateSampler& sampler,
                               std::ostream& out, const std::vector<std::string>& meta = {}) {
  out << "ersaa-demand v1\n";
  out << "dims " << m.phi.size() << " " << sampler.d_x << "\n";
  out << "p " << format_double(m.degree) << "\n";
  out << "sigma " << format_double(m.sigma) << "\n";
  out << "omega " << m.omega << "\n";
  out << "active";
  for (Index l : m.active) out << " " << l;
  out << "\n";
  tsdetail::write_vector(out, "phi", m.phi);
  tsdetail::write_matrix(out, "zeta", m.zeta);
  tsdetail::write_matrix(out, "pi_star", m.pi_star);
  tsdetail::write_vector(out, "s", m.s);
  tsdetail::write_matrix(out, "correlation", sampler.correlation);
  out << "sampler_seed " << sampler.seed << "\n";
  for (const auto& line : meta) out << "meta " << line << "\n";
  out << "end\n";
}

struct DemandFile {
  DemandModel model;
  CovariateSampler sampler;
};

inline DemandFile read_demand_model(std::istream& in) {
  tsdetail::BlockReader r(in);
  r.expect("ersaa-demand");
  r.expect("v1");
  r.expect("dims");
  Index J = r.integer(), dx = r.integer();
  DemandModel m;
  r.expect("p");
  m.degree = parse_double(r.next_token());
  r.expect("sigma");
  m.sigma = parse_double(r.next_token());
  r.expect("omega");
  m.omega = static_cast<int>(r.integer());
  r.expect("active");
  m.active.resize(3);
  for (auto& l : m.active) l = r.integer();
  m.phi = r.vector("phi", J);
  m.zeta = r.matrix("zeta");
  m.pi_star = r.matrix("pi_star");
  m.s = r.vector("s", J);
  Matrix corr = r.matrix("correlation");
  r.expect("sampler_seed");
  std::uint64_t seed = r.u64();
  std::string tok;
  while (in >> tok) {
    if (tok == "end") break;
    if (tok == "meta") {
      std::string line;
      std::getline(in, line);
    }
  }
  if (corr.rows() != dx) throw IoError("demand file: correlation shape");
  DemandFile f{std::move(m), CovariateSampler(std::move(corr), seed)};
  return f;
}

inline void write_demand_model(const DemandModel& m, const CovariateSampler& sampler,
                               const std::string& path,
                               const std::vector<std::string>& meta = {}) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for write: " + path);
  write_demand_model(m, sampler, f, meta);
}

inline DemandFile read_demand_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  return read_demand_model(f);
}

}  // namespace ersaa

#endif  // ERSAA_BENCH_HPP
