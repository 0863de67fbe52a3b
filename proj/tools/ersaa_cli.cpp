// Command-line driver: generate benchmark instances, run replication sweeps,
// certify candidate decisions, and summarize result tables.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "ersaa/config.hpp"

namespace fs = std::filesystem;
using namespace ersaa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitInfeasible = 4;

Vector read_vector_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<double> vals;
  std::string tok;
  while (f >> tok) {
    if (!tok.empty() && tok[0] == '#') {
      std::string rest;
      std::getline(f, rest);
      continue;
    }
    vals.push_back(parse_double(tok));
  }
  Vector v(static_cast<Index>(vals.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = vals[static_cast<std::size_t>(i)];
  return v;
}

void write_vector_file(const Vector& v, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for write: " + path);
  for (Index i = 0; i < v.size(); ++i) f << format_double(v(i)) << "\n";
}

int cmd_gen(const std::string& config_path, const std::string& out_dir) {
  ExperimentConfig cfg = load_config(config_path);
  fs::create_directories(out_dir);
  ResourceAllocInstance inst = gen_instance(cfg.n_resources, cfg.n_customers,
                                            mix_seed(cfg.master_seed, {stream::instance}),
                                            cfg.gen);
  TwoStageLp model = to_two_stage(inst);
  Matrix corr = vine_correlation(cfg.d_x, mix_seed(cfg.master_seed, {stream::correlation}));
  CovariateSampler sampler(corr, mix_seed(cfg.master_seed, {stream::covariates}));
  DemandModel demand =
      gen_demand_model(sampler, cfg.n_customers, cfg.degree, cfg.sigma, cfg.omega,
                       mix_seed(cfg.master_seed, {stream::demand_model}), cfg.median_mc_size);

  std::vector<std::string> meta;
  meta.push_back("master_seed " + std::to_string(cfg.master_seed));
  meta.push_back("scheme cz~U(" + format_double(cfg.gen.cz_low) + "," +
                 format_double(cfg.gen.cz_high) + ") rho~U(" + format_double(cfg.gen.rho_low) +
                 "," + format_double(cfg.gen.rho_high) + ") mu~U(" +
                 format_double(cfg.gen.mu_low) + "," + format_double(cfg.gen.mu_high) +
                 ") qw=tau*max(cz), tau~LN(0.5,0.05)");
  meta.push_back("dims I=" + std::to_string(inst.n_resources) +
                 " J=" + std::to_string(inst.n_customers) + " dx=" + std::to_string(cfg.d_x));
  write_two_stage(model, (fs::path(out_dir) / "instance.txt").string(), meta);

  std::vector<std::string> dmeta;
  dmeta.push_back("master_seed " + std::to_string(cfg.master_seed));
  dmeta.push_back("median_mc_size " + std::to_string(cfg.median_mc_size));
  write_demand_model(demand, sampler, (fs::path(out_dir) / "demand.txt").string(), dmeta);

  std::ofstream cfg_out(fs::path(out_dir) / "config.json");
  cfg_out << emit_config(cfg).dump(2) << "\n";
  std::cout << "wrote " << out_dir << "/instance.txt, demand.txt, config.json\n";
  return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out_csv, bool no_project,
            int threads_override, long seed_override) {
  ExperimentConfig cfg = load_config(config_path);
  if (no_project) cfg.project = false;
  if (threads_override >= 0) cfg.threads = static_cast<unsigned>(threads_override);
  if (seed_override >= 0) cfg.master_seed = static_cast<std::uint64_t>(seed_override);
  auto rows = run_replications(cfg);
  {
    std::ofstream f(out_csv);
    if (!f) throw IoError("cannot open for write: " + out_csv);
    write_results_csv(rows, f);
  }
  fs::path summary = fs::path(out_csv);
  summary.replace_extension(".summary.csv");
  {
    std::ofstream f(summary);
    if (!f) throw IoError("cannot open for write: " + summary.string());
    write_summary_csv(rows, f);
  }
  std::cout << "wrote " << out_csv << " and " << summary.string() << "\n";
  return kExitOk;
}

int cmd_certify(const std::string& instance_path, const std::string& demand_path,
                const std::string& z_path, const std::string& x_path, Index n_eval,
                int n_batches, double t_multiplier, long seed, const std::string& out_csv) {
  TwoStageLp model = read_two_stage(instance_path);
  DemandFile dem = read_demand_model(demand_path);
  Vector z = read_vector_file(z_path);
  Vector x = read_vector_file(x_path);
  UcbReport report = mrp_ucb(model, dem.model, x, z, n_eval, n_batches, t_multiplier,
                             seed < 0 ? 0 : static_cast<std::uint64_t>(seed));
  std::cout << "batches " << n_batches << " n_eval " << n_eval << " t_multiplier "
            << format_double(t_multiplier) << "\n";
  for (Index k = 0; k < report.gaps.size(); ++k)
    std::cout << "batch " << k << " gap " << format_double(report.gaps(k)) << " optimum "
              << format_double(report.batch_optima(k)) << "\n";
  std::cout << "v_bar " << format_double(report.v_bar) << "\n";
  std::cout << "gap_mean " << format_double(report.gap_mean) << " gap_std "
            << format_double(report.gap_std) << "\n";
  std::cout << (report.absolute ? "b99_absolute " : "b99_percent ") << format_double(report.b99)
            << "\n";
  if (!out_csv.empty()) {
    std::ofstream f(out_csv);
    if (!f) throw IoError("cannot open for write: " + out_csv);
    f << "batch,gap,batch_optimum,batch_cost\n";
    for (Index k = 0; k < report.gaps.size(); ++k)
      f << k << "," << format_double(report.gaps(k)) << ","
        << format_double(report.batch_optima(k)) << "," << format_double(report.batch_costs(k))
        << "\n";
  }
  return kExitOk;
}

int cmd_summarize(const std::string& in_csv, const std::string& out_csv) {
  std::ifstream f(in_csv);
  if (!f) throw IoError("cannot open: " + in_csv);
  std::string header;
  if (!std::getline(f, header)) throw IoError("summarize: empty results file");
  auto cols = split_csv_line(header);
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < cols.size(); ++i) idx[cols[i]] = i;
  for (const char* need : {"method", "n", "replication", "b99_percent", "status"})
    if (!idx.count(need)) throw IoError(std::string("summarize: missing column ") + need);
  std::vector<ResultRow> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    ResultRow r;
    r.method = cells.at(idx["method"]);
    r.n = static_cast<Index>(std::stol(cells.at(idx["n"])));
    r.replication = std::stoi(cells.at(idx["replication"]));
    r.b99 = parse_double(cells.at(idx["b99_percent"]));
    r.status = cells.at(idx["status"]);
    rows.push_back(std::move(r));
  }
  std::ofstream out(out_csv);
  if (!out) throw IoError("cannot open for write: " + out_csv);
  write_summary_csv(rows, out);
  std::cout << "wrote " << out_csv << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residuals-based SAA toolkit for conditional stochastic programs"};
  app.require_subcommand(1);

  std::string config_path, out_path = "results.csv", out_dir = "out";
  std::string instance_path, demand_path, z_path, x_path, cert_csv;
  bool no_project = false;
  int threads = -1;
  long seed = -1;
  Index n_eval = 1000;
  int n_batches = 30;
  double t_multiplier = 2.462;

  auto* gen = app.add_subcommand("gen", "Generate instance and demand-model files");
  gen->add_option("--config", config_path, "JSON config")->required();
  gen->add_option("--out", out_dir, "Output directory");

  auto* run = app.add_subcommand("run", "Run a replication sweep");
  run->add_option("--config", config_path, "JSON config")->required();
  run->add_option("--out", out_path, "Results CSV path");
  run->add_flag("--no-project", no_project, "Disable scenario projection onto the support");
  run->add_option("--threads", threads, "Worker thread cap (0 = hardware)");
  run->add_option("--seed", seed, "Master seed override");

  auto* certify = app.add_subcommand("certify", "Certify a candidate decision");
  certify->add_option("--instance", instance_path, "Instance file")->required();
  certify->add_option("--demand", demand_path, "Demand-model file")->required();
  certify->add_option("--z", z_path, "Candidate decision file")->required();
  certify->add_option("--x", x_path, "Covariate realization file")->required();
  certify->add_option("--n-eval", n_eval, "Samples per batch");
  certify->add_option("--batches", n_batches, "Number of batches");
  certify->add_option("--t-multiplier", t_multiplier, "Confidence multiplier");
  certify->add_option("--seed", seed, "Evaluation seed");
  certify->add_option("--out", cert_csv, "Optional per-batch CSV");

  auto* summarize = app.add_subcommand("summarize", "Percentile summary of a results CSV");
  summarize->add_option("--in", config_path, "Results CSV")->required();
  summarize->add_option("--out", out_path, "Summary CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(config_path, out_dir);
    if (run->parsed()) return cmd_run(config_path, out_path, no_project, threads, seed);
    if (certify->parsed())
      return cmd_certify(instance_path, demand_path, z_path, x_path, n_eval, n_batches,
                         t_multiplier, seed, cert_csv);
    if (summarize->parsed()) return cmd_summarize(config_path, out_path);
  } catch (const InfeasibleCandidate& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const BadConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitConfig;
}
