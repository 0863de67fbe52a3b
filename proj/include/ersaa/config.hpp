#ifndef ERSAA_CONFIG_HPP
#define ERSAA_CONFIG_HPP

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ersaa/evalharness.hpp"

namespace ersaa {

// JSON run configuration. Unknown keys are rejected anywhere in the document
// so a typo cannot silently fall back to a default.
namespace cfgdetail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                           const std::string& where) {
  if (!obj.is_object()) throw BadConfig("config: " + where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw BadConfig("config: unknown key '" + where + it.key() + "'");
}

template <class T>
void read_field(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw BadConfig(std::string("config: bad value for '") + key + "'");
  }
}

}  // namespace cfgdetail

inline ExperimentConfig parse_config(const nlohmann::json& doc) {
  using cfgdetail::read_field;
  using cfgdetail::reject_unknown;
  ExperimentConfig cfg;
  reject_unknown(doc, {"master_seed", "instance", "demand", "experiment", "solver", "run"}, "");

  read_field(doc, "master_seed", cfg.master_seed);

  if (doc.contains("instance")) {
    const auto& inst = doc.at("instance");
    reject_unknown(inst,
                   {"n_resources", "n_customers", "z_max", "cz_low", "cz_high", "rho_low",
                    "rho_high", "mu_low", "mu_high"},
                   "instance.");
    read_field(inst, "n_resources", cfg.n_resources);
    read_field(inst, "n_customers", cfg.n_customers);
    read_field(inst, "z_max", cfg.gen.z_max);
    read_field(inst, "cz_low", cfg.gen.cz_low);
    read_field(inst, "cz_high", cfg.gen.cz_high);
    read_field(inst, "rho_low", cfg.gen.rho_low);
    read_field(inst, "rho_high", cfg.gen.rho_high);
    read_field(inst, "mu_low", cfg.gen.mu_low);
    read_field(inst, "mu_high", cfg.gen.mu_high);
  }
  if (doc.contains("demand")) {
    const auto& dem = doc.at("demand");
    reject_unknown(dem, {"d_x", "p", "sigma", "omega", "median_mc_size"}, "demand.");
    read_field(dem, "d_x", cfg.d_x);
    read_field(dem, "p", cfg.degree);
    read_field(dem, "sigma", cfg.sigma);
    read_field(dem, "omega", cfg.omega);
    read_field(dem, "median_mc_size", cfg.median_mc_size);
  }
  if (doc.contains("experiment")) {
    const auto& ex = doc.at("experiment");
    reject_unknown(ex,
                   {"methods", "n_grid", "replications", "n_eval", "n_batches", "t_multiplier",
                    "hetero_delta"},
                   "experiment.");
    read_field(ex, "methods", cfg.methods);
    read_field(ex, "n_grid", cfg.n_grid);
    read_field(ex, "replications", cfg.replications);
    read_field(ex, "n_eval", cfg.n_eval);
    read_field(ex, "n_batches", cfg.n_batches);
    read_field(ex, "t_multiplier", cfg.t_multiplier);
    read_field(ex, "hetero_delta", cfg.hetero_delta);
  }
  if (doc.contains("solver")) {
    const auto& so = doc.at("solver");
    reject_unknown(so, {"tol", "max_iter", "extensive_cap"}, "solver.");
    read_field(so, "tol", cfg.solver_tol);
    read_field(so, "max_iter", cfg.solver_max_iter);
    read_field(so, "extensive_cap", cfg.extensive_cap);
  }
  if (doc.contains("run")) {
    const auto& ru = doc.at("run");
    reject_unknown(ru, {"project", "threads"}, "run.");
    read_field(ru, "project", cfg.project);
    read_field(ru, "threads", cfg.threads);
  }
  if (cfg.methods.empty()) cfg.methods = {"er_ols"};
  if (cfg.n_grid.empty()) cfg.n_grid = {5 * (cfg.d_x + 1)};
  cfg.validate();
  for (const auto& m : cfg.methods) {
    const auto& sup = supported_methods();
    if (std::find(sup.begin(), sup.end(), m) == sup.end())
      throw BadConfig("config: unknown method '" + m + "'");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw BadConfig("config: cannot open " + path);
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw BadConfig(std::string("config: parse error: ") + e.what());
  }
  return parse_config(doc);
}

// Normalized re-emission of a configuration; loading the output yields an
// identical configuration.
inline nlohmann::json emit_config(const ExperimentConfig& cfg) {
  nlohmann::json doc;
  doc["master_seed"] = cfg.master_seed;
  doc["instance"] = {{"n_resources", cfg.n_resources}, {"n_customers", cfg.n_customers},
                     {"z_max", cfg.gen.z_max},         {"cz_low", cfg.gen.cz_low},
                     {"cz_high", cfg.gen.cz_high},     {"rho_low", cfg.gen.rho_low},
                     {"rho_high", cfg.gen.rho_high},   {"mu_low", cfg.gen.mu_low},
                     {"mu_high", cfg.gen.mu_high}};
  doc["demand"] = {{"d_x", cfg.d_x},
                   {"p", cfg.degree},
                   {"sigma", cfg.sigma},
                   {"omega", cfg.omega},
                   {"median_mc_size", cfg.median_mc_size}};
  doc["experiment"] = {{"methods", cfg.methods},        {"n_grid", cfg.n_grid},
                       {"replications", cfg.replications}, {"n_eval", cfg.n_eval},
                       {"n_batches", cfg.n_batches},    {"t_multiplier", cfg.t_multiplier},
                       {"hetero_delta", cfg.hetero_delta}};
  doc["solver"] = {{"tol", cfg.solver_tol},
                   {"max_iter", cfg.solver_max_iter},
                   {"extensive_cap", cfg.extensive_cap}};
  doc["run"] = {{"project", cfg.project}, {"threads", cfg.threads}};
  return doc;
}

}  // namespace ersaa

#endif  // ERSAA_CONFIG_HPP
