#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfr/errors.hpp"
#include "dfr/fit.hpp"
#include "dfr/io.hpp"
#include "dfr/log.hpp"
#include "dfr/parallel.hpp"
#include "dfr/simulate.hpp"

namespace dfr::cli {

namespace detail {

inline const json& require_key(const json& j, const char* key, const std::string& file) {
  if (!j.contains(key))
    throw ValidationError(file + ": missing required key '" + key + "'");
  return j.at(key);
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
}

inline FitConfig fit_config_from_json(const json& doc, const std::string& file,
                                      bool seed_required) {
  FitConfig cfg;
  try {
    cfg.basis = dfr::detail::basis_from_json(require_key(doc, "basis", file));
    cfg.K = require_key(doc, "K", file).get<int>();
    cfg.max_iter = require_key(doc, "max_iter", file).get<int>();
    cfg.tol = require_key(doc, "tol", file).get<double>();
    if (seed_required)
      cfg.seed = require_key(doc, "seed", file).get<std::uint64_t>();
    else
      cfg.seed = doc.value("seed", std::uint64_t{0});
    cfg.penalty_order = doc.value("penalty_order", cfg.penalty_order);
    cfg.window = doc.value("window", cfg.window);
    if (doc.contains("delta_grid"))
      cfg.delta_grid = doc.at("delta_grid").get<std::vector<double>>();
    cfg.gibbs_burnin = doc.value("gibbs_burnin", cfg.gibbs_burnin);
    cfg.gibbs_thin = doc.value("gibbs_thin", cfg.gibbs_thin);
    cfg.max_tries = doc.value("max_tries", cfg.max_tries);
    cfg.grid_size = doc.value("grid_size", cfg.grid_size);
    cfg.threads = doc.value("threads", cfg.threads);
  } catch (const json::exception& e) {
    throw ValidationError(file + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

inline Design design_from_string(const std::string& s, const std::string& file) {
  if (s == "R") return Design::R;
  if (s == "RT") return Design::RT;
  if (s == "RM") return Design::RM;
  if (s == "IRS") return Design::IRS;
  throw ValidationError(file + ": unknown design '" + s + "' (expected R, RT, RM, IRS)");
}

inline std::string design_to_string(Design d) {
  switch (d) {
    case Design::R: return "R";
    case Design::RT: return "RT";
    case Design::RM: return "RM";
    case Design::IRS: return "IRS";
  }
  return "?";
}

inline SimScenario scenario_from_json(const json& doc, const std::string& file,
                                      bool seed_required) {
  SimScenario sc;
  try {
    sc.design = design_from_string(require_key(doc, "design", file).get<std::string>(), file);
    sc.N = require_key(doc, "N", file).get<int>();
    sc.M = require_key(doc, "M", file).get<int>();
    sc.sigma2 = require_key(doc, "sigma2", file).get<double>();
    sc.rho = require_key(doc, "rho", file).get<double>();
    if (seed_required)
      sc.seed = require_key(doc, "seed", file).get<std::uint64_t>();
    else
      sc.seed = doc.value("seed", std::uint64_t{0});
    sc.r = doc.value("r", sc.r);
    sc.p_c = doc.value("p_c", sc.p_c);
    sc.p = doc.value("p", sc.p);
    sc.latent_scale = doc.value("latent_scale", sc.latent_scale);
    std::string cc = doc.value("coefficient_case", std::string("simple"));
    if (cc == "simple")
      sc.coefficient_case = CoefCase::simple;
    else if (cc == "complex")
      sc.coefficient_case = CoefCase::complex;
    else
      throw ValidationError(file + ": coefficient_case must be 'simple' or 'complex'");
  } catch (const json::exception& e) {
    throw ValidationError(file + ": " + e.what());
  }
  sc.validate();
  return sc;
}

inline void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

inline std::vector<std::pair<std::string, Eigen::VectorXd>> load_covariates(
    const std::string& cov_path, const ParamsFile& pf) {
  auto lines = dfr::detail::read_lines(cov_path);
  if (lines.empty()) throw ValidationError(cov_path + ": empty file");
  auto header = dfr::detail::split_csv(lines[0]);
  if (header.empty() || header[0] != "subject_id")
    throw ValidationError(cov_path + ":1: header must start with 'subject_id'");
  const int q = static_cast<int>(pf.params.B.rows());
  if (static_cast<int>(header.size()) != q)
    throw ValidationError(cov_path + ": expected " + std::to_string(q - 1) +
                          " covariate columns to match the fitted model, got " +
                          std::to_string(header.size() - 1));
  std::vector<std::pair<std::string, Eigen::VectorXd>> out;
  for (size_t ln = 1; ln < lines.size(); ++ln) {
    if (dfr::detail::trim(lines[ln]).empty()) continue;
    auto f = dfr::detail::split_csv(lines[ln]);
    int line_no = static_cast<int>(ln) + 1;
    if (static_cast<int>(f.size()) != q)
      throw ValidationError(cov_path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(q) + " fields");
    Eigen::VectorXd x(q);
    x[0] = 1.0;
    for (int c = 1; c < q; ++c)
      x[c] = dfr::detail::parse_double(f[c], cov_path, line_no, header[c].c_str());
    out.emplace_back(f[0], std::move(x));
  }
  if (out.empty()) throw ValidationError(cov_path + ": no subjects");
  return out;
}

}  // namespace detail

inline int cmd_fit(const std::string& obs_path, const std::string& cov_path,
                   const std::string& config_path, const std::string& out_dir, int threads) {
  json cfg_doc = detail::load_json(config_path);
  FitConfig cfg = detail::fit_config_from_json(cfg_doc, config_path, /*seed_required=*/true);
  if (threads > 0) cfg.threads = threads;
  IngestResult ing = ingest_csv(obs_path, cov_path);
  for (const auto& w : ing.warnings) log_info("warning: " + w);
  log_info("fitting " + std::to_string(ing.data.n()) + " subjects, " +
           std::to_string(ing.data.total_obs()) + " observations");
  FitResult fit = dfr::fit(ing.data, cfg);
  log_info("finished after " + std::to_string(fit.iterations) + " iterations, converged=" +
           (fit.converged ? std::string("true") : std::string("false")));

  detail::ensure_out_dir(out_dir);
  json meta;
  meta["seed"] = cfg.seed;
  meta["time_offset"] = ing.time_offset;
  meta["time_scale"] = ing.time_scale;
  meta["covariates"] = ing.data.q();
  meta["covariate_names"] = ing.covariate_names;
  meta["subjects"] = ing.data.n();
  meta["total_obs"] = ing.data.total_obs();
  meta["grid_size"] = cfg.grid_size;
  std::filesystem::path out(out_dir);
  write_params_json((out / "params.json").string(), fit, meta);
  write_standardized_csv((out / "standardized.csv").string(), fit.standardized, fit.basis);
  write_trace_csv((out / "trace.csv").string(), fit);
  return 0;
}

inline int cmd_simulate(const std::string& scenario_path, const std::string& out_dir) {
  json doc = detail::load_json(scenario_path);
  SimScenario sc = detail::scenario_from_json(doc, scenario_path, /*seed_required=*/true);
  int grid_size = doc.value("grid_size", 101);
  auto [data, truth] = generate_dataset(sc, grid_size);
  detail::ensure_out_dir(out_dir);
  std::filesystem::path out(out_dir);
  write_observations_csv((out / "obs.csv").string(), data);
  write_covariates_csv((out / "cov.csv").string(), data);

  json tj;
  tj["scenario"] = doc;
  json nu = json::array(), rs = json::array();
  for (Eigen::Index a = 0; a < truth.nu.size(); ++a) nu.push_back(truth.nu[a]);
  for (Eigen::Index a = 0; a < truth.rho_std.size(); ++a) rs.push_back(truth.rho_std[a]);
  tj["nu"] = std::move(nu);
  tj["rho_std"] = std::move(rs);
  tj["sigma2"] = truth.sigma2;
  write_text_atomic((out / "truth.json").string(), tj.dump(2) + "\n");

  std::string curves = "t,beta0,beta1,alpha_0,alpha_1,kernel";
  for (int a = 1; a <= sc.p; ++a) curves += ",phi_" + std::to_string(a);
  curves += "\n";
  for (Eigen::Index g = 0; g < truth.grid.size(); ++g) {
    double t = truth.grid[g];
    curves += format_double(t);
    curves += "," + format_double(truth.beta0(t));
    curves += "," + format_double(truth.beta1(t));
    curves += "," + format_double(truth.alpha(0, g));
    curves += "," + format_double(truth.alpha(1, g));
    curves += "," + format_double(truth.kernel[g]);
    for (int a = 0; a < sc.p; ++a) curves += "," + format_double(truth.phi(a, g));
    curves += "\n";
  }
  write_text_atomic((out / "truth_curves.csv").string(), curves);

  std::string latent = "subject_id,time,zeta\n";
  for (size_t i = 0; i < truth.zeta.size(); ++i)
    for (Eigen::Index j = 0; j < truth.zeta[i].size(); ++j)
      latent += data.subjects[i].id + "," + format_double(data.subjects[i].times[j]) + "," +
                format_double(truth.zeta[i][j]) + "\n";
  write_text_atomic((out / "latent.csv").string(), latent);
  log_info("simulated " + std::to_string(data.n()) + " subjects to " + out_dir);
  return 0;
}

/// Replicate seeds are derived from the sweep seed through the replicate
/// stream, so each (replicate) shares covariate and score draws across
/// designs while staying independent across replicates.
inline std::uint64_t replicate_seed(std::uint64_t sweep_seed, int replicate) {
  return RngStream::derive(sweep_seed, {kStreamReplicate, static_cast<std::uint64_t>(replicate)})
      .next_u64();
}

inline int cmd_eval(const std::string& sweep_path, const std::string& out_dir, int threads) {
  json doc = detail::load_json(sweep_path);
  const std::uint64_t sweep_seed = detail::require_key(doc, "seed", sweep_path).get<std::uint64_t>();
  const int replicates = detail::require_key(doc, "replicates", sweep_path).get<int>();
  if (replicates < 1) throw ValidationError(sweep_path + ": replicates must be >= 1");
  FitConfig base_cfg = detail::fit_config_from_json(
      detail::require_key(doc, "fit", sweep_path), sweep_path + "#fit", /*seed_required=*/false);
  if (threads <= 0) threads = doc.value("threads", 1);
  const json& sc_arr = detail::require_key(doc, "scenarios", sweep_path);
  if (!sc_arr.is_array() || sc_arr.empty())
    throw ValidationError(sweep_path + ": 'scenarios' must be a nonempty array");
  std::vector<SimScenario> scenarios;
  for (const auto& s : sc_arr)
    scenarios.push_back(detail::scenario_from_json(s, sweep_path, /*seed_required=*/false));

  struct Job {
    int scenario;
    int replicate;
  };
  std::vector<Job> jobs;
  for (int s = 0; s < static_cast<int>(scenarios.size()); ++s)
    for (int r = 0; r < replicates; ++r) jobs.push_back({s, r});
  std::vector<MseRecord> records(jobs.size());
  std::vector<std::string> failures(jobs.size());

  parallel_for(jobs.size(), threads, [&](std::size_t k) {
    const Job& job = jobs[k];
    try {
      SimScenario sc = scenarios[job.scenario];
      sc.seed = replicate_seed(sweep_seed, job.replicate);
      auto [data, truth] = generate_dataset(sc, base_cfg.grid_size);
      FitConfig cfg = base_cfg;
      cfg.seed = sc.seed;
      cfg.threads = 1;
      FitResult fit = dfr::fit(data, cfg);
      records[k] = mse_eval(fit, truth, truth.grid);
      log_debug("scenario " + std::to_string(job.scenario) + " replicate " +
                std::to_string(job.replicate) + " done");
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  });
  for (size_t k = 0; k < jobs.size(); ++k)
    if (!failures[k].empty())
      throw NumericalError("scenario " + std::to_string(jobs[k].scenario) + " replicate " +
                           std::to_string(jobs[k].replicate) + ": " + failures[k]);

  detail::ensure_out_dir(out_dir);
  std::filesystem::path out(out_dir);
  static const char* param_names[7] = {"beta0", "beta1", "psi1", "psi2", "nu1", "nu2", "sigma2"};
  auto field = [](const MseRecord& r, int p) {
    switch (p) {
      case 0: return r.beta0;
      case 1: return r.beta1;
      case 2: return r.psi1;
      case 3: return r.psi2;
      case 4: return r.nu1;
      case 5: return r.nu2;
      default: return r.sigma2;
    }
  };

  std::string detail_csv = "design,N,M,sigma2,rho,replicate,parameter,mse\n";
  for (size_t k = 0; k < jobs.size(); ++k) {
    const SimScenario& sc = scenarios[jobs[k].scenario];
    std::string prefix = detail::design_to_string(sc.design) + "," + std::to_string(sc.N) + "," +
                         std::to_string(sc.M) + "," + format_double(sc.sigma2) + "," +
                         format_double(sc.rho) + "," + std::to_string(jobs[k].replicate);
    for (int p = 0; p < 7; ++p)
      detail_csv += prefix + "," + param_names[p] + "," + format_double(field(records[k], p)) + "\n";
  }
  write_text_atomic((out / "eval_replicates.csv").string(), detail_csv);

  std::string table = "design,N,M,sigma2,rho,parameter,mse,replicates\n";
  for (int s = 0; s < static_cast<int>(scenarios.size()); ++s) {
    const SimScenario& sc = scenarios[s];
    for (int p = 0; p < 7; ++p) {
      double acc = 0.0;
      for (int r = 0; r < replicates; ++r) acc += field(records[s * replicates + r], p);
      double mean_scaled = 1e4 * acc / replicates;
      table += detail::design_to_string(sc.design) + "," + std::to_string(sc.N) + "," +
               std::to_string(sc.M) + "," + format_double(sc.sigma2) + "," +
               format_double(sc.rho) + "," + param_names[p] + "," + format_double(mean_scaled) +
               "," + std::to_string(replicates) + "\n";
    }
  }
  write_text_atomic((out / "mse_table.csv").string(), table);
  log_info("evaluated " + std::to_string(jobs.size()) + " fits to " + out_dir);
  return 0;
}

inline int cmd_predict(const std::string& params_path, const std::string& cov_path,
                       const std::string& obs_path, const std::string& out_dir, int grid_size,
                       std::uint64_t seed) {
  ParamsFile pf = load_params_json(params_path);
  const double t_off = pf.metadata.value("time_offset", 0.0);
  const double t_scale = pf.metadata.value("time_scale", 1.0);
  if (grid_size <= 1) grid_size = pf.metadata.value("grid_size", 101);

  auto cov_lines = detail::load_covariates(cov_path, pf);
  FitResult fr;
  fr.params = pf.params;
  fr.basis = pf.basis;
  fr.penalty_order = pf.penalty_order;

  std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> obs;
  if (!obs_path.empty()) {
    auto lines = dfr::detail::read_lines(obs_path);
    if (lines.empty()) throw ValidationError(obs_path + ": empty file");
    auto header = dfr::detail::split_csv(lines[0]);
    if (header.size() != 3 || header[0] != "subject_id" || header[1] != "time" || header[2] != "y")
      throw ValidationError(obs_path + ":1: header must be 'subject_id,time,y'");
    for (size_t ln = 1; ln < lines.size(); ++ln) {
      if (dfr::detail::trim(lines[ln]).empty()) continue;
      auto f = dfr::detail::split_csv(lines[ln]);
      int line_no = static_cast<int>(ln) + 1;
      if (f.size() != 3)
        throw ValidationError(obs_path + ":" + std::to_string(line_no) + ": expected 3 fields");
      double traw = dfr::detail::parse_double(f[1], obs_path, line_no, "time");
      double t = (traw - t_off) / t_scale;
      if (t < 0.0 || t > 1.0)
        throw ValidationError(obs_path + ":" + std::to_string(line_no) +
                              ": time outside the fitted range");
      if (f[2] != "0" && f[2] != "1")
        throw ValidationError(obs_path + ":" + std::to_string(line_no) + ": y must be 0 or 1");
      obs[f[0]].first.push_back(t);
      obs[f[0]].second.push_back(f[2] == "1" ? 1 : 0);
    }
  }

  Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(grid_size, 0.0, 1.0);
  std::string out_csv = "subject_id,t,value\n";
  for (size_t i = 0; i < cov_lines.size(); ++i) {
    const auto& [id, x] = cov_lines[i];
    Eigen::VectorXd curve;
    auto it = obs.find(id);
    if (it == obs.end()) {
      curve = predict_mean(fr, x, grid);
    } else {
      const auto& [tv, yv] = it->second;
      Eigen::VectorXd t_obs = Eigen::Map<const Eigen::VectorXd>(tv.data(), tv.size());
      Eigen::VectorXi y_obs = Eigen::Map<const Eigen::VectorXi>(yv.data(), yv.size());
      RngStream rng = RngStream::derive(seed, {kStreamPredict, static_cast<std::uint64_t>(i)});
      curve = predict_conditional(fr, x, y_obs, t_obs, grid, rng);
    }
    for (int g = 0; g < grid_size; ++g)
      out_csv += id + "," + format_double(t_off + t_scale * grid[g]) + "," +
                 format_double(curve[g]) + "\n";
  }
  detail::ensure_out_dir(out_dir);
  write_text_atomic((std::filesystem::path(out_dir) / "predictions.csv").string(), out_csv);
  log_info("wrote predictions for " + std::to_string(cov_lines.size()) + " subjects");
  return 0;
}

inline int run_cli(int argc, char** argv) {
  CLI::App app{"dichotomized function-on-scalar regression"};
  app.require_subcommand(1);

  std::string obs, cov, config, out, scenario, sweep, params;
  int threads = 0;
  int grid = 0;
  std::uint64_t seed = 0;

  auto* fit_cmd = app.add_subcommand("fit", "fit the latent functional model to binary data");
  fit_cmd->add_option("--obs", obs, "observations CSV (subject_id,time,y)")->required();
  fit_cmd->add_option("--cov", cov, "covariates CSV (subject_id,x1,...)")->required();
  fit_cmd->add_option("--config", config, "fit configuration JSON")->required();
  fit_cmd->add_option("--out", out, "output directory")->required();
  fit_cmd->add_option("--threads", threads, "worker threads (overrides config)");

  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim_cmd->add_option("--scenario", scenario, "scenario JSON")->required();
  sim_cmd->add_option("--out", out, "output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "replicate simulation study and report MSE table");
  eval_cmd->add_option("--sweep", sweep, "sweep JSON (seed, replicates, fit, scenarios)")
      ->required();
  eval_cmd->add_option("--out", out, "output directory")->required();
  eval_cmd->add_option("--threads", threads, "worker threads");

  auto* pred_cmd = app.add_subcommand("predict", "predict latent mean curves for new subjects");
  pred_cmd->add_option("--params", params, "fitted params.json")->required();
  pred_cmd->add_option("--cov", cov, "covariates CSV")->required();
  pred_cmd->add_option("--obs", obs, "optional partial observations CSV");
  pred_cmd->add_option("--out", out, "output directory")->required();
  pred_cmd->add_option("--grid", grid, "number of grid points (default from params)");
  pred_cmd->add_option("--seed", seed, "seed for conditional prediction draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(obs, cov, config, out, threads);
    if (sim_cmd->parsed()) return cmd_simulate(scenario, out);
    if (eval_cmd->parsed()) return cmd_eval(sweep, out, threads);
    if (pred_cmd->parsed()) return cmd_predict(params, cov, obs, out, grid, seed);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace dfr::cli
