// Acceptance gate: ten numbered end-to-end checks, each printing a single
// PASS/FAIL verdict with the measured values and the pinned tolerance window.
// Run as `acceptance <n>`; the exit status mirrors the verdict. Progress for
// the long simulation checks goes to stderr.
//
// The simulation checks (1, 2, 3, 9) run under one sweep seed that was fixed
// before any acceptance measurement; per-replicate seeds derive from it with
// the same stream scheme `dfr eval` uses, so a replicate shares covariates
// and scores across designs and is independent of other replicates.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dfr/cli.hpp"
#include "dfr/estep.hpp"
#include "dfr/fit.hpp"
#include "dfr/mstep.hpp"
#include "dfr/sampling.hpp"
#include "dfr/simulate.hpp"
#include "oracle_helpers.hpp"

using namespace dfr;

namespace {

constexpr std::uint64_t kSweepSeed = 20260815;

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int check, bool ok, const std::string& detail) {
  std::printf("[check %d] %s: %s\n", check, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Eigen::VectorXd standardized_curve(const FitResult& res, int row, const Eigen::VectorXd& grid) {
  return res.basis.evaluate(grid).transpose() * res.standardized.alpha.row(row).transpose();
}

// ---------------------------------------------------------------------------
// Checks 1 and 2: mean per-replicate ISE of the standardized coefficient
// functions on the (R, N=100, M=36, sigma2=0.2) scenario, 30 replicates,
// K=100, 30 EM iterations (within the <=50 budget). The gate aggregates as
// the mean over replicates of each replicate's integrated squared error; the
// ISE of the replicate-averaged curve is printed alongside because the target
// values sit at that bias-only scale.
bool check_tables(int check) {
  const bool first = (check == 1);
  SimScenario base;
  base.design = Design::R;
  base.N = 100;
  base.M = 36;
  base.sigma2 = 0.2;
  base.rho = first ? 0.1 : 0.4;
  base.coefficient_case = CoefCase::simple;

  FitConfig cfg;
  cfg.basis = BasisSystem::bspline(3, 19);
  cfg.K = 100;
  cfg.max_iter = 30;
  cfg.tol = 1e-3;
  cfg.threads = 1;

  const int reps = 30;
  double b0_acc = 0.0, b1_acc = 0.0;
  Eigen::VectorXd a0_sum, a1_sum, t0, t1;
  for (int rep = 0; rep < reps; ++rep) {
    auto t_start = std::chrono::steady_clock::now();
    SimScenario sc = base;
    sc.seed = cli::replicate_seed(kSweepSeed, rep);
    auto [data, truth] = generate_dataset(sc);
    FitConfig c = cfg;
    c.seed = sc.seed;
    FitResult res = fit(data, c);
    MseRecord rec = mse_eval(res, truth, truth.grid);
    b0_acc += rec.beta0;
    b1_acc += rec.beta1;
    if (rep == 0) {
      a0_sum = Eigen::VectorXd::Zero(truth.grid.size());
      a1_sum = Eigen::VectorXd::Zero(truth.grid.size());
      t0 = truth.alpha.row(0).transpose();
      t1 = truth.alpha.row(1).transpose();
    }
    a0_sum += standardized_curve(res, 0, truth.grid);
    a1_sum += standardized_curve(res, 1, truth.grid);
    std::fprintf(stderr, "  rep %2d: iters=%d mse(b0)=%.4g mse(b1)=%.4g sigma2=%.3f (%.0fs)\n",
                 rep, res.iterations, rec.beta0, rec.beta1, res.params.sigma2,
                 elapsed(t_start));
  }
  double b0 = b0_acc / reps, b1 = b1_acc / reps;
  double bias0 = detail::grid_ise(a0_sum / reps, t0);
  double bias1 = detail::grid_ise(a1_sum / reps, t1);

  const double target0 = first ? 1.139e-4 : 0.382e-4;
  const double target1 = 1.823e-4;
  bool ok0 = b0 >= target0 / 2 && b0 <= target0 * 2;
  bool ok1 = b1 >= target1 / 2 && b1 <= target1 * 2;
  bool ok = first ? (ok0 && ok1) : ok0;
  std::string detail =
      fmt("mean MSE(beta0)=%.4g vs window [%.4g, %.4g]", b0, target0 / 2, target0 * 2);
  if (first)
    detail += fmt("; mean MSE(beta1)=%.4g vs window [%.4g, %.4g]", b1, target1 / 2, target1 * 2);
  detail += fmt("; ISE of replicate-mean curve: beta0=%.4g beta1=%.4g (%d reps)", bias0, bias1,
                reps);
  report(check, ok, detail);
  return ok;
}

// ---------------------------------------------------------------------------
// Check 3: mean MSE(beta0) ordering across sampling designs at
// (N=50, M=12, sigma2=0.2, rho=0.1), 30 replicates with common random
// numbers. Gate: R <= RT <= IRS and RM within 25% of RT.
bool check_ordering() {
  const Design designs[4] = {Design::R, Design::RT, Design::RM, Design::IRS};
  const char* names[4] = {"R", "RT", "RM", "IRS"};
  FitConfig cfg;
  cfg.basis = BasisSystem::fourier(11);
  cfg.K = 100;
  cfg.max_iter = 15;
  cfg.tol = 1e-3;
  cfg.threads = 1;

  const int reps = 30;
  double mean[4] = {0.0, 0.0, 0.0, 0.0};
  for (int rep = 0; rep < reps; ++rep) {
    std::uint64_t s = cli::replicate_seed(kSweepSeed, rep);
    for (int d = 0; d < 4; ++d) {
      SimScenario sc;
      sc.design = designs[d];
      sc.N = 50;
      sc.M = 12;
      sc.sigma2 = 0.2;
      sc.rho = 0.1;
      sc.coefficient_case = CoefCase::complex;
      sc.seed = s;
      auto [data, truth] = generate_dataset(sc);
      FitConfig c = cfg;
      c.seed = s;
      FitResult res = fit(data, c);
      mean[d] += mse_eval(res, truth, truth.grid).beta0 / reps;
    }
    std::fprintf(stderr, "  rep %2d done\n", rep);
  }
  bool ok = mean[0] <= mean[1] && mean[1] <= mean[3] &&
            std::abs(mean[2] - mean[1]) <= 0.25 * mean[1];
  std::string detail = "mean MSE(beta0):";
  for (int d = 0; d < 4; ++d) detail += fmt(" %s=%.4g", names[d], mean[d]);
  detail += fmt("; need R <= RT <= IRS and |RM-RT| <= 0.25*RT (RM/RT=%.3f)", mean[2] / mean[1]);
  report(3, ok, detail);
  return ok;
}

// ---------------------------------------------------------------------------
// Check 4: standardize is invariant under the identifiability family. With
// the model supported on the first five fourier coordinates and f a positive
// trig polynomial of frequency <= 2, multiplication by f is exact inside the
// J=11 span, so (B D_f, D_f Sigma D_f^T) induces beta~ = f beta and
// K~ = f(s)f(t)K pointwise and the standardized output must agree to
// roundoff. D_f = int f(s) e(s) e(s)^T ds by a uniform rule that is exact for
// trig polynomials far below its node count.
bool check_invariance() {
  std::mt19937_64 gen(404);
  BasisSystem basis = BasisSystem::fourier(11);
  const int J = 11, S = 5;
  Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(101, 0.0, 1.0);
  Eigen::MatrixXd Eg = basis.evaluate(grid);

  const int n = 4096;
  Eigen::VectorXd nodes(n);
  for (int s = 0; s < n; ++s) nodes[s] = static_cast<double>(s) / n;
  Eigen::MatrixXd En = basis.evaluate(nodes);  // J x n

  std::uniform_real_distribution<double> uc(0.9, 1.3), ua(-0.12, 0.12);
  std::normal_distribution<double> nd;
  double worst_alpha = 0.0, worst_rho = 0.0, min_f = 1e9;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, J);
    for (int l = 0; l < 2; ++l)
      for (int j = 0; j < S; ++j) B(l, j) = nd(gen);
    Eigen::MatrixXd Sig = Eigen::MatrixXd::Zero(J, J);
    Sig.topLeftCorner(S, S) = oracle::random_psd(S, 0.3, 1.2, gen);

    Eigen::VectorXd fc = Eigen::VectorXd::Zero(J);
    fc[0] = uc(gen);
    for (int j = 1; j < S; ++j) fc[j] = ua(gen);  // |f - fc0| <= 4*0.12*sqrt2 < fc0
    Eigen::VectorXd fvals = En.transpose() * fc;
    min_f = std::min(min_f, fvals.minCoeff());
    Eigen::MatrixXd Df = En * (fvals / n).asDiagonal() * En.transpose();
    Df = 0.5 * (Df + Df.transpose()).eval();

    StandardizedEstimate a = standardize(B, Sig, basis);
    StandardizedEstimate b = standardize(B * Df, Df * Sig * Df.transpose(), basis);
    for (int l = 0; l < 2; ++l) {
      Eigen::VectorXd da = Eg.transpose() * (a.alpha.row(l) - b.alpha.row(l)).transpose();
      worst_alpha = std::max(worst_alpha, da.cwiseAbs().maxCoeff());
    }
    for (int j = 0; j < J; ++j)
      worst_rho = std::max(worst_rho, std::abs(a.eigenpairs[j].rho - b.eigenpairs[j].rho));
  }
  bool ok = worst_alpha <= 1e-6 && worst_rho <= 1e-8 && min_f > 0.0;
  report(4, ok,
         fmt("20 draws: sup|alpha - alpha_f|=%.3g (tol 1e-6), max eigenvalue gap=%.3g "
             "(tol 1e-8), min f=%.3f",
             worst_alpha, worst_rho, min_f));
  return ok;
}

// ---------------------------------------------------------------------------
// Check 5: the standardized kernel has unit diagonal and leading eigenvalue
// at most 1 up to discretization. Draws come from a smooth covariance law
// (frequency-decayed coefficients plus a ridge) whose flattened kernel the
// basis can represent; rougher laws are outside the estimator's range.
Eigen::MatrixXd decayed_psd(int J, double decay, double ridge, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd A(J, J);
  for (int i = 0; i < J; ++i)
    for (int j = 0; j < J; ++j) A(i, j) = nd(gen);
  Eigen::VectorXd d(J);
  for (int j = 0; j < J; ++j) d[j] = std::pow(decay, (j + 1) / 2);
  Eigen::MatrixXd S = d.asDiagonal() * (A * A.transpose() / J) * d.asDiagonal();
  S += ridge * Eigen::MatrixXd::Identity(J, J);
  return 0.5 * (S + S.transpose());
}

bool check_norm_bound() {
  std::mt19937_64 gen(2024);
  BasisSystem basis = BasisSystem::fourier(11);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(1, 11);
  double max_rho = 0.0, max_dev = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::MatrixXd S = decayed_psd(11, 0.25, 0.4, gen);
    StandardizedEstimate est = standardize(B, S, basis);
    max_rho = std::max(max_rho, est.eigenpairs[0].rho);
    max_dev = std::max(max_dev, (est.kernel_diag.array() - 1.0).abs().maxCoeff());
  }
  bool ok = max_rho <= 1.05 && max_dev <= 0.02;
  report(5, ok,
         fmt("100 draws: max rho_1=%.4f (tol 1.05), max |K*(t,t)-1|=%.4f (tol 0.02)",
             max_rho, max_dev));
  return ok;
}

// ---------------------------------------------------------------------------
// Check 6: the REML covariance update is unbiased when the scores are
// observed directly. 500 replicates of Z_i = B^T x_i + theta_i with known
// Sigma; the projector removes the fixed effect exactly, so the estimate
// must match Sigma entrywise within 3 Monte Carlo standard errors.
bool check_reml_unbiased() {
  std::mt19937_64 gen(2026);
  std::normal_distribution<double> nd;
  const int N = 40, J = 4, reps = 500;
  Eigen::MatrixXd X(N, 2);
  for (int i = 0; i < N; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = nd(gen);
  }
  Eigen::MatrixXd B(2, J);
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < J; ++j) B(l, j) = nd(gen);
  Eigen::MatrixXd Sigma = oracle::random_psd(J, 0.4, 1.5, gen);
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  RemlProjector U = reml_projector(X);

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(J, J);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(J, J);
  for (int rep = 0; rep < reps; ++rep) {
    MonteCarloDraws draws;
    draws.K = 1;
    draws.subjects.resize(N);
    for (int i = 0; i < N; ++i) {
      Eigen::VectorXd g(J);
      for (int j = 0; j < J; ++j) g[j] = nd(gen);
      draws.subjects[i].z = B.transpose() * X.row(i).transpose() + llt.matrixL() * g;
      draws.subjects[i].w = Eigen::MatrixXd::Zero(1, 1);
      draws.subjects[i].h = Eigen::VectorXd::Zero(1);
    }
    Eigen::MatrixXd est = update_sigma_theta(draws, U);
    Eigen::MatrixXd delta = est - mean;
    mean += delta / (rep + 1);
    m2 += delta.cwiseProduct(est - mean);
  }
  Eigen::MatrixXd se = (m2 / (reps - 1) / reps).cwiseSqrt();
  double worst = 0.0;
  for (int a = 0; a < J; ++a)
    for (int b = 0; b < J; ++b)
      worst = std::max(worst, std::abs(mean(a, b) - Sigma(a, b)) / se(a, b));
  bool ok = worst <= 3.0;
  report(6, ok, fmt("500 replicates, %dx%d entries: max |mean - Sigma| = %.2f SE (tol 3 SE)",
                    J, J, worst));
  return ok;
}

// ---------------------------------------------------------------------------
// Check 7: gibbs_w targets the orthant-truncated Gaussian. For M=2 the
// truncated moments are computable by dense quadrature; first and second
// sample moments over 1e5 retained sweeps must agree within 3 standard
// errors (batch means, because the chain is autocorrelated).
bool check_gibbs_oracle() {
  struct Config {
    Eigen::Vector2d mu;
    Eigen::Matrix2d S;
    int y0, y1;
  };
  std::vector<Config> configs(3);
  configs[0].mu << 0.3, -0.4;
  configs[0].S << 1.0, 0.5, 0.5, 1.0;
  configs[0].y0 = 1;
  configs[0].y1 = 0;
  configs[1].mu << -1.0, 0.8;
  configs[1].S << 0.8, -0.3, -0.3, 1.2;
  configs[1].y0 = 0;
  configs[1].y1 = 1;
  configs[2].mu << 1.5, 1.2;
  configs[2].S << 1.0, 0.7, 0.7, 0.9;
  configs[2].y0 = 1;
  configs[2].y1 = 1;

  const int draws = 100000;
  double worst = 0.0;
  for (size_t c = 0; c < configs.size(); ++c) {
    const Config& cf = configs[c];
    oracle::OrthantMoments om = oracle::orthant_moments_2d(cf.mu, cf.S, cf.y0, cf.y1);
    SubjectGaussian g = make_subject_gaussian(cf.mu, cf.S, Eigen::VectorXd::Ones(2));
    OrthantConstraint con{(Eigen::VectorXi(2) << cf.y0, cf.y1).finished()};
    RngStream rng = RngStream::derive(kSweepSeed, {700, static_cast<std::uint64_t>(c)});
    Eigen::VectorXd w(2);
    w << (cf.y0 ? 0.5 : -0.5), (cf.y1 ? 0.5 : -0.5);
    w = gibbs_w(g, con, 50, w, rng);
    std::vector<std::vector<double>> series(5, std::vector<double>(draws));
    for (int k = 0; k < draws; ++k) {
      w = gibbs_w(g, con, 1, w, rng);
      series[0][k] = w[0];
      series[1][k] = w[1];
      series[2][k] = w[0] * w[0];
      series[3][k] = w[0] * w[1];
      series[4][k] = w[1] * w[1];
    }
    double target[5] = {om.mean[0], om.mean[1], om.second(0, 0), om.second(0, 1),
                        om.second(1, 1)};
    for (int s = 0; s < 5; ++s) {
      double mc = 0.0;
      for (double v : series[s]) mc += v;
      mc /= draws;
      double se = oracle::batch_means_se(series[s]);
      worst = std::max(worst, std::abs(mc - target[s]) / se);
    }
  }
  bool ok = worst <= 3.0;
  report(7, ok,
         fmt("3 configs x 5 moments on 1e5 draws: max deviation = %.2f SE (tol 3 SE)", worst));
  return ok;
}

// ---------------------------------------------------------------------------
// Check 8: the adaptive-smoothing contract. (a) With the ceiling set at the
// (1-delta)-quantile of a large h sample from a frozen conditional, fresh
// accept_reject_z proposals must be rejected at rate delta = 0.1 within the
// two-sided 99% binomial interval for n=2000. (b) Over a 20-iteration fit
// the per-subject ceiling trace is nonincreasing from iteration 3 on.
bool check_lambda_contract() {
  // (a) frozen-state rejection rate
  SimScenario sc;
  sc.design = Design::R;
  sc.N = 50;
  sc.M = 12;
  sc.sigma2 = 0.2;
  sc.rho = 0.1;
  sc.seed = cli::replicate_seed(kSweepSeed, 8);
  auto [data, truth] = generate_dataset(sc);
  BasisSystem basis = BasisSystem::fourier(11);
  PenaltyMatrix P = basis.penalty_matrix(2);
  ModelParams params = initialize_params(data, basis);
  const Subject& subj = data.subjects[0];
  Eigen::MatrixXd E0 = basis.evaluate(subj.times);
  SubjectGaussian g = detail::subject_gaussian_for(params, E0, subj);
  OrthantConstraint con{subj.y};
  GibbsWorkspace ws = make_gibbs_workspace(g);
  RngStream rng_w = RngStream::derive(kSweepSeed, {800});
  Eigen::VectorXd w(subj.times.size());
  for (int j = 0; j < w.size(); ++j) w[j] = subj.y[j] == 1 ? 0.5 : -0.5;
  gibbs_sweeps(ws, g, con, 50, w, rng_w);
  LatentScoreConditional cond = latent_score_conditional(params, E0, subj.x, g, w);
  Eigen::MatrixXd factor = psd_factor(cond.delta);

  RngStream rng_z = RngStream::derive(kSweepSeed, {801});
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd h(20000);
  for (int k = 0; k < h.size(); ++k)
    h[k] = accept_reject_z(cond.eta, factor, P, inf, 1, rng_z).h;
  const double delta = 0.1;
  double lambda = quantile_type7(h, 1.0 - delta);
  const int n = 2000;
  int rejected = 0;
  for (int k = 0; k < n; ++k)
    if (accept_reject_z(cond.eta, factor, P, lambda, 1, rng_z).forced) ++rejected;
  double rate = static_cast<double>(rejected) / n;
  // 0.1 +- 2.5758 * sqrt(0.1*0.9/2000)
  const double lo = 0.0827213, hi = 0.1172787;
  bool ok_rate = rate >= lo && rate <= hi;

  // (b) ceiling trace monotone from iteration 3
  SimScenario sc2 = sc;
  sc2.seed = cli::replicate_seed(kSweepSeed, 88);
  auto [data2, truth2] = generate_dataset(sc2);
  FitConfig cfg;
  cfg.basis = basis;
  cfg.K = 100;
  cfg.max_iter = 20;
  cfg.tol = 1e-9;
  cfg.seed = sc2.seed;
  FitResult res = fit(data2, cfg);
  bool monotone = res.iterations == 20;
  for (size_t m = 2; m < res.lambda_trace.size() && monotone; ++m)
    for (int i = 0; i < res.lambda_trace[m].size(); ++i)
      if (res.lambda_trace[m][i] > res.lambda_trace[m - 1][i]) {
        monotone = false;
        break;
      }
  bool ok = ok_rate && monotone;
  report(8, ok,
         fmt("rejection rate %.4f vs [%.4f, %.4f] at delta=0.1 (n=%d); lambda trace "
             "nonincreasing from iteration 3 over 20 iterations: %s",
             rate, lo, hi, n, monotone ? "yes" : "no"));
  return ok;
}

// ---------------------------------------------------------------------------
// Check 9: leading eigenfunction recovery on a single (R, N=100, M=36,
// sigma2=0.2, rho=0.1) fit: sign-aligned L2 error of phi_1 below 0.05.
bool check_eigenfunction() {
  SimScenario sc;
  sc.design = Design::R;
  sc.N = 100;
  sc.M = 36;
  sc.sigma2 = 0.2;
  sc.rho = 0.1;
  sc.coefficient_case = CoefCase::complex;
  sc.seed = cli::replicate_seed(kSweepSeed, 0);
  auto [data, truth] = generate_dataset(sc);
  FitConfig cfg;
  cfg.basis = BasisSystem::fourier(11);
  cfg.K = 300;
  cfg.max_iter = 30;
  cfg.tol = 1e-3;
  cfg.seed = sc.seed;
  auto t_start = std::chrono::steady_clock::now();
  FitResult res = fit(data, cfg);
  MseRecord rec = mse_eval(res, truth, truth.grid);
  double l2 = std::sqrt(rec.psi1);
  bool ok = l2 < 0.05;
  report(9, ok,
         fmt("sign-aligned L2 error of phi_1 = %.4f (tol 0.05); ISE=%.4g, %d iterations, "
             "sigma2=%.3f (%.0fs)",
             l2, rec.psi1, res.iterations, res.params.sigma2, elapsed(t_start)));
  return ok;
}

// ---------------------------------------------------------------------------
// Check 10: `dfr eval` is byte-deterministic in the seed and independent of
// the worker count.
bool check_determinism() {
  namespace fs = std::filesystem;
  fs::path base = fs::temp_directory_path() / "dfr_acceptance_10";
  std::error_code ec;
  fs::remove_all(base, ec);
  fs::create_directories(base);

  json sweep;
  sweep["seed"] = 777;
  sweep["replicates"] = 2;
  sweep["fit"] = {{"basis", {{"kind", "fourier"}, {"J", 7}}},
                  {"K", 20},
                  {"max_iter", 4},
                  {"tol", 1e-3}};
  sweep["scenarios"] = json::array();
  sweep["scenarios"].push_back(
      {{"design", "R"}, {"N", 20}, {"M", 8}, {"sigma2", 0.2}, {"rho", 0.1}});
  std::ofstream((base / "sweep.json")) << sweep.dump(2) << "\n";

  auto run = [&](const std::string& out, const char* threads) {
    std::vector<std::string> args = {"dfr", "eval",  "--sweep",  (base / "sweep.json").string(),
                                     "--out", out,   "--threads", threads};
    std::vector<char*> argv;
    argv.reserve(args.size());
    for (auto& a : args) argv.push_back(a.data());
    return cli::run_cli(static_cast<int>(argv.size()), argv.data());
  };
  int rc1 = run((base / "a").string(), "1");
  int rc2 = run((base / "b").string(), "3");

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  std::string table_a = slurp(base / "a" / "mse_table.csv");
  std::string table_b = slurp(base / "b" / "mse_table.csv");
  std::string reps_a = slurp(base / "a" / "eval_replicates.csv");
  std::string reps_b = slurp(base / "b" / "eval_replicates.csv");
  bool ok = rc1 == 0 && rc2 == 0 && !table_a.empty() && table_a == table_b &&
            reps_a == reps_b;
  report(10, ok,
         fmt("exit codes %d/%d; mse_table.csv %zu bytes, identical across --threads 1 vs 3: "
             "%s; replicate detail identical: %s",
             rc1, rc2, table_a.size(), table_a == table_b ? "yes" : "no",
             reps_a == reps_b ? "yes" : "no"));
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <check 1-10>\n", argv[0]);
    return 2;
  }
  int check = std::atoi(argv[1]);
  bool ok = false;
  try {
    switch (check) {
      case 1:
      case 2: ok = check_tables(check); break;
      case 3: ok = check_ordering(); break;
      case 4: ok = check_invariance(); break;
      case 5: ok = check_norm_bound(); break;
      case 6: ok = check_reml_unbiased(); break;
      case 7: ok = check_gibbs_oracle(); break;
      case 8: ok = check_lambda_contract(); break;
      case 9: ok = check_eigenfunction(); break;
      case 10: ok = check_determinism(); break;
      default:
        std::fprintf(stderr, "usage: %s <check 1-10>\n", argv[0]);
        return 2;
    }
  } catch (const std::exception& e) {
    report(check, false, std::string("exception: ") + e.what());
    return 1;
  }
  return ok ? 0 : 1;
}
