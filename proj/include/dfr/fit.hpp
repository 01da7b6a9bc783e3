#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <utility>
#include <vector>

#include "dfr/basis.hpp"
#include "dfr/dataset.hpp"
#include "dfr/draws.hpp"
#include "dfr/errors.hpp"
#include "dfr/estep.hpp"
#include "dfr/mstep.hpp"
#include "dfr/rng.hpp"
#include "dfr/sampling.hpp"

namespace dfr {

struct FitConfig {
  BasisSystem basis = BasisSystem::fourier(11);
  int penalty_order = 2;
  int K = 100;
  int max_iter = 200;
  double tol = 1e-3;
  int window = 5;
  std::vector<double> delta_grid = {0.01, 0.02, 0.05, 0.10, 0.20};
  int gibbs_burnin = 10;
  int gibbs_thin = 2;
  int max_tries = 1000;
  std::uint64_t seed = 0;
  int grid_size = 101;
  int threads = 1;

  void validate() const {
    if (K < 1 || max_iter < 1 || window < 1 || grid_size < 2 || gibbs_burnin < 0 ||
        gibbs_thin < 0 || max_tries < 1 || penalty_order < 0)
      throw ValidationError("FitConfig: all counts must be positive");
    if (!(tol > 0.0 && tol < 1.0)) throw ValidationError("FitConfig: tol must lie in (0,1)");
    if (delta_grid.empty()) throw ValidationError("FitConfig: delta grid empty");
    for (double d : delta_grid)
      if (!(d > 0.0 && d < 1.0))
        throw ValidationError("FitConfig: delta grid values must lie in (0,1)");
  }
};

struct FitResult {
  ModelParams params;  // rescaled convention
  StandardizedEstimate standardized;
  BasisSystem basis = BasisSystem::fourier(1);
  int penalty_order = 2;
  std::vector<double> sigma2_trace;
  std::vector<double> xi_trace;
  std::vector<double> delta_trace;
  std::vector<Eigen::VectorXd> lambda_trace;  // per iteration, per subject
  long forced_accepts = 0;
  bool converged = false;
  int iterations = 0;
  Eigen::MatrixXd last_z_mean;  // N x J, draw means of the final iteration
  Eigen::VectorXd last_h_mean;  // N
};

/// xi = (1/N) sum_i avg_k z^T P z.
inline double average_smoothness(const MonteCarloDraws& draws, const PenaltyMatrix& P) {
  if (draws.subjects.empty() || draws.K == 0)
    throw ValidationError("average_smoothness: empty draws");
  double acc = 0.0;
  for (const auto& s : draws.subjects) {
    double subj = 0.0;
    for (int k = 0; k < draws.K; ++k)
      subj += s.z.col(k).dot(P.entries * s.z.col(k));
    acc += subj / draws.K;
  }
  return acc / static_cast<double>(draws.subjects.size());
}

/// Probit-free start: per-subject ridge smooth of the working response
/// 2y-1 onto the basis, regressed onto X; Sigma_theta = I scaled to a unit
/// kernel level; sigma2 = 1.
inline ModelParams initialize_params(const ObservedDataset& data, const BasisSystem& basis) {
  data.validate();
  const int N = data.n();
  const int J = basis.size();
  Eigen::MatrixXd C(N, J);
  for (int i = 0; i < N; ++i) {
    const Subject& s = data.subjects[i];
    Eigen::MatrixXd E = basis.evaluate(s.times);  // J x M
    Eigen::VectorXd r = (2 * s.y.cast<double>().array() - 1.0).matrix();
    Eigen::MatrixXd A = E * E.transpose() + 1e-2 * Eigen::MatrixXd::Identity(J, J);
    C.row(i) = A.ldlt().solve(E * r).transpose();
  }
  Eigen::MatrixXd X = data.design();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols())
    throw ValidationError("initialize_params: design matrix rank-deficient");
  ModelParams p;
  p.B = (X.transpose() * X).ldlt().solve(X.transpose() * C);
  p.sigma_theta = Eigen::MatrixXd::Identity(J, J) / basis.gram().trace();
  p.sigma2 = 1.0;
  return p;
}

/// The AMCEM loop (Algorithm-1 semantics): lambda = infinity and delta at
/// the grid minimum for the first two iterations, afterwards delta minimizes
/// AV on the previous iteration's draws and lambda takes the clamped
/// (1-delta)-quantile of the previous h values. Each iteration runs the
/// Monte Carlo E-step, the closed-form M-step, and the rescaling that keeps
/// the kernel diagonal at 1.
inline FitResult fit(const ObservedDataset& data, const FitConfig& config) {
  config.validate();
  data.validate();
  const int N = data.n();
  const BasisSystem& basis = config.basis;
  const PenaltyMatrix P = basis.penalty_matrix(config.penalty_order);
  Eigen::MatrixXd X = data.design();
  RemlProjector U = reml_projector(X);
  std::vector<Eigen::MatrixXd> E_cache;
  E_cache.reserve(N);
  std::vector<Eigen::VectorXd> unit_kdiag;
  unit_kdiag.reserve(N);
  for (const auto& s : data.subjects) {
    E_cache.push_back(basis.evaluate(s.times));
    unit_kdiag.push_back(Eigen::VectorXd::Ones(s.times.size()));
  }

  ModelParams params = initialize_params(data, basis);
  double delta_min = *std::min_element(config.delta_grid.begin(), config.delta_grid.end());

  FitResult result;
  result.basis = basis;
  result.penalty_order = config.penalty_order;

  EstepOptions opt;
  opt.burnin = config.gibbs_burnin;
  opt.thin = config.gibbs_thin;
  opt.max_tries = config.max_tries;
  opt.threads = config.threads;

  SmoothingState state;
  state.lambda =
      Eigen::VectorXd::Constant(N, std::numeric_limits<double>::infinity());
  state.delta = delta_min;

  MonteCarloDraws prev_draws;
  std::deque<double> rel_b, rel_s, rel_v;
  double prev_bn = 0.0, prev_sn = 0.0, prev_v = 0.0;

  for (int iter = 1; iter <= config.max_iter; ++iter) {
    state.iteration = iter;
    if (iter > 2) {
      std::vector<std::pair<double, double>> av;
      av.reserve(config.delta_grid.size());
      for (double d : config.delta_grid)
        av.emplace_back(d, validation_value(prev_draws, d, data, basis, U, &E_cache));
      state.delta = select_delta(av);
      std::vector<Eigen::VectorXd> h_prev;
      h_prev.reserve(N);
      for (const auto& s : prev_draws.subjects) h_prev.push_back(s.h);
      state.lambda = update_lambda(h_prev, state.delta, state.lambda);
    }

    MonteCarloDraws draws = run_estep(params, data, basis, P, state, config.K,
                                      config.seed, opt, &E_cache);

    Eigen::MatrixXd sigma_new = update_sigma_theta(draws, U);
    Eigen::MatrixXd B_new = update_B(draws, X);
    auto [B_r, sigma_r] = rescale_params(B_new, sigma_new, basis);
    params.B = std::move(B_r);
    params.sigma_theta = std::move(sigma_r);
    params.sigma2 = update_sigma2(draws, E_cache, unit_kdiag);

    result.sigma2_trace.push_back(params.sigma2);
    result.xi_trace.push_back(average_smoothness(draws, P));
    result.delta_trace.push_back(state.delta);
    result.lambda_trace.push_back(state.lambda);
    result.forced_accepts += draws.forced_total();
    result.iterations = iter;

    double bn = params.B.norm();
    double sn = params.sigma_theta.norm();
    if (iter > 1) {
      rel_b.push_back(std::abs(bn - prev_bn) / std::max(std::abs(prev_bn), 1e-12));
      rel_s.push_back(std::abs(sn - prev_sn) / std::max(std::abs(prev_sn), 1e-12));
      rel_v.push_back(std::abs(params.sigma2 - prev_v) / std::max(std::abs(prev_v), 1e-12));
      if (static_cast<int>(rel_b.size()) > config.window) {
        rel_b.pop_front();
        rel_s.pop_front();
        rel_v.pop_front();
      }
    }
    prev_bn = bn;
    prev_sn = sn;
    prev_v = params.sigma2;

    prev_draws = std::move(draws);

    if (static_cast<int>(rel_b.size()) == config.window) {
      auto mean = [](const std::deque<double>& d) {
        double a = 0.0;
        for (double v : d) a += v;
        return a / d.size();
      };
      if (mean(rel_b) < config.tol && mean(rel_s) < config.tol && mean(rel_v) < config.tol) {
        result.converged = true;
        break;
      }
    }
  }

  result.params = params;
  result.standardized =
      standardize(params.B, params.sigma_theta, basis, config.grid_size);
  const int J = basis.size();
  result.last_z_mean.resize(N, J);
  result.last_h_mean.resize(N);
  for (int i = 0; i < N; ++i) {
    result.last_z_mean.row(i) = prev_draws.subjects[i].z.rowwise().mean().transpose();
    result.last_h_mean[i] = prev_draws.subjects[i].h.mean();
  }
  return result;
}

/// Scenario-1 prediction: e(t)^T Bhat^T x on the grid.
inline Eigen::VectorXd predict_mean(const FitResult& fit, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& grid) {
  if (x.size() != fit.params.B.rows())
    throw ValidationError("predict_mean: covariate length mismatch");
  return fit.basis.evaluate(grid).transpose() * fit.params.B.transpose() * x;
}

/// Scenario-2 prediction: the Gibbs estimate of E[W | x, y] at the observed
/// times feeds the kriging-style correction
/// e^T [Bhat^T x + Sigma_theta E (E^T Sigma_theta E + sigma2 I)^-1 (Wbar - mu)].
inline Eigen::VectorXd predict_conditional(const FitResult& fit, const Eigen::VectorXd& x,
                                           const Eigen::VectorXi& y_obs,
                                           const Eigen::VectorXd& t_obs,
                                           const Eigen::VectorXd& grid, RngStream& rng,
                                           int retained = 2000, int burnin = 100) {
  if (y_obs.size() != t_obs.size())
    throw ValidationError("predict_conditional: y/t length mismatch");
  if (y_obs.size() == 0) return predict_mean(fit, x, grid);
  const int M = static_cast<int>(t_obs.size());
  Eigen::MatrixXd E = fit.basis.evaluate(t_obs);
  Eigen::VectorXd kd = kernel_diag(fit.params.sigma_theta, fit.basis, t_obs);
  Eigen::VectorXd mu = E.transpose() * fit.params.B.transpose() * x;
  Eigen::MatrixXd sigma = E.transpose() * fit.params.sigma_theta * E;
  sigma += (fit.params.sigma2 * kd).asDiagonal();
  SubjectGaussian g = make_subject_gaussian(mu, std::move(sigma), std::move(kd));
  OrthantConstraint c{y_obs};
  GibbsWorkspace ws = make_gibbs_workspace(g);
  Eigen::VectorXd w(M);
  for (int j = 0; j < M; ++j) w[j] = y_obs[j] == 1 ? 0.5 : -0.5;
  gibbs_sweeps(ws, g, c, burnin, w, rng);
  Eigen::VectorXd wbar = Eigen::VectorXd::Zero(M);
  for (int k = 0; k < retained; ++k) {
    gibbs_sweeps(ws, g, c, 1, w, rng);
    wbar += w;
  }
  wbar /= static_cast<double>(retained);
  Eigen::MatrixXd A = E.transpose() * fit.params.sigma_theta * E +
                      fit.params.sigma2 * Eigen::MatrixXd::Identity(M, M);
  Eigen::VectorXd coef = fit.params.B.transpose() * x +
                         fit.params.sigma_theta * E * A.ldlt().solve(wbar - mu);
  return fit.basis.evaluate(grid).transpose() * coef;
}

}  // namespace dfr
