#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "dfr/basis.hpp"
#include "dfr/dataset.hpp"
#include "dfr/draws.hpp"
#include "dfr/errors.hpp"
#include "dfr/mstep.hpp"
#include "dfr/parallel.hpp"
#include "dfr/rng.hpp"
#include "dfr/sampling.hpp"

namespace dfr {

// Adaptive smoothing state for one EM iteration: per-subject roughness
// ceilings (infinite for the first two iterations) and the selected
// rejection rate.
struct SmoothingState {
  Eigen::VectorXd lambda;
  double delta = 0.0;
  int iteration = 1;  // 1-based EM iteration (the m+1 of the update rules)
};

struct EstepOptions {
  int burnin = 10;
  int thin = 2;
  int max_tries = 1000;
  int threads = 1;
};

// Type-7 empirical quantile (linear interpolation between order statistics).
inline double quantile_type7(Eigen::VectorXd values, double p) {
  const int n = static_cast<int>(values.size());
  if (n == 0) throw ValidationError("quantile_type7: empty sample");
  std::sort(values.data(), values.data() + n);
  if (n == 1) return values[0];
  double pos = p * (n - 1);
  pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
  int lo = static_cast<int>(std::floor(pos));
  if (lo == n - 1) return values[n - 1];
  double frac = pos - lo;
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

/// lambda_i <- min(lambda_prev_i, (1-delta)-quantile of {h_i[m,k]}).
inline Eigen::VectorXd update_lambda(const std::vector<Eigen::VectorXd>& h_prev,
                                     double delta, const Eigen::VectorXd& lambda_prev) {
  if (!(delta > 0.0 && delta < 1.0))
    throw ValidationError("update_lambda: delta must lie in (0,1)");
  if (static_cast<int>(h_prev.size()) != lambda_prev.size())
    throw ValidationError("update_lambda: size mismatch");
  Eigen::VectorXd out(lambda_prev.size());
  for (int i = 0; i < lambda_prev.size(); ++i) {
    if (h_prev[i].size() == 0)
      throw ValidationError("update_lambda: empty h set for subject " + std::to_string(i));
    out[i] = std::min(lambda_prev[i], quantile_type7(h_prev[i], 1.0 - delta));
  }
  return out;
}

inline LatentScoreConditional latent_score_conditional(const ModelParams& params,
                                                       const Eigen::MatrixXd& E_i,
                                                       const Eigen::VectorXd& x_i,
                                                       const SubjectGaussian& g,
                                                       const Eigen::VectorXd& w_i) {
  return latent_score_conditional(params.B, params.sigma_theta, E_i, x_i, g, w_i);
}

namespace detail {

inline SubjectGaussian subject_gaussian_for(const ModelParams& params,
                                            const Eigen::MatrixXd& E_i,
                                            const Subject& subj) {
  const int M = static_cast<int>(subj.times.size());
  Eigen::VectorXd k_diag(M);
  for (int j = 0; j < M; ++j) {
    double v = E_i.col(j).dot(params.sigma_theta.selfadjointView<Eigen::Lower>() * E_i.col(j));
    k_diag[j] = std::max(v, 1e-6);
  }
  Eigen::VectorXd mu = E_i.transpose() * params.B.transpose() * subj.x;
  Eigen::MatrixXd sigma = E_i.transpose() * params.sigma_theta * E_i;
  sigma += (params.sigma2 * k_diag).asDiagonal();
  return make_subject_gaussian(std::move(mu), std::move(sigma), std::move(k_diag));
}

}  // namespace detail

/// One Monte Carlo E-step: per subject, K Gibbs-retained draws of W_i | Y_i
/// interleaved with accept-reject draws of Z_i | W_i under the roughness
/// ceiling lambda_i. Randomness comes from streams derived as
/// (seed, {label, iteration, subject}), so subjects can run on any thread
/// with identical output.
inline MonteCarloDraws run_estep(const ModelParams& params, const ObservedDataset& data,
                                 const BasisSystem& basis, const PenaltyMatrix& P,
                                 const SmoothingState& state, int K, std::uint64_t seed,
                                 const EstepOptions& opt = {},
                                 const std::vector<Eigen::MatrixXd>* E_cache = nullptr) {
  if (K < 1) throw ValidationError("run_estep: K must be >= 1");
  const int N = data.n();
  if (state.lambda.size() != N) throw ValidationError("run_estep: lambda size mismatch");
  MonteCarloDraws draws;
  draws.K = K;
  draws.subjects.resize(N);
  std::vector<std::string> errors(N);
  parallel_for(N, opt.threads, [&](int i) {
    try {
      const Subject& subj = data.subjects[i];
      const int M = static_cast<int>(subj.times.size());
      Eigen::MatrixXd E_i = E_cache ? (*E_cache)[i] : basis.evaluate(subj.times);
      SubjectGaussian g = detail::subject_gaussian_for(params, E_i, subj);
      OrthantConstraint c{subj.y};
      GibbsWorkspace ws = make_gibbs_workspace(g);

      // Conditional pieces that do not depend on w: the gain matrix and the
      // score covariance Delta (factored once, reused for every draw).
      Eigen::LDLT<Eigen::MatrixXd> ldlt(g.sigma);
      Eigen::MatrixXd cross = params.sigma_theta * E_i;                    // J x M
      Eigen::MatrixXd gain = ldlt.solve(cross.transpose()).transpose();   // J x M
      Eigen::MatrixXd delta = params.sigma_theta - gain * cross.transpose();
      delta = 0.5 * (delta + delta.transpose()).eval();
      Eigen::MatrixXd factor = psd_factor(delta);
      Eigen::VectorXd prior_mean = params.B.transpose() * subj.x;

      RngStream rng_w = RngStream::derive(
          seed, {kStreamGibbs, static_cast<std::uint64_t>(state.iteration),
                 static_cast<std::uint64_t>(i)});
      RngStream rng_z = RngStream::derive(
          seed, {kStreamScores, static_cast<std::uint64_t>(state.iteration),
                 static_cast<std::uint64_t>(i)});

      Eigen::VectorXd w(M);
      for (int j = 0; j < M; ++j) w[j] = subj.y[j] == 1 ? 0.5 : -0.5;

      SubjectDraws& sd = draws.subjects[i];
      sd.w.resize(M, K);
      sd.z.resize(params.B.cols(), K);
      sd.h.resize(K);
      for (int k = 0; k < K; ++k) {
        gibbs_sweeps(ws, g, c, k == 0 ? opt.burnin : opt.thin, w, rng_w);
        sd.w.col(k) = w;
        Eigen::VectorXd eta = prior_mean + gain * (w - g.mu);
        ScoreDraw zd =
            accept_reject_z(eta, factor, P, state.lambda[i], opt.max_tries, rng_z);
        sd.z.col(k) = zd.z;
        sd.h[k] = zd.h;
        if (zd.forced) ++sd.forced_accepts;
      }
    } catch (const std::exception& e) {
      errors[i] = "subject " + data.subjects[i].id + " (index " + std::to_string(i) +
                  "): " + e.what();
    }
  });
  for (const auto& msg : errors)
    if (!msg.empty()) throw NumericalError("run_estep: " + msg);
  return draws;
}

/// The validation function AV(delta): refilter the current draws at the
/// hypothetical ceiling lambda_i(delta), estimate the kernel induced by the
/// REML covariance of the filtered scores, and average the weighted squared
/// residuals (w - E_i^T z).
inline double validation_value(const MonteCarloDraws& draws, double delta,
                               const ObservedDataset& data, const BasisSystem& basis,
                               const RemlProjector& U,
                               const std::vector<Eigen::MatrixXd>* E_cache = nullptr) {
  const int N = data.n();
  if (static_cast<int>(draws.subjects.size()) != N)
    throw ValidationError("validation_value: draws/data size mismatch");
  const int J = basis.size();
  std::vector<std::vector<int>> keep(N);
  Eigen::MatrixXd means(N, J);
  std::vector<Eigen::MatrixXd> second(N);
  for (int i = 0; i < N; ++i) {
    const auto& d = draws.subjects[i];
    double lam = quantile_type7(d.h, 1.0 - delta);
    for (int k = 0; k < draws.K; ++k)
      if (d.h[k] <= lam) keep[i].push_back(k);
    if (keep[i].empty()) {
      int arg = 0;
      d.h.minCoeff(&arg);
      keep[i].push_back(arg);
    }
    Eigen::VectorXd m = Eigen::VectorXd::Zero(J);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(J, J);
    for (int k : keep[i]) {
      m += d.z.col(k);
      S.noalias() += d.z.col(k) * d.z.col(k).transpose();
    }
    m /= static_cast<double>(keep[i].size());
    S /= static_cast<double>(keep[i].size());
    means.row(i) = m.transpose();
    second[i] = std::move(S);
  }

  // REML-form estimate from the filtered sets. Draw indices are not
  // matched across subjects after filtering, so the projector quadratic form
  // splits into a within-subject part weighted by diag(U U^T) and the
  // cross-subject part built from the filtered means.
  const int df = static_cast<int>(U.U.cols());
  Eigen::MatrixXd sigma_hat = Eigen::MatrixXd::Zero(J, J);
  for (int i = 0; i < N; ++i) {
    double aii = U.U.row(i).squaredNorm();
    sigma_hat +=
        aii * (second[i] - means.row(i).transpose() * means.row(i));
  }
  Eigen::MatrixXd G = U.U.transpose() * means;  // (N-q) x J
  sigma_hat.noalias() += G.transpose() * G;
  sigma_hat /= static_cast<double>(df);
  sigma_hat = 0.5 * (sigma_hat + sigma_hat.transpose()).eval();

  double acc = 0.0;
  long total_obs = 0;
  for (int i = 0; i < N; ++i) {
    const auto& d = draws.subjects[i];
    Eigen::MatrixXd E_i =
        E_cache ? (*E_cache)[i] : basis.evaluate(data.subjects[i].times);
    const int M = static_cast<int>(data.subjects[i].times.size());
    Eigen::VectorXd khat(M);
    for (int j = 0; j < M; ++j) {
      double v = E_i.col(j).dot(sigma_hat.selfadjointView<Eigen::Lower>() * E_i.col(j));
      khat[j] = std::max(v, 1e-6);
    }
    double subj = 0.0;
    for (int k : keep[i]) {
      Eigen::VectorXd r = d.w.col(k) - E_i.transpose() * d.z.col(k);
      subj += r.cwiseAbs2().dot(khat.cwiseInverse());
    }
    acc += subj / static_cast<double>(keep[i].size());
    total_obs += M;
  }
  return acc / static_cast<double>(total_obs);
}

/// argmin over the evaluated grid; ties go to the smaller delta.
inline double select_delta(const std::vector<std::pair<double, double>>& av_curve) {
  if (av_curve.empty()) throw ValidationError("select_delta: empty curve");
  auto sorted = av_curve;
  std::sort(sorted.begin(), sorted.end());
  double best_delta = sorted.front().first;
  double best_av = sorted.front().second;
  for (const auto& [d, av] : sorted) {
    if (av < best_av) {
      best_av = av;
      best_delta = d;
    }
  }
  return best_delta;
}

}  // namespace dfr
