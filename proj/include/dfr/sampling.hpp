#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "dfr/basis.hpp"
#include "dfr/errors.hpp"
#include "dfr/normal.hpp"
#include "dfr/rng.hpp"

namespace dfr {

// Per-subject Gaussian for the latent observations W_i: mu = E_i^T B^T x_i,
// sigma = E_i^T Sigma_theta E_i + sigma2 * K_i (jitter already applied),
// k_diag = diag(K_i).
struct SubjectGaussian {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::VectorXd k_diag;
};

// Builds the subject Gaussian and applies the diagonal jitter
// 1e-8 * trace(Sigma)/M before any solve touches the matrix.
inline SubjectGaussian make_subject_gaussian(Eigen::VectorXd mu, Eigen::MatrixXd sigma,
                                             Eigen::VectorXd k_diag) {
  const int M = static_cast<int>(mu.size());
  if (sigma.rows() != M || sigma.cols() != M || k_diag.size() != M)
    throw ValidationError("make_subject_gaussian: dimension mismatch");
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  sigma.diagonal().array() += 1e-8 * sigma.trace() / M;
  return SubjectGaussian{std::move(mu), std::move(sigma), std::move(k_diag)};
}

// The observed binary pattern: region C_ij = (-inf, 0] when y_ij = 0,
// (0, inf) when y_ij = 1.
struct OrthantConstraint {
  Eigen::VectorXi signs;
};

struct LatentScoreConditional {
  Eigen::VectorXd eta;
  Eigen::MatrixXd delta;
};

enum class Side { nonpositive, positive };

/// Inverse-transform draw from N(tau, var) restricted to a half-line:
/// Phi^-1(p*u) for the nonpositive side, Phi^-1(p + (1-p)*u) for the
/// positive side, with p = Phi(0; tau, var). Both are evaluated through the
/// tail mass of the allowed half-line so the result stays inside it even for
/// |tau|/sd large; below tail mass 1e-300 the standard exponential-tail
/// inverse takes over (boundary plus a small quantile-driven offset).
inline double truncated_normal_draw(double tau, double var, Side side, double u) {
  if (!(var > 0.0)) throw NumericalError("truncated_normal_draw: var must be positive");
  if (!(u > 0.0 && u < 1.0))
    throw ValidationError("truncated_normal_draw: u must lie in (0,1)");
  const double sd = std::sqrt(var);
  const bool pos = (side == Side::positive);
  // Reflect so we always draw S >= a from a standard normal upper tail.
  const double a = pos ? -tau / sd : tau / sd;
  const double v = pos ? 1.0 - u : u;
  const double tail = norm_upper(a);
  const double q = tail * v;  // upper-tail mass composed with the uniform
  double s;
  if (q >= 1e-300) {
    s = -norm_quantile(q);
  } else {
    s = a - std::log(v) / std::max(a, 1.0);
  }
  double res = pos ? tau + sd * s : tau - sd * s;
  // Rounding can land exactly on the boundary; push it to the correct side.
  if (pos) {
    if (!(res > 0.0)) res = std::numeric_limits<double>::min();
  } else {
    if (res > 0.0) res = 0.0;
  }
  return res;
}

/// Conditional law of coordinate j given the others (Schur complement):
/// tau = mu_j + S[j,-j] S[-j,-j]^-1 (w_-j - mu_-j),
/// var = S(jj) - S[j,-j] S[-j,-j]^-1 S[-j,j].
inline std::pair<double, double> conditional_params(const SubjectGaussian& g, int j,
                                                    const Eigen::VectorXd& w_minus_j) {
  const int M = static_cast<int>(g.mu.size());
  if (j < 0 || j >= M) throw ValidationError("conditional_params: index out of range");
  if (w_minus_j.size() != M - 1)
    throw ValidationError("conditional_params: w_minus_j has wrong length");
  if (M == 1) return {g.mu[0], g.sigma(0, 0)};
  Eigen::MatrixXd minor(M - 1, M - 1);
  Eigen::VectorXd cross(M - 1), resid(M - 1);
  int r = 0;
  for (int a = 0; a < M; ++a) {
    if (a == j) continue;
    int c = 0;
    for (int b = 0; b < M; ++b) {
      if (b == j) continue;
      minor(r, c++) = g.sigma(a, b);
    }
    cross[r] = g.sigma(j, a);
    resid[r] = w_minus_j[r] - g.mu[a];
    ++r;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(minor);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("conditional_params: singular minor after jitter");
  Eigen::VectorXd sol = ldlt.solve(cross);
  double tau = g.mu[j] + sol.dot(resid);
  double var = g.sigma(j, j) - sol.dot(cross);
  if (!(var > 0.0) || !std::isfinite(tau))
    throw NumericalError("conditional_params: nonpositive conditional variance");
  return {tau, var};
}

// Precomputed pieces for repeated Gibbs sweeps over one subject. The
// precision form of the conditional moments is algebraically the Schur
// complement of conditional_params, at O(M) per coordinate instead of a
// minor solve.
struct GibbsWorkspace {
  Eigen::MatrixXd precision;
  Eigen::VectorXd cond_var;  // 1 / Lambda_jj
  Eigen::VectorXd cond_sd;
};

inline GibbsWorkspace make_gibbs_workspace(const SubjectGaussian& g) {
  const int M = static_cast<int>(g.mu.size());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(g.sigma);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("gibbs: covariance not factorizable after jitter");
  GibbsWorkspace ws;
  ws.precision = ldlt.solve(Eigen::MatrixXd::Identity(M, M));
  ws.cond_var.resize(M);
  ws.cond_sd.resize(M);
  for (int j = 0; j < M; ++j) {
    double ljj = ws.precision(j, j);
    if (!(ljj > 0.0) || !std::isfinite(ljj))
      throw NumericalError("gibbs: covariance singular after jitter");
    ws.cond_var[j] = 1.0 / ljj;
    ws.cond_sd[j] = std::sqrt(ws.cond_var[j]);
  }
  return ws;
}

// Systematic-scan sweeps (fixed order 1..M). `w` is updated in place and
// always satisfies the orthant constraint on exit.
inline void gibbs_sweeps(const GibbsWorkspace& ws, const SubjectGaussian& g,
                         const OrthantConstraint& c, int sweeps, Eigen::VectorXd& w,
                         RngStream& rng) {
  const int M = static_cast<int>(g.mu.size());
  Eigen::VectorXd centered = w - g.mu;
  for (int s = 0; s < sweeps; ++s) {
    for (int j = 0; j < M; ++j) {
      double dot = ws.precision.row(j).dot(centered) - ws.precision(j, j) * centered[j];
      double tau = g.mu[j] - ws.cond_var[j] * dot;
      Side side = (c.signs[j] == 1) ? Side::positive : Side::nonpositive;
      w[j] = truncated_normal_draw(tau, ws.cond_var[j], side, rng.uniform());
      centered[j] = w[j] - g.mu[j];
    }
  }
}

/// State of the W_i | Y_i Gibbs chain after `sweeps` full sweeps from `init`.
inline Eigen::VectorXd gibbs_w(const SubjectGaussian& g, const OrthantConstraint& c,
                               int sweeps, Eigen::VectorXd init, RngStream& rng) {
  const int M = static_cast<int>(g.mu.size());
  if (c.signs.size() != M || init.size() != M)
    throw ValidationError("gibbs_w: dimension mismatch");
  if (sweeps < 1) throw ValidationError("gibbs_w: sweeps must be >= 1");
  for (int j = 0; j < M; ++j) {
    bool ok = (c.signs[j] == 1) ? (init[j] > 0.0) : (init[j] <= 0.0);
    if (!ok) throw ValidationError("gibbs_w: init violates the orthant constraint");
  }
  GibbsWorkspace ws = make_gibbs_workspace(g);
  gibbs_sweeps(ws, g, c, sweeps, init, rng);
  return init;
}

/// Conditional law of the basis scores given W_i = w:
/// eta = B^T x + Sigma_theta E Sigma^-1 (w - mu),
/// Delta = Sigma_theta - Sigma_theta E Sigma^-1 E^T Sigma_theta.
inline LatentScoreConditional latent_score_conditional(
    const Eigen::MatrixXd& B, const Eigen::MatrixXd& sigma_theta,
    const Eigen::MatrixXd& E_i, const Eigen::VectorXd& x_i, const SubjectGaussian& g,
    const Eigen::VectorXd& w_i) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(g.sigma);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("latent_score_conditional: Sigma_i singular after jitter");
  Eigen::MatrixXd cross = sigma_theta * E_i;                 // J x M
  Eigen::MatrixXd gain = ldlt.solve(cross.transpose()).transpose();  // J x M
  LatentScoreConditional out;
  out.eta = B.transpose() * x_i + gain * (w_i - g.mu);
  out.delta = sigma_theta - gain * cross.transpose();
  out.delta = 0.5 * (out.delta + out.delta.transpose()).eval();
  return out;
}

// Symmetric PSD square-root-style factor F with F F^T = S (negative
// eigenvalues from roundoff clipped to zero).
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw NumericalError("psd_factor: eigen failure");
  Eigen::VectorXd l = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * l.asDiagonal();
}

struct ScoreDraw {
  Eigen::VectorXd z;
  double h = 0.0;
  int tries = 0;
  bool forced = false;
};

/// Accept-reject draw of z ~ N(eta, Delta) conditioned on z^T P z <= lambda.
/// `factor` is psd_factor(Delta). After max_tries the smallest-h draw is
/// returned flagged as forced.
inline ScoreDraw accept_reject_z(const Eigen::VectorXd& eta, const Eigen::MatrixXd& factor,
                                 const PenaltyMatrix& P, double lambda, int max_tries,
                                 RngStream& rng) {
  if (!(lambda > 0.0)) throw ValidationError("accept_reject_z: lambda must be positive");
  if (max_tries < 1) throw ValidationError("accept_reject_z: max_tries must be >= 1");
  const int J = static_cast<int>(eta.size());
  Eigen::VectorXd g(J);
  ScoreDraw best;
  best.h = std::numeric_limits<double>::infinity();
  for (int t = 1; t <= max_tries; ++t) {
    for (int j = 0; j < J; ++j) g[j] = rng.normal();
    Eigen::VectorXd z = eta + factor * g;
    double h = z.dot(P.entries.selfadjointView<Eigen::Lower>() * z);
    if (h <= lambda) return ScoreDraw{std::move(z), h, t, false};
    if (h < best.h) {
      best.z = std::move(z);
      best.h = h;
    }
  }
  best.tries = max_tries;
  best.forced = true;
  return best;
}

inline ScoreDraw accept_reject_z(const LatentScoreConditional& cond, const PenaltyMatrix& P,
                                 double lambda, int max_tries, RngStream& rng) {
  return accept_reject_z(cond.eta, psd_factor(cond.delta), P, lambda, max_tries, rng);
}

}  // namespace dfr
