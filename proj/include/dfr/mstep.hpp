#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dfr/basis.hpp"
#include "dfr/dataset.hpp"
#include "dfr/draws.hpp"
#include "dfr/errors.hpp"
#include "dfr/quadrature.hpp"

namespace dfr {

struct ModelParams {
  Eigen::MatrixXd B;            // q x J
  Eigen::MatrixXd sigma_theta;  // J x J
  double sigma2 = 1.0;

  void validate() const {
    if (B.cols() != sigma_theta.rows() || sigma_theta.rows() != sigma_theta.cols())
      throw ValidationError("ModelParams: dimension mismatch");
    if (!(sigma2 > 0.0)) throw ValidationError("ModelParams: sigma2 must be positive");
    double asym = (sigma_theta - sigma_theta.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * (1.0 + sigma_theta.cwiseAbs().maxCoeff()))
      throw ValidationError("ModelParams: Sigma_theta not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_theta, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, sigma_theta.trace()))
      throw ValidationError("ModelParams: Sigma_theta not PSD");
  }
};

struct RemlProjector {
  Eigen::MatrixXd U;  // N x (N-q), orthonormal, U^T X = 0
};

struct EigenPair {
  double rho = 0.0;
  Eigen::VectorXd phi;  // basis coefficients of the eigenfunction
};

struct StandardizedEstimate {
  Eigen::MatrixXd alpha;  // q x J coefficient matrix of the alpha_l
  std::vector<EigenPair> eigenpairs;
  Eigen::VectorXd grid;
  Eigen::VectorXd kernel_diag;  // K*(t,t) on the grid
  Eigen::MatrixXd D;
  bool degenerate_kernel = false;
};

/// Orthonormal basis of the complement of col(X): the eigenvectors of
/// A = I - X(X^T X)^-1 X^T with eigenvalue 1.
inline RemlProjector reml_projector(const Eigen::MatrixXd& X) {
  const int N = static_cast<int>(X.rows());
  const int q = static_cast<int>(X.cols());
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < q) {
    std::string cols;
    for (int j = qr.rank(); j < q; ++j) {
      if (!cols.empty()) cols += ", ";
      cols += std::to_string(qr.colsPermutation().indices()[j]);
    }
    throw ValidationError("reml_projector: design matrix rank-deficient (columns " + cols + ")");
  }
  if (N <= q)
    throw ValidationError("reml_projector: N must exceed q (no residual dimensions)");
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(N, N) -
                      X * (X.transpose() * X).ldlt().solve(X.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("reml_projector: eigen failure");
  // Eigenvalues of A are 0 (q times) and 1 (N-q times), sorted ascending.
  RemlProjector out;
  out.U = es.eigenvectors().rightCols(N - q);
  double leak = (out.U.transpose() * X).cwiseAbs().maxCoeff();
  if (leak > 1e-8) throw NumericalError("reml_projector: projector failed U^T X = 0");
  return out;
}

/// REML update: Sigma_theta = (1/(N-q)) sum_k (1/K) sum_draws z*_k z*_k^T
/// with z*_k = Z^(draw)T u_k; draws are matched across subjects by index.
inline Eigen::MatrixXd update_sigma_theta(const MonteCarloDraws& draws,
                                          const RemlProjector& U) {
  const int N = static_cast<int>(draws.subjects.size());
  if (N == 0 || draws.K == 0) throw ValidationError("update_sigma_theta: empty draws");
  const int J = static_cast<int>(draws.subjects.front().z.rows());
  const int K = draws.K;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(J, J);
  Eigen::MatrixXd Z(N, J);
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < N; ++i) Z.row(i) = draws.subjects[i].z.col(k).transpose();
    Eigen::MatrixXd Zs = U.U.transpose() * Z;  // (N-q) x J
    acc.noalias() += Zs.transpose() * Zs;
  }
  acc /= static_cast<double>(K) * U.U.cols();
  return 0.5 * (acc + acc.transpose());
}

/// B = (X^T X)^-1 X^T Zbar with Zbar the draw-averaged score matrix.
inline Eigen::MatrixXd update_B(const MonteCarloDraws& draws, const Eigen::MatrixXd& X) {
  const int N = static_cast<int>(draws.subjects.size());
  if (N == 0 || draws.K == 0) throw ValidationError("update_B: empty draws");
  if (X.rows() != N) throw ValidationError("update_B: design row count mismatch");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) throw ValidationError("update_B: design matrix rank-deficient");
  const int J = static_cast<int>(draws.subjects.front().z.rows());
  Eigen::MatrixXd Zbar(N, J);
  for (int i = 0; i < N; ++i) Zbar.row(i) = draws.subjects[i].z.rowwise().mean().transpose();
  return (X.transpose() * X).ldlt().solve(X.transpose() * Zbar);
}

/// sigma2 = (1/sum M_i) sum_i avg_k (w - E_i^T z)^T K_i^-1 (w - E_i^T z),
/// floored at 1e-8. Under the rescaled convention callers pass unit k_diag.
inline double update_sigma2(const MonteCarloDraws& draws,
                            const std::vector<Eigen::MatrixXd>& E,
                            const std::vector<Eigen::VectorXd>& k_diag) {
  const int N = static_cast<int>(draws.subjects.size());
  if (N == 0 || draws.K == 0) throw ValidationError("update_sigma2: empty draws");
  double total = 0.0;
  long total_obs = 0;
  for (int i = 0; i < N; ++i) {
    const auto& d = draws.subjects[i];
    Eigen::MatrixXd resid = d.w - E[i].transpose() * d.z;  // M_i x K
    total += (k_diag[i].cwiseInverse().asDiagonal() * resid.cwiseAbs2()).sum() /
             static_cast<double>(draws.K);
    total_obs += resid.rows();
  }
  return std::max(total / static_cast<double>(total_obs), 1e-8);
}

inline double update_sigma2(const MonteCarloDraws& draws, const ObservedDataset& data,
                            const BasisSystem& basis,
                            const std::vector<Eigen::VectorXd>& k_diag) {
  std::vector<Eigen::MatrixXd> E;
  E.reserve(data.subjects.size());
  for (const auto& s : data.subjects) E.push_back(basis.evaluate(s.times));
  return update_sigma2(draws, E, k_diag);
}

/// K(t,t) = e(t)^T Sigma_theta e(t), floored at 1e-6.
inline Eigen::VectorXd kernel_diag(const Eigen::MatrixXd& sigma_theta,
                                   const BasisSystem& basis, const Eigen::VectorXd& times) {
  Eigen::MatrixXd E = basis.evaluate(times);
  Eigen::VectorXd out(times.size());
  for (int k = 0; k < times.size(); ++k) {
    double v = E.col(k).dot(sigma_theta.selfadjointView<Eigen::Lower>() * E.col(k));
    out[k] = std::max(v, 1e-6);
  }
  return out;
}

namespace detail {

// D = [int K(s,s)^(-1/2) e_i(s) e_j(s) ds] by the fixed Simpson rule;
// returns the floored-node count through `floored`.
inline Eigen::MatrixXd standardizer_matrix(const Eigen::MatrixXd& sigma_theta,
                                           const BasisSystem& basis, int* floored) {
  const auto& rule = default_quadrature();
  const int J = basis.size();
  Eigen::MatrixXd V = basis.evaluate(rule.nodes);  // J x n
  int nfloor = 0;
  Eigen::VectorXd wk(rule.nodes.size());
  for (int s = 0; s < rule.nodes.size(); ++s) {
    double k = V.col(s).dot(sigma_theta.selfadjointView<Eigen::Lower>() * V.col(s));
    if (k < 1e-6) {
      k = 1e-6;
      ++nfloor;
    }
    wk[s] = rule.weights[s] / std::sqrt(k);
  }
  if (floored) *floored = nfloor;
  (void)J;
  Eigen::MatrixXd D = V * wk.asDiagonal() * V.transpose();
  return 0.5 * (D + D.transpose());
}

inline Eigen::MatrixXd inv_sqrt_psd(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw NumericalError("inv_sqrt_psd: eigen failure");
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("inv_sqrt_psd: matrix not positive definite");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

inline void sign_normalize(Eigen::VectorXd& c) {
  int arg = 0;
  double best = -1.0;
  for (int i = 0; i < c.size(); ++i) {
    if (std::abs(c[i]) > best) {
      best = std::abs(c[i]);
      arg = i;
    }
  }
  if (c[arg] < 0.0) c = -c;
}

}  // namespace detail

/// Map (B, Sigma_theta) to the identifiable standardized estimate: alpha
/// coefficients B D Omega^-1, eigenpairs of Omega^-1/2 D Sigma_theta D
/// Omega^-1/2 mapped back through phi_j = Omega^-1/2 theta_j, and the
/// standardized kernel diagonal on the reporting grid.
inline StandardizedEstimate standardize(const Eigen::MatrixXd& B,
                                        const Eigen::MatrixXd& sigma_theta,
                                        const BasisSystem& basis, int grid_size = 101) {
  const int J = basis.size();
  if (B.cols() != J || sigma_theta.rows() != J || sigma_theta.cols() != J)
    throw ValidationError("standardize: dimension mismatch");
  int nfloor = 0;
  Eigen::MatrixXd D = detail::standardizer_matrix(sigma_theta, basis, &nfloor);
  const bool orthonormal = (basis.kind() == BasisSystem::Kind::fourier);
  Eigen::MatrixXd omega = basis.gram();
  Eigen::MatrixXd omega_inv_sqrt =
      orthonormal ? Eigen::MatrixXd::Identity(J, J) : detail::inv_sqrt_psd(omega);

  StandardizedEstimate out;
  out.D = D;
  out.degenerate_kernel =
      nfloor > static_cast<int>(0.01 * default_quadrature().nodes.size());
  out.alpha = orthonormal ? (B * D).eval()
                          : (B * D * omega.ldlt().solve(Eigen::MatrixXd::Identity(J, J))).eval();

  Eigen::MatrixXd R = omega_inv_sqrt * D * sigma_theta * D.transpose() * omega_inv_sqrt;
  R = 0.5 * (R + R.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
  if (es.info() != Eigen::Success) throw NumericalError("standardize: eigen failure");

  std::vector<int> order(J);
  std::iota(order.begin(), order.end(), 0);
  // SelfAdjointEigenSolver sorts ascending; we want descending with a
  // deterministic tie rule: near-equal eigenvalues order by the first
  // differing coefficient of the mapped eigenvectors.
  std::vector<Eigen::VectorXd> coeffs(J);
  for (int j = 0; j < J; ++j) {
    coeffs[j] = omega_inv_sqrt * es.eigenvectors().col(j);
    detail::sign_normalize(coeffs[j]);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double da = es.eigenvalues()[a], db = es.eigenvalues()[b];
    if (std::abs(da - db) >= 1e-10) return da > db;
    for (int i = 0; i < J; ++i)
      if (coeffs[a][i] != coeffs[b][i]) return coeffs[a][i] < coeffs[b][i];
    return false;
  });
  out.eigenpairs.reserve(J);
  for (int j : order) out.eigenpairs.push_back({es.eigenvalues()[j], coeffs[j]});

  out.grid = Eigen::VectorXd::LinSpaced(grid_size, 0.0, 1.0);
  Eigen::MatrixXd Eg = basis.evaluate(out.grid);  // J x G
  out.kernel_diag = Eigen::VectorXd::Zero(grid_size);
  for (const auto& ep : out.eigenpairs) {
    Eigen::VectorXd vals = Eg.transpose() * ep.phi;
    out.kernel_diag += ep.rho * vals.cwiseAbs2();
  }
  return out;
}

/// Per-iteration identifiability rescaling: (B D, D Sigma_theta D^T) for an
/// orthonormal basis; with a general Gram the Gram-aware form
/// (B D Omega^-1, Omega^-1 D Sigma_theta D^T Omega^-1) keeps the kernel
/// diagonal at 1.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> rescale_params(
    const Eigen::MatrixXd& B, const Eigen::MatrixXd& sigma_theta,
    const BasisSystem& basis) {
  int nfloor = 0;
  Eigen::MatrixXd D = detail::standardizer_matrix(sigma_theta, basis, &nfloor);
  if (basis.kind() == BasisSystem::Kind::fourier)
    return {B * D, (D * sigma_theta * D.transpose()).eval()};
  const int J = basis.size();
  Eigen::MatrixXd omega_inv = basis.gram().ldlt().solve(Eigen::MatrixXd::Identity(J, J));
  Eigen::MatrixXd S = omega_inv * D * sigma_theta * D.transpose() * omega_inv;
  return {B * D * omega_inv, 0.5 * (S + S.transpose()).eval()};
}

}  // namespace dfr
