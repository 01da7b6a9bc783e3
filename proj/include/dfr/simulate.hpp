#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "dfr/dataset.hpp"
#include "dfr/errors.hpp"
#include "dfr/fit.hpp"
#include "dfr/quadrature.hpp"
#include "dfr/rng.hpp"

namespace dfr {

enum class Design { R, RT, RM, IRS };
enum class CoefCase { simple, complex };

struct SimScenario {
  Design design = Design::R;
  int N = 50;
  int M = 12;
  double sigma2 = 0.2;
  double rho = 0.1;
  double r = 1.5;
  double p_c = 0.5;
  int p = 4;
  CoefCase coefficient_case = CoefCase::simple;
  std::uint64_t seed = 0;
  // Diagnostic knob for the identifiability property: multiplies the latent
  // path (coefficients and score scale) by this factor; the induced noise
  // variance scales with the kernel, so the binary data are unchanged.
  double latent_scale = 1.0;
  // Optional coefficient overrides (library-level only, not in the JSON
  // schema); null means the coefficient_case curves.
  std::function<double(double)> beta0_fn, beta1_fn;

  void validate() const {
    if (N < 1 || M < 2 || p < 1) throw ValidationError("scenario: N, M, p out of range");
    if (!(rho > 0.0 && rho < 1.0)) throw ValidationError("scenario: rho must lie in (0,1)");
    if (!(r >= 0.0)) throw ValidationError("scenario: r must be nonnegative");
    if (!(p_c > 0.0 && p_c < 1.0)) throw ValidationError("scenario: p_c must lie in (0,1)");
    if (!(sigma2 >= 0.0)) throw ValidationError("scenario: sigma2 must be nonnegative");
    if (!(latent_scale > 0.0)) throw ValidationError("scenario: latent_scale must be positive");
  }
};

struct GroundTruth {
  std::function<double(double)> beta0, beta1;
  Eigen::VectorXd nu;
  std::vector<std::function<double(double)>> psi;
  double sigma2 = 0.0;
  // Standardized truth on the reporting grid.
  Eigen::VectorXd grid;
  Eigen::MatrixXd alpha;    // 2 x G
  Eigen::VectorXd rho_std;  // standardized eigenvalues, descending
  Eigen::MatrixXd phi;      // p x G
  Eigen::VectorXd kernel;   // K(t,t) on the grid
  // Latent paths zeta_i at each subject's sampled times.
  std::vector<Eigen::VectorXd> zeta;
};

/// nu_j = r * rho^(j-1); the eigenfunction ladder runs through the unit-mean
/// trig system from sqrt(2) sin(2 pi t) upward.
inline std::pair<Eigen::VectorXd, std::vector<std::function<double(double)>>>
true_eigenstructure(int p, double r, double rho) {
  if (p < 1) throw ValidationError("true_eigenstructure: p must be >= 1");
  Eigen::VectorXd nu(p);
  for (int j = 0; j < p; ++j) nu[j] = r * std::pow(rho, j);
  std::vector<std::function<double(double)>> psi;
  psi.reserve(p);
  const double sqrt2 = std::numbers::sqrt2;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int k = 1; k <= p; ++k) {
    int idx = k + 1;  // ladder index: the constant function is skipped
    if (idx % 2 == 0) {
      int freq = idx / 2;
      psi.push_back([=](double t) { return sqrt2 * std::sin(two_pi * freq * t); });
    } else {
      int freq = (idx - 1) / 2 + 1;
      psi.push_back([=](double t) { return sqrt2 * std::cos(two_pi * freq * t); });
    }
  }
  return {nu, psi};
}

namespace detail {

inline Eigen::VectorXd qc_pmf(int M, double p_c) {
  Eigen::VectorXd w(M);
  for (int a = 1; a <= M; ++a) w[a - 1] = std::pow(p_c, M - a + 1);
  return w / w.sum();
}

inline double qc_mean(int M, double p_c) {
  Eigen::VectorXd pmf = qc_pmf(M, p_c);
  double m = 0.0;
  for (int a = 1; a <= M; ++a) m += a * pmf[a - 1];
  return m;
}

inline int draw_categorical(const Eigen::VectorXd& pmf, RngStream& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (int a = 0; a < pmf.size(); ++a) {
    acc += pmf[a];
    if (u <= acc) return a;
  }
  return static_cast<int>(pmf.size()) - 1;
}

}  // namespace detail

/// One subject's sampled times under a design. R: the fixed grid j/M.
/// RT: a Q_c-truncated prefix of the grid. RM: grid points kept with
/// probability 1 - p_m, p_m = 1 - E[Q_c]/M. IRS: Q_c-many uniforms, sorted.
inline Eigen::VectorXd sample_timepoints(Design design, int M, double p_c, RngStream& rng) {
  if (M < 2) throw ValidationError("sample_timepoints: M must be >= 2");
  auto grid_point = [M](int j) { return static_cast<double>(j) / M; };
  switch (design) {
    case Design::R: {
      Eigen::VectorXd t(M);
      for (int j = 1; j <= M; ++j) t[j - 1] = grid_point(j);
      return t;
    }
    case Design::RT: {
      int mi = 1 + detail::draw_categorical(detail::qc_pmf(M, p_c), rng);
      Eigen::VectorXd t(mi);
      for (int j = 1; j <= mi; ++j) t[j - 1] = grid_point(j);
      return t;
    }
    case Design::RM: {
      double keep = detail::qc_mean(M, p_c) / M;  // 1 - p_m
      for (;;) {
        std::vector<double> kept;
        for (int j = 1; j <= M; ++j)
          if (rng.uniform() <= keep) kept.push_back(grid_point(j));
        if (!kept.empty())
          return Eigen::Map<Eigen::VectorXd>(kept.data(), kept.size()).eval();
      }
    }
    case Design::IRS: {
      int mi = 1 + detail::draw_categorical(detail::qc_pmf(M, p_c), rng);
      std::vector<double> t(mi);
      for (int j = 0; j < mi; ++j) t[j] = rng.uniform();
      std::sort(t.begin(), t.end());
      return Eigen::Map<Eigen::VectorXd>(t.data(), mi).eval();
    }
  }
  throw ValidationError("sample_timepoints: unknown design");
}

namespace detail {

// Standardized truth: alpha_l = beta_l / sqrt(K), and the eigenpairs of
// K*(s,t) = K(s,t)/sqrt(K(s,s)K(t,t)). K has rank p, so the operator
// eigenproblem reduces to the p x p Gram matrix of g_a = sqrt(nu_a) psi_a /
// sqrt(K); its trace is exactly 1.
inline void standardized_truth(GroundTruth& gt, int p, int grid_size) {
  const auto& rule = default_quadrature();
  auto kernel_at = [&](double t) {
    double k = 0.0;
    for (int a = 0; a < p; ++a) {
      double v = gt.psi[a](t);
      k += gt.nu[a] * v * v;
    }
    return std::max(k, 1e-12);
  };
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  for (int s = 0; s < rule.nodes.size(); ++s) {
    double t = rule.nodes[s];
    double k = kernel_at(t);
    Eigen::VectorXd g(p);
    for (int a = 0; a < p; ++a)
      g[a] = std::sqrt(gt.nu[a]) * gt.psi[a](t) / std::sqrt(k);
    gram.noalias() += rule.weights[s] * g * g.transpose();
  }
  gram = 0.5 * (gram + gram.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  gt.grid = Eigen::VectorXd::LinSpaced(grid_size, 0.0, 1.0);
  gt.kernel.resize(grid_size);
  gt.alpha.resize(2, grid_size);
  gt.rho_std.resize(p);
  gt.phi.resize(p, grid_size);
  for (int j = 0; j < p; ++j) gt.rho_std[j] = es.eigenvalues()[p - 1 - j];
  for (int t = 0; t < grid_size; ++t) {
    double tt = gt.grid[t];
    double k = kernel_at(tt);
    gt.kernel[t] = k;
    gt.alpha(0, t) = gt.beta0(tt) / std::sqrt(k);
    gt.alpha(1, t) = gt.beta1(tt) / std::sqrt(k);
    Eigen::VectorXd g(p);
    for (int a = 0; a < p; ++a)
      g[a] = std::sqrt(gt.nu[a]) * gt.psi[a](tt) / std::sqrt(k);
    for (int j = 0; j < p; ++j) {
      double rho_j = gt.rho_std[j];
      Eigen::VectorXd c = es.eigenvectors().col(p - 1 - j);
      gt.phi(j, t) = rho_j > 1e-12 ? c.dot(g) / std::sqrt(rho_j) : 0.0;
    }
  }
  // Deterministic sign: largest-|value| grid point positive.
  for (int j = 0; j < p; ++j) {
    int arg = 0;
    gt.phi.row(j).cwiseAbs().maxCoeff(&arg);
    if (gt.phi(j, arg) < 0.0) gt.phi.row(j) = -gt.phi.row(j);
  }
}

}  // namespace detail

/// Draws the full simulated dataset: x_i standard normal, latent path
/// zeta_i(t) = beta0 + beta1 x_i + sum_j sqrt(nu_j) eps_ij psi_j(t), binary
/// response y = 1{zeta + noise > 0} with noise ~ N(0, sigma2 K(t,t)).
inline std::pair<ObservedDataset, GroundTruth> generate_dataset(const SimScenario& sc,
                                                                int grid_size = 101) {
  sc.validate();
  GroundTruth gt;
  auto [nu, psi] = true_eigenstructure(sc.p, sc.r, sc.rho);
  const double ls = sc.latent_scale;
  gt.nu = (ls * ls) * nu;
  gt.psi = std::move(psi);
  gt.sigma2 = sc.sigma2;
  const double two_pi = 2.0 * std::numbers::pi;
  if (sc.coefficient_case == CoefCase::simple) {
    gt.beta0 = [ls, two_pi](double t) { return -ls * std::cos(two_pi * t); };
    gt.beta1 = [ls](double t) { return ls * (1.0 - 2.0 * t); };
  } else {
    gt.beta0 = [ls, two_pi](double t) { return -ls * std::cos(two_pi * t); };
    gt.beta1 = [ls, two_pi](double t) { return -ls * std::sin(2.0 * two_pi * t); };
  }
  if (sc.beta0_fn) gt.beta0 = [ls, f = sc.beta0_fn](double t) { return ls * f(t); };
  if (sc.beta1_fn) gt.beta1 = [ls, f = sc.beta1_fn](double t) { return ls * f(t); };
  auto kernel_at = [&](double t) {
    double k = 0.0;
    for (int a = 0; a < sc.p; ++a) {
      double v = gt.psi[a](t);
      k += gt.nu[a] * v * v;
    }
    return k;
  };

  ObservedDataset data;
  data.subjects.resize(sc.N);
  gt.zeta.resize(sc.N);
  for (int i = 0; i < sc.N; ++i) {
    auto u = static_cast<std::uint64_t>(i);
    RngStream rng_x = RngStream::derive(sc.seed, {kStreamSimX, u});
    RngStream rng_s = RngStream::derive(sc.seed, {kStreamSimScores, u});
    RngStream rng_t = RngStream::derive(sc.seed, {kStreamSimTimes, u});
    RngStream rng_n = RngStream::derive(sc.seed, {kStreamSimNoise, u});

    Subject& subj = data.subjects[i];
    subj.id = "s" + std::to_string(i + 1);
    double xi = rng_x.normal();
    subj.x.resize(2);
    subj.x << 1.0, xi;
    Eigen::VectorXd scores(sc.p);
    for (int a = 0; a < sc.p; ++a) scores[a] = rng_s.normal();
    subj.times = sample_timepoints(sc.design, sc.M, sc.p_c, rng_t);
    const int mi = static_cast<int>(subj.times.size());
    subj.y.resize(mi);
    Eigen::VectorXd zeta(mi);
    for (int j = 0; j < mi; ++j) {
      double t = subj.times[j];
      double z = gt.beta0(t) + gt.beta1(t) * xi;
      for (int a = 0; a < sc.p; ++a) z += std::sqrt(gt.nu[a]) * scores[a] * gt.psi[a](t);
      zeta[j] = z;
      double noise = std::sqrt(sc.sigma2 * kernel_at(t)) * rng_n.normal();
      subj.y[j] = (z + noise > 0.0) ? 1 : 0;
    }
    gt.zeta[i] = std::move(zeta);
  }
  detail::standardized_truth(gt, sc.p, grid_size);
  return {std::move(data), std::move(gt)};
}

struct MseRecord {
  double beta0 = 0.0, beta1 = 0.0, psi1 = 0.0, psi2 = 0.0;
  double nu1 = 0.0, nu2 = 0.0, sigma2 = 0.0;
};

namespace detail {

inline double grid_ise(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const int G = static_cast<int>(a.size());
  double h = 1.0 / (G - 1);
  double acc = 0.0;
  for (int i = 0; i < G; ++i) {
    double d = a[i] - b[i];
    double w = (i == 0 || i == G - 1) ? 0.5 : 1.0;
    acc += w * d * d;
  }
  return acc * h;
}

}  // namespace detail

/// Integrated squared errors of the standardized parameters on the grid;
/// eigenfunctions compared after sign alignment; eigenvalues and sigma2 by
/// squared error.
inline MseRecord mse_eval(const FitResult& fit, const GroundTruth& truth,
                          const Eigen::VectorXd& grid) {
  Eigen::MatrixXd Eg = fit.basis.evaluate(grid);  // J x G
  MseRecord rec;
  Eigen::VectorXd a0 = Eg.transpose() * fit.standardized.alpha.row(0).transpose();
  Eigen::VectorXd a1 = Eg.transpose() * fit.standardized.alpha.row(1).transpose();
  Eigen::VectorXd t0 = truth.alpha.row(0).transpose();
  Eigen::VectorXd t1 = truth.alpha.row(1).transpose();
  rec.beta0 = detail::grid_ise(a0, t0);
  rec.beta1 = detail::grid_ise(a1, t1);
  auto phi_err = [&](int j) {
    Eigen::VectorXd est = Eg.transpose() * fit.standardized.eigenpairs[j].phi;
    Eigen::VectorXd tru = truth.phi.row(j).transpose();
    return std::min(detail::grid_ise(est, tru), detail::grid_ise((-est).eval(), tru));
  };
  rec.psi1 = phi_err(0);
  rec.psi2 = phi_err(1);
  rec.nu1 = std::pow(fit.standardized.eigenpairs[0].rho - truth.rho_std[0], 2);
  rec.nu2 = std::pow(fit.standardized.eigenpairs[1].rho - truth.rho_std[1], 2);
  rec.sigma2 = std::pow(fit.params.sigma2 - truth.sigma2, 2);
  return rec;
}

}  // namespace dfr
