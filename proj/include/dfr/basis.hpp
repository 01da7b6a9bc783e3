#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "dfr/errors.hpp"
#include "dfr/quadrature.hpp"

namespace dfr {

struct PenaltyMatrix {
  int order = 2;
  Eigen::MatrixXd entries;
};

/// Basis system on [0,1]: fourier (1, √2·sin(2πjt), √2·cos(2πjt), ...) or
/// clamped B-splines. Immutable after construction; all methods are pure.
class BasisSystem {
 public:
  enum class Kind { fourier, bspline };

  static BasisSystem fourier(int J) {
    if (J < 1) throw ValidationError("fourier basis: J must be >= 1");
    BasisSystem b;
    b.kind_ = Kind::fourier;
    b.J_ = J;
    return b;
  }

  // Uniform clamped knots: degree+1 copies of each endpoint, J-degree-1
  // equally spaced interior knots.
  static BasisSystem bspline(int degree, int J) {
    if (degree < 1) throw ValidationError("bspline basis: degree must be >= 1");
    if (J < degree + 1) throw ValidationError("bspline basis: J must be >= degree+1");
    int interior = J - degree - 1;
    std::vector<double> knots;
    for (int i = 0; i <= degree; ++i) knots.push_back(0.0);
    for (int i = 1; i <= interior; ++i)
      knots.push_back(static_cast<double>(i) / (interior + 1));
    for (int i = 0; i <= degree; ++i) knots.push_back(1.0);
    return bspline(degree, std::move(knots));
  }

  static BasisSystem bspline(int degree, std::vector<double> knots) {
    if (degree < 1) throw ValidationError("bspline basis: degree must be >= 1");
    int J = static_cast<int>(knots.size()) - degree - 1;
    if (J < 1) throw ValidationError("bspline basis: knot vector too short");
    for (size_t i = 0; i + 1 < knots.size(); ++i)
      if (knots[i] > knots[i + 1])
        throw ValidationError("bspline basis: knots must be nondecreasing");
    if (knots.front() != 0.0 || knots.back() != 1.0)
      throw ValidationError("bspline basis: knots must span [0,1]");
    BasisSystem b;
    b.kind_ = Kind::bspline;
    b.J_ = J;
    b.degree_ = degree;
    b.knots_ = std::move(knots);
    b.check_conditioning();
    return b;
  }

  Kind kind() const { return kind_; }
  int size() const { return J_; }
  int degree() const { return degree_; }
  const std::vector<double>& knots() const { return knots_; }

  /// E with entry (j,k) = e_j(t_k); J x M.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& times) const {
    return evaluate_deriv(times, 0);
  }

  Eigen::MatrixXd evaluate_deriv(const Eigen::VectorXd& times, int n) const {
    Eigen::MatrixXd E(J_, times.size());
    for (int k = 0; k < times.size(); ++k) {
      double t = times[k];
      if (t < 0.0 || t > 1.0)
        throw ValidationError("basis evaluate: time outside [0,1]");
      E.col(k) = values_at(t, n);
    }
    return E;
  }

  /// P(n) = [<e_j^(n), e_k^(n)>]; analytic for fourier, Simpson quadrature
  /// for bsplines.
  PenaltyMatrix penalty_matrix(int n) const {
    if (n < 0) throw ValidationError("penalty_matrix: order must be >= 0");
    PenaltyMatrix P;
    P.order = n;
    if (kind_ == Kind::fourier) {
      P.entries = Eigen::MatrixXd::Zero(J_, J_);
      for (int j = 0; j < J_; ++j) {
        if (j == 0) {
          P.entries(0, 0) = (n == 0) ? 1.0 : 0.0;
        } else {
          int freq = (j + 1) / 2;
          P.entries(j, j) = std::pow(2.0 * std::numbers::pi * freq, 2.0 * n);
        }
      }
      return P;
    }
    if (degree_ < n)
      throw ValidationError("penalty_matrix: bspline degree below derivative order");
    P.entries = product_integrals(n);
    return P;
  }

  /// Gram matrix Omega = [<e_i, e_j>].
  Eigen::MatrixXd gram() const {
    if (kind_ == Kind::fourier) return Eigen::MatrixXd::Identity(J_, J_);
    return gram_;
  }

 private:
  BasisSystem() = default;

  Eigen::VectorXd values_at(double t, int n) const {
    if (kind_ == Kind::fourier) {
      Eigen::VectorXd v(J_);
      const double sqrt2 = std::numbers::sqrt2;
      const double half_pi = std::numbers::pi / 2.0;
      for (int j = 0; j < J_; ++j) {
        if (j == 0) {
          v[0] = (n == 0) ? 1.0 : 0.0;
          continue;
        }
        int freq = (j + 1) / 2;
        double w = 2.0 * std::numbers::pi * freq;
        double phase = w * t + n * half_pi;
        // n-th derivative of sin is sin shifted by n*pi/2; cos likewise.
        v[j] = (j % 2 == 1) ? sqrt2 * std::pow(w, n) * std::sin(phase)
                            : sqrt2 * std::pow(w, n) * std::cos(phase);
      }
      return v;
    }
    return bspline_values(t, n);
  }

  // Cox-de Boor triangle for all degrees, then the standard derivative
  // recursion. 0/0 conventions: empty spans contribute nothing.
  Eigen::VectorXd bspline_values(double t, int n) const {
    const auto& tau = knots_;
    const int d = degree_;
    const int nk = static_cast<int>(tau.size());
    // table[k] holds B_{j,k}(t) for j = 0..nk-k-2
    std::vector<std::vector<double>> table(d + 1);
    table[0].assign(nk - 1, 0.0);
    for (int j = 0; j < nk - 1; ++j) {
      bool in = (tau[j] <= t && t < tau[j + 1]);
      // close the final nonempty interval on the right so e_J(1) = 1
      if (t == 1.0 && tau[j] < tau[j + 1] && tau[j + 1] == 1.0) in = true;
      table[0][j] = in ? 1.0 : 0.0;
    }
    for (int k = 1; k <= d; ++k) {
      table[k].assign(nk - k - 1, 0.0);
      for (int j = 0; j < nk - k - 1; ++j) {
        double a = 0.0, b = 0.0;
        double g1 = tau[j + k] - tau[j];
        double g2 = tau[j + k + 1] - tau[j + 1];
        if (g1 > 0.0) a = (t - tau[j]) / g1 * table[k - 1][j];
        if (g2 > 0.0) b = (tau[j + k + 1] - t) / g2 * table[k - 1][j + 1];
        table[k][j] = a + b;
      }
    }
    Eigen::VectorXd v(J_);
    for (int j = 0; j < J_; ++j) v[j] = bspline_deriv(table, j, d, n);
    return v;
  }

  double bspline_deriv(const std::vector<std::vector<double>>& table, int j,
                       int k, int n) const {
    if (n == 0) {
      if (j < 0 || j >= static_cast<int>(table[k].size())) return 0.0;
      return table[k][j];
    }
    const auto& tau = knots_;
    double left = 0.0, right = 0.0;
    double g1 = tau[j + k] - tau[j];
    double g2 = tau[j + k + 1] - tau[j + 1];
    if (g1 > 0.0) left = bspline_deriv(table, j, k - 1, n - 1) / g1;
    if (g2 > 0.0) right = bspline_deriv(table, j + 1, k - 1, n - 1) / g2;
    return k * (left - right);
  }

  Eigen::MatrixXd product_integrals(int n) const {
    const auto& rule = default_quadrature();
    Eigen::MatrixXd V(J_, rule.nodes.size());
    for (int i = 0; i < rule.nodes.size(); ++i) V.col(i) = values_at(rule.nodes[i], n);
    Eigen::MatrixXd M = V * rule.weights.asDiagonal() * V.transpose();
    return 0.5 * (M + M.transpose());
  }

  void check_conditioning() {
    gram_ = product_integrals(0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_);
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || lo / hi < 1e-12)
      throw ValidationError("bspline basis: ill-conditioned Gram matrix (degenerate knots)");
  }

  Kind kind_ = Kind::fourier;
  int J_ = 1;
  int degree_ = 0;
  std::vector<double> knots_;
  Eigen::MatrixXd gram_;
};

}  // namespace dfr
