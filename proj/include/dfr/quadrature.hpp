#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace dfr {

// Composite Simpson rule on [0,1]. All basis inner products in this library
// go through the same fixed 1001-point rule so matrices built in different
// places agree bit-for-bit.
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  static QuadratureRule simpson(int npts = 1001) {
    if (npts < 3 || npts % 2 == 0)
      throw std::invalid_argument("simpson: need an odd number of nodes >= 3");
    QuadratureRule rule;
    rule.nodes.resize(npts);
    rule.weights.resize(npts);
    const double h = 1.0 / static_cast<double>(npts - 1);
    for (int i = 0; i < npts; ++i) {
      rule.nodes[i] = h * i;
      double w = (i == 0 || i == npts - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      rule.weights[i] = w * h / 3.0;
    }
    return rule;
  }

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (int i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

inline const QuadratureRule& default_quadrature() {
  static const QuadratureRule rule = QuadratureRule::simpson(1001);
  return rule;
}

}  // namespace dfr
