#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dfr {

// Retained Monte Carlo draws for one subject within one EM iteration.
// Column k of `w` pairs with column k of `z`; h[k] = z_k^T P z_k.
struct SubjectDraws {
  Eigen::MatrixXd w;  // M_i x K
  Eigen::MatrixXd z;  // J x K
  Eigen::VectorXd h;  // K
  int forced_accepts = 0;
};

struct MonteCarloDraws {
  std::vector<SubjectDraws> subjects;
  int K = 0;

  long forced_total() const {
    long n = 0;
    for (const auto& s : subjects) n += s.forced_accepts;
    return n;
  }
};

}  // namespace dfr
