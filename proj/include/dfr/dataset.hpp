#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dfr/errors.hpp"

namespace dfr {

// One subject: covariate vector (intercept included), observation times in
// [0,1], and the binary responses at those times.
struct Subject {
  std::string id;
  Eigen::VectorXd x;
  Eigen::VectorXd times;
  Eigen::VectorXi y;
};

struct ObservedDataset {
  std::vector<Subject> subjects;

  int n() const { return static_cast<int>(subjects.size()); }

  int q() const {
    return subjects.empty() ? 0 : static_cast<int>(subjects.front().x.size());
  }

  long total_obs() const {
    long m = 0;
    for (const auto& s : subjects) m += s.times.size();
    return m;
  }

  Eigen::MatrixXd design() const {
    Eigen::MatrixXd X(n(), q());
    for (int i = 0; i < n(); ++i) X.row(i) = subjects[i].x.transpose();
    return X;
  }

  void validate() const {
    if (subjects.empty()) throw ValidationError("dataset: no subjects");
    for (const auto& s : subjects) {
      if (s.x.size() != subjects.front().x.size())
        throw ValidationError("dataset: covariate length mismatch for subject " + s.id);
      if (s.times.size() != s.y.size())
        throw ValidationError("dataset: times/y length mismatch for subject " + s.id);
      if (s.times.size() == 0)
        throw ValidationError("dataset: subject " + s.id + " has no observations");
      for (int j = 0; j < s.times.size(); ++j) {
        if (s.times[j] < 0.0 || s.times[j] > 1.0)
          throw ValidationError("dataset: time outside [0,1] for subject " + s.id);
        if (s.y[j] != 0 && s.y[j] != 1)
          throw ValidationError("dataset: non-binary response for subject " + s.id);
      }
    }
  }
};

}  // namespace dfr
