#pragma once

#include <Eigen/Core>

namespace selfcrowd {

/// Model-predicted annotation for an (instance, worker) pair with no
/// observed label.
struct PseudoCandidate {
  int instance = 0;
  int worker = 0;
  Eigen::VectorXd distribution;  // predicted annotation distribution, sums to 1
  double entropy = 0.0;          // natural-log Shannon entropy of `distribution`
  int argmax_class = 0;          // 0-based, lowest index on ties
};

}  // namespace selfcrowd
