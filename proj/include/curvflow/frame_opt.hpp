#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace curvflow {

struct FrameOptSettings {
  int starts = 8;          // multistart count (identity + seeds + random)
  int maxIters = 500;
  double gradTol = 1e-8;   // on the Cayley-parameter gradient
  double fdStep = 1e-5;    // central-difference step for that gradient
  std::uint64_t seed = 0x5eedf00dULL;
};

struct FrameOptResult {
  double value = 0.0;
  Eigen::MatrixXd frame;   // n x n orthogonal
  bool converged = false;  // gradient tolerance reached on the winning start
  int iterations = 0;      // iterations spent on the winning start
};

/// Ascent (or descent) over SO(n) in the Cayley parametrization
/// Q -> Q (I - S/2)^{-1} (I + S/2), S skew, with finite-difference gradients
/// and Armijo backtracking.  Deterministic for fixed settings.
FrameOptResult optimize_over_frames(int n,
                                    const std::function<double(const Eigen::MatrixXd&)>& objective,
                                    bool maximize, const FrameOptSettings& settings = {},
                                    const std::vector<Eigen::MatrixXd>& seedFrames = {});

}  // namespace curvflow
