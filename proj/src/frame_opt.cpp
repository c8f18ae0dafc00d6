#include "curvflow/frame_opt.hpp"

#include "curvflow/rng.hpp"

#include <cmath>

namespace curvflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd skew_from(const VectorXd& s, int n) {
  MatrixXd S = MatrixXd::Zero(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      S(i, j) = s(k);
      S(j, i) = -s(k);
      ++k;
    }
  return S;
}

MatrixXd cayley(const MatrixXd& S) {
  const int n = static_cast<int>(S.rows());
  const MatrixXd I = MatrixXd::Identity(n, n);
  return (I - 0.5 * S).partialPivLu().solve(I + 0.5 * S);
}

MatrixXd reorthonormalize(const MatrixXd& Q) {
  // Gram-Schmidt with positive pivots keeps the frame near the input.
  const int n = static_cast<int>(Q.rows());
  MatrixXd R = Q;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) R.col(j) -= R.col(i).dot(R.col(j)) * R.col(i);
    R.col(j).normalize();
  }
  return R;
}

MatrixXd random_frame(int n, GaussianStream& stream) {
  MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = stream.gaussian();
  Eigen::HouseholderQR<MatrixXd> qr(G);
  MatrixXd Q = qr.householderQ();
  const MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j)
    if (R(j, j) < 0) Q.col(j) *= -1.0;
  return Q;
}

}  // namespace

FrameOptResult optimize_over_frames(int n, const std::function<double(const MatrixXd&)>& objective,
                                    bool maximize, const FrameOptSettings& settings,
                                    const std::vector<MatrixXd>& seedFrames) {
  const double sign = maximize ? 1.0 : -1.0;
  const int dim = n * (n - 1) / 2;

  FrameOptResult best;
  best.frame = MatrixXd::Identity(n, n);
  best.value = objective(best.frame);
  best.converged = (dim == 0);
  if (dim == 0) return best;

  GaussianStream stream(settings.seed, make_stream(0xF7, static_cast<std::uint32_t>(n), 0));
  bool haveBest = false;

  for (int start = 0; start < settings.starts; ++start) {
    MatrixXd Q;
    if (start == 0) Q = MatrixXd::Identity(n, n);
    else if (static_cast<std::size_t>(start) <= seedFrames.size()) Q = seedFrames[static_cast<std::size_t>(start - 1)];
    else Q = random_frame(n, stream);

    double value = sign * objective(Q);
    double stepSize = 0.25;
    bool converged = false;
    int it = 0;
    for (; it < settings.maxIters; ++it) {
      // Central-difference gradient in the Cayley parameters at Q.
      VectorXd grad(dim);
      int k = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          VectorXd e = VectorXd::Zero(dim);
          e(k) = settings.fdStep;
          const double fp = sign * objective(Q * cayley(skew_from(e, n)));
          const double fm = sign * objective(Q * cayley(skew_from(-e, n)));
          grad(k) = (fp - fm) / (2.0 * settings.fdStep);
          ++k;
        }
      const double gnorm = grad.norm();
      if (gnorm <= settings.gradTol) {
        converged = true;
        break;
      }

      // Armijo backtracking along the gradient direction.
      const VectorXd dir = grad / gnorm;
      double alpha = stepSize;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls) {
        const MatrixXd Qnew = Q * cayley(skew_from((alpha * dir).eval(), n));
        const double fnew = sign * objective(Qnew);
        if (fnew >= value + 1e-4 * alpha * gnorm) {
          Q = Qnew;
          value = fnew;
          accepted = true;
          stepSize = std::min(4.0 * alpha, 1.0);
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // Gradient noise floor reached; treat as converged when the step has
        // collapsed, otherwise record the stall.
        converged = alpha < 1e-12 || gnorm < 1e2 * settings.gradTol;
        break;
      }
      if ((it + 1) % 32 == 0) Q = reorthonormalize(Q);
    }

    const double raw = sign * value;
    if (!haveBest || (maximize ? raw > best.value : raw < best.value)) {
      best.value = raw;
      best.frame = reorthonormalize(Q);
      best.converged = converged;
      best.iterations = it;
      haveBest = true;
    }
  }
  return best;
}

}  // namespace curvflow
