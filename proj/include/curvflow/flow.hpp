#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "curvflow/catalog.hpp"
#include "curvflow/chart.hpp"
#include "curvflow/field.hpp"

namespace curvflow {

/// Integration scheme for the projected Brownian system dx = P(x) dB.
///
/// StratonovichHeun discretizes the Stratonovich form directly with a
/// predictor-corrector midpoint (no drift term: the tangential Ito correction
/// vanishes for gradient systems).  ItoDriftProject steps the Ito form, whose
/// drift is the ambient mean-curvature term, then retracts.
enum class FlowScheme { StratonovichHeun, ItoDriftProject };

/// Accepts "stratonovich-heun"/"heun" and "ito-drift-project"/"ito".
FlowScheme parse_scheme(const std::string& name);
std::string scheme_name(FlowScheme scheme);

struct FlowConfig {
  double dt = 1e-3;
  double tFinal = 1.0;
  long nPaths = 100;
  std::vector<Eigen::VectorXd> initGrid;  // starting parameter points; empty = tensor default
  std::uint64_t masterSeed = 0;
  FlowScheme scheme = FlowScheme::StratonovichHeun;
};

/// Tensor grid of starting points, `pointsPerDim` per parameter dimension
/// (cell centers, so chart-boundary singularities are avoided).
std::vector<Eigen::VectorXd> tensor_init_grid(const ImmersionChart& chart, int pointsPerDim);

/// Throws ConfigError unless dt > 0, tFinal >= 10 dt, nPaths >= 1 and every
/// initGrid point has the chart's parameter dimension.
void validate_config(const FlowConfig& config, const ImmersionChart& chart);

/// One simulated path: ambient position, the orthonormal frame carried along
/// it by projection transport, and the derivative flow written from the
/// initial frame to the current one.  The stored jac is rescaled when its
/// entries leave a safe range; jacLogScale accumulates the logs, so the true
/// matrix is exp(jacLogScale) * jac.
struct FlowState {
  double t = 0.0;
  Eigen::VectorXd u;       // chart coordinates of x
  Eigen::VectorXd x;       // ambient position
  FramedPoint frame;       // transported orthonormal frame
  Eigen::MatrixXd jac;     // derivative flow, initial frame -> current frame
  double jacLogScale = 0.0;
};

FlowState initial_state(const ImmersionChart& chart, const Eigen::VectorXd& u0);

/// Position and frame update for one increment dB ~ N(0, dt I_m).  The jac
/// field is copied through unchanged; dt and the scheme are read from config.
/// Throws NumericError when the retraction has to move the point too far
/// (step too coarse for the local curvature: decrease dt).
FlowState brownian_step(const FlowState& state, const Eigen::VectorXd& dB,
                        const ImmersionChart& chart, const FlowConfig& config);

/// Derivative-flow update for the same increment: returns the new jac (in the
/// transported frame, same jacLogScale).  In the moving frame the covariant
/// equation has pure shape-operator coefficients; the Heun corrector is
/// evaluated at the predictor point, the Ito variant carries the explicit
/// -(1/2) Ric dt drift of the covariant Ito form.
Eigen::MatrixXd derivative_step(const FlowState& state, const Eigen::VectorXd& dB,
                                const ImmersionChart& chart, const FlowConfig& config);

/// Fused step used by the estimators: position, frame and jac together.
FlowState flow_step(const FlowState& state, const Eigen::VectorXd& dB,
                    const ImmersionChart& chart, const FlowConfig& config);

/// Norms of the induced map on Lambda^q: operator norm (product of the top q
/// singular values, attained on a primitive unit vector) and Hilbert-Schmidt
/// norm (sqrt of the q-th elementary symmetric polynomial of the squared
/// singular values).
struct LambdaNorm {
  double op = 0.0;
  double hs = 0.0;
};
LambdaNorm lambda_q_norm(const Eigen::MatrixXd& jac, int q);

/// Same in log scale with an external log prefactor (for rescaled jacs).
LambdaNorm lambda_q_log_norm(const Eigen::MatrixXd& jac, int q, double logScale);

struct MomentWindow {
  double t0 = 0.0;
  double t1 = 0.0;
  double slope = 0.0;
};

/// One reduced checkpoint: mean of p log||.|| over all paths and starting
/// points, the max-over-grid log moment, and its bootstrap deviation (filled
/// on the slope-fit window, 0 elsewhere).
struct MomentSeriesPoint {
  double t = 0.0;
  double meanLog = 0.0;
  double logMax = 0.0;
  double deviation = 0.0;
};

struct MomentEstimate {
  double p = 0.0;
  int q = 0;
  double muHat = 0.0;          // slope of log max_x mean ||Lambda^q jac||_op^p
  double standardError = 0.0;  // path bootstrap over the same fit
  double muHatHs = 0.0;        // Hilbert-Schmidt variant (agrees as t -> inf)
  double standardErrorHs = 0.0;
  std::vector<MomentWindow> windows;       // per-quarter slopes of the op-norm curve
  std::vector<MomentSeriesPoint> series;   // op-norm checkpoint curve
};

/// Moment exponent estimate: per starting point, log-sum-exp mean over paths
/// of ||Lambda^q jac||^p at checkpoint times; max over the grid; least-squares
/// slope over the second half of the horizon; 200 bootstrap resamples for the
/// standard error.  Paths are keyed by (masterSeed, start index, path index)
/// and all reductions run in a fixed pairwise order, so results are
/// bit-reproducible for a fixed config.
MomentEstimate moment_exponent(const ImmersionChart& chart, const FlowConfig& config, double p,
                               int q);

/// Batch variant sharing one simulation across many (p, q) pairs: the per-path
/// singular-value table is computed once.
std::vector<MomentEstimate> moment_exponents(const ImmersionChart& chart,
                                             const FlowConfig& config,
                                             const std::vector<std::pair<double, int>>& pqs);

/// Discrete check of the Ito identity behind the moment drift: along each
/// path, |V_t|^p - |V_0|^p is compared against the accumulated stochastic
/// integral p |V|^{p-2} <V, dLambda^q(A(., dB_normal)) V> plus the drift
/// (p/2) |V|^p H_p^q(V/|V|, V/|V|) dt, with V_t the q-flow of the leading
/// frame vectors.  Residuals are relative to 1 + |V_t|^p.
struct PathwiseIdentity {
  double maxResidual = 0.0;         // max over paths and checkpoints
  double meanResidual = 0.0;        // mean over paths of the per-path max
  double antitheticResidual = 0.0;  // |pair-averaged signed residual| at t final, averaged
};
PathwiseIdentity pathwise_identity_check(const ImmersionChart& chart, const FlowConfig& config,
                                         double p, int q);

/// Growth-rate estimate of E exp(int_0^t h(x_s) ds) along flow paths and the
/// derived eigenvalue bound lambdaHat = -2 estimate; trapezoid accumulation,
/// log-sum-exp mean, slope fit on the tail half, path bootstrap.
struct FeynmanKac {
  double estimate = 0.0;       // fitted growth rate of log E exp(int h)
  double lambdaHat = 0.0;      // -2 * estimate
  double standardError = 0.0;  // bootstrap deviation of estimate
  double ess = 0.0;            // effective sample size at the final time
  bool lowEss = false;         // ess below 10% of nPaths
  std::vector<MomentSeriesPoint> series;
};
FeynmanKac feynman_kac(const ImmersionChart& chart,
                       const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& h,
                       const FlowConfig& config);

/// Field variant: h interpolated from the sampled potential, all paths started
/// at its grid argmax (the sup_x start point).
FeynmanKac feynman_kac(const ImmersionChart& chart, const PotentialField& h,
                       const FlowConfig& config);

/// Pathwise volume identity: for each path (one common increment sequence
/// shared by every grid point), the quadrature sum of det(jac) over the grid
/// should reproduce vol(M), since the time-t flow map is a diffeomorphism.
struct VolumeCheck {
  double exactVolume = 0.0;
  Eigen::VectorXd flowVolumes;  // one per path
  double maxRelError = 0.0;
};
VolumeCheck volume_identity(const ImmersionChart& chart, const ParamGrid& grid,
                            const FlowConfig& config);

}  // namespace curvflow
