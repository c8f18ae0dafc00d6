#include "curvflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "curvflow/exterior.hpp"
#include "curvflow/parallel.hpp"
#include "curvflow/rng.hpp"
#include "curvflow/weitzenbock.hpp"

namespace curvflow {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr std::uint8_t kStreamMoment = 0x50;
constexpr std::uint8_t kStreamFeynmanKac = 0x51;
constexpr std::uint8_t kStreamIdentity = 0x52;
constexpr std::uint8_t kStreamVolume = 0x53;
constexpr std::uint8_t kStreamBootstrap = 0xB0;
constexpr int kBootstrapReps = 200;
constexpr int kMaxCheckpoints = 64;
constexpr double kInf = std::numeric_limits<double>::infinity();

double pairwise_sum(const double* v, std::size_t len) {
  if (len <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += v[i];
    return s;
  }
  const std::size_t half = len / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, len - half);
}

double pairwise_mean(const double* v, std::size_t len) {
  return len == 0 ? 0.0 : pairwise_sum(v, len) / static_cast<double>(len);
}

/// log of the mean of exp(vals[i]), shifted by the max so nothing overflows.
double log_mean_exp(const double* vals, std::size_t len, std::vector<double>& scratch) {
  double top = -kInf;
  for (std::size_t i = 0; i < len; ++i) top = std::max(top, vals[i]);
  if (!std::isfinite(top)) return top;
  scratch.resize(len);
  for (std::size_t i = 0; i < len; ++i) scratch[i] = std::exp(vals[i] - top);
  return top + std::log(pairwise_mean(scratch.data(), len));
}

double ols_slope(const std::vector<double>& t, const std::vector<double>& y, std::size_t lo,
                 std::size_t hi) {
  if (hi <= lo + 1) return 0.0;
  const double count = static_cast<double>(hi - lo);
  double tBar = 0.0, yBar = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    tBar += t[i];
    yBar += y[i];
  }
  tBar /= count;
  yBar /= count;
  double num = 0.0, den = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    num += (t[i] - tBar) * (y[i] - yBar);
    den += (t[i] - tBar) * (t[i] - tBar);
  }
  return den > 0.0 ? num / den : 0.0;
}

double sample_deviation(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = pairwise_mean(v.data(), v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

/// Path integrator.  Keeps the fundamental forms and the rotation from the
/// chart's canonical frame to the transported one in sync with the state, so
/// estimators can read the current geometry without recomputing it.
class Stepper {
 public:
  Stepper(const ImmersionChart& chart, double dt, FlowScheme scheme)
      : chart_(chart), dt_(dt), scheme_(scheme), n_(chart.n()) {}

  FlowState start(const Eigen::VectorXd& u0) {
    FlowState s;
    s.frame = frame_at(chart_, u0);
    s.u = s.frame.u;
    s.x = s.frame.x;
    s.jac = MatrixXd::Identity(n_, n_);
    canon_ = s.frame;
    forms_ = fundamental_forms(chart_, canon_);
    rot_ = MatrixXd::Identity(n_, n_);
    return s;
  }

  void sync(const FlowState& s) {
    canon_ = frame_at(chart_, s.u);
    forms_ = fundamental_forms(chart_, canon_);
    rot_ = frame_transport(s.frame.tangent, canon_.tangent);
  }

  const FramedPoint& canon() const { return canon_; }
  const FundamentalForms& forms() const { return forms_; }
  const MatrixXd& rot() const { return rot_; }

  void advance(FlowState& s, const Eigen::VectorXd& dB, bool withJac) {
    const VectorXd tanCoef = canon_.tangent.transpose() * dB;
    const MatrixXd Ccan = shape_operator(forms_, canon_.normal.transpose() * dB);
    const MatrixXd C = rot_.transpose() * Ccan * rot_;
    const double scale = std::max(dt_, dB.squaredNorm());

    VectorXd xRaw;
    MatrixXd G;
    if (scheme_ == FlowScheme::ItoDriftProject) {
      // Ito drift (1/2) sum_a tr(A_a) nu_a = (n/2) H; purely normal, the
      // tangential part cancels for gradient fields.
      xRaw = s.x + canon_.tangent * tanCoef +
             (0.5 * dt_ * n_) * (canon_.normal * forms_.mean);
      if (withJac)
        G = MatrixXd::Identity(n_, n_) + C -
            (0.5 * dt_) * (rot_.transpose() * ricci_matrix(forms_) * rot_);
    } else {
      VectorXd uPred, xPred;
      land(s.x + canon_.tangent * tanCoef, scale, uPred, xPred);
      const FramedPoint canonPred = frame_at(chart_, uPred);
      xRaw = s.x + 0.5 * (canon_.tangent * tanCoef) +
             0.5 * (canonPred.tangent * (canonPred.tangent.transpose() * dB));
      if (withJac) {
        const FundamentalForms formsPred = fundamental_forms(chart_, canonPred);
        const MatrixXd rotPred = frame_transport(s.frame.tangent, canonPred.tangent);
        const MatrixXd Cpred =
            rotPred.transpose() *
            shape_operator(formsPred, canonPred.normal.transpose() * dB) * rotPred;
        G = MatrixXd::Identity(n_, n_) + 0.5 * (C + Cpred) + 0.5 * (Cpred * C);
      }
    }

    VectorXd uNew, xNew;
    land(xRaw, scale, uNew, xNew);
    FramedPoint canonNew = frame_at(chart_, uNew);
    const MatrixXd rotNew = frame_transport(s.frame.tangent, canonNew.tangent);
    const MatrixXd rotNormal = frame_transport(s.frame.normal, canonNew.normal);
    s.u = canonNew.u;
    s.x = canonNew.x;
    s.frame.u = canonNew.u;
    s.frame.x = canonNew.x;
    s.frame.tangent = canonNew.tangent * rotNew;
    s.frame.normal = canonNew.normal * rotNormal;
    s.frame.coeff = canonNew.coeff * rotNew;
    if (withJac) {
      s.jac = G * s.jac;
      const double f = s.jac.norm();
      if (f > 0.0 && (f > 1e12 || f < 1e-12)) {
        s.jacLogScale += std::log(f);
        s.jac /= f;
      }
    }
    s.t += dt_;
    canon_ = std::move(canonNew);
    forms_ = fundamental_forms(chart_, canon_);
    rot_ = rotNew;
  }

 private:
  void land(const VectorXd& xRaw, double scale, VectorXd& uOut, VectorXd& xOut) const {
    xOut = chart_.retract(xRaw);
    const double moved = (xRaw - xOut).norm();
    if (moved > 10.0 * scale || moved > 0.1 * (1.0 + xOut.norm())) {
      std::ostringstream msg;
      msg << "flow step: retraction had to move the point by " << moved
          << " (increment scale " << scale << "); decrease dt";
      throw NumericError(msg.str());
    }
    uOut = chart_.param_of(xOut);
  }

  const ImmersionChart& chart_;
  double dt_;
  FlowScheme scheme_;
  int n_;
  FramedPoint canon_;
  FundamentalForms forms_;
  MatrixXd rot_;
};

struct Checkpoints {
  std::vector<long> steps;  // strictly increasing, last one == nSteps
  std::vector<double> times;
  std::size_t fitBegin = 0;  // first index inside the slope-fit window

  std::size_t count() const { return steps.size(); }
  std::size_t fitCount() const { return steps.size() - fitBegin; }
};

Checkpoints make_checkpoints(long nSteps, double dt, double tFinal) {
  Checkpoints ck;
  const long want = std::min<long>(kMaxCheckpoints, nSteps);
  long prev = 0;
  for (long k = 1; k <= want; ++k) {
    const long s = std::llround(static_cast<double>(k) * static_cast<double>(nSteps) /
                                static_cast<double>(want));
    if (s <= prev) continue;
    ck.steps.push_back(s);
    ck.times.push_back(static_cast<double>(s) * dt);
    prev = s;
  }
  ck.fitBegin = ck.steps.size() > 1 ? ck.steps.size() - 1 : 0;
  for (std::size_t i = 0; i < ck.times.size(); ++i)
    if (ck.times[i] >= 0.5 * tFinal - 1e-12) {
      ck.fitBegin = i;
      break;
    }
  return ck;
}

long step_count(const FlowConfig& config) {
  return std::max<long>(1, std::llround(config.tFinal / config.dt));
}

std::vector<Eigen::VectorXd> resolved_init_grid(const FlowConfig& config,
                                                const ImmersionChart& chart) {
  if (!config.initGrid.empty()) return config.initGrid;
  return tensor_init_grid(chart, 16);
}

std::vector<MomentWindow> window_slopes(const std::vector<double>& times,
                                        const std::vector<double>& values, double tFinal) {
  std::vector<MomentWindow> out;
  for (int w = 0; w < 4; ++w) {
    const double lo = tFinal * w / 4.0;
    const double hi = tFinal * (w + 1) / 4.0;
    std::size_t first = times.size(), last = times.size();
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] > lo + 1e-12 && times[i] <= hi + 1e-12) {
        if (first == times.size()) first = i;
        last = i + 1;
      }
    }
    if (last > first + 1) out.push_back({lo, hi, ols_slope(times, values, first, last)});
  }
  return out;
}

/// Per-start-point reduction shared by the moment and Feynman-Kac estimators:
/// log-sum-exp means over paths at each checkpoint plus bootstrap replicates
/// on the fit window.  `values` is checkpoint-major: values[k * nPaths + j].
struct GridReduction {
  std::size_t nInit = 0;
  Checkpoints ck;
  std::vector<double> lse;      // nInit x count
  std::vector<double> meanLog;  // nInit x count
  std::vector<double> boot;     // kBootstrapReps x nInit x fitCount

  GridReduction(std::size_t inits, const Checkpoints& checkpoints)
      : nInit(inits),
        ck(checkpoints),
        lse(inits * checkpoints.count(), 0.0),
        meanLog(inits * checkpoints.count(), 0.0),
        boot(static_cast<std::size_t>(kBootstrapReps) * inits * checkpoints.fitCount(), 0.0) {}

  void reduce(std::size_t init, const std::vector<double>& values, long nPaths,
              const std::vector<std::uint32_t>& bootIdx) {
    const std::size_t nCk = ck.count();
    const std::size_t nFit = ck.fitCount();
    const auto paths = static_cast<std::size_t>(nPaths);
    std::vector<double> scratch;
    for (std::size_t k = 0; k < nCk; ++k) {
      const double* row = values.data() + k * paths;
      lse[init * nCk + k] = log_mean_exp(row, paths, scratch);
      meanLog[init * nCk + k] = pairwise_mean(row, paths);
    }
    parallel_for(kBootstrapReps, [&](long b) {
      std::vector<double> resampled(paths), local;
      const std::uint32_t* idx = bootIdx.data() + static_cast<std::size_t>(b) * paths;
      for (std::size_t k = ck.fitBegin; k < nCk; ++k) {
        const double* row = values.data() + k * paths;
        for (std::size_t j = 0; j < paths; ++j) resampled[j] = row[idx[j]];
        boot[(static_cast<std::size_t>(b) * nInit + init) * nFit + (k - ck.fitBegin)] =
            log_mean_exp(resampled.data(), paths, local);
      }
    });
  }

  /// Combines the starting points (max = the sup over x), fits the tail slope
  /// and evaluates the bootstrap spread of that slope.
  void finish(double tFinal, double& slope, double& deviation,
              std::vector<MomentSeriesPoint>& series, std::vector<MomentWindow>& windows) const {
    const std::size_t nCk = ck.count();
    const std::size_t nFit = ck.fitCount();
    std::vector<double> logMax(nCk, -kInf), meanAll(nCk, 0.0);
    for (std::size_t k = 0; k < nCk; ++k) {
      std::vector<double> perInit(nInit);
      for (std::size_t i = 0; i < nInit; ++i) {
        logMax[k] = std::max(logMax[k], lse[i * nCk + k]);
        perInit[i] = meanLog[i * nCk + k];
      }
      meanAll[k] = pairwise_mean(perInit.data(), nInit);
    }
    slope = ols_slope(ck.times, logMax, ck.fitBegin, nCk);
    std::vector<double> bootSlopes(kBootstrapReps);
    std::vector<std::vector<double>> bootCurves(
        kBootstrapReps, std::vector<double>(nFit, -kInf));
    const std::vector<double> fitTimes(ck.times.begin() + static_cast<long>(ck.fitBegin),
                                       ck.times.end());
    for (int b = 0; b < kBootstrapReps; ++b) {
      auto& curve = bootCurves[b];
      for (std::size_t i = 0; i < nInit; ++i)
        for (std::size_t f = 0; f < nFit; ++f)
          curve[f] = std::max(curve[f],
                              boot[(static_cast<std::size_t>(b) * nInit + i) * nFit + f]);
      bootSlopes[b] = ols_slope(fitTimes, curve, 0, nFit);
    }
    deviation = sample_deviation(bootSlopes);
    series.resize(nCk);
    std::vector<double> spread(kBootstrapReps);
    for (std::size_t k = 0; k < nCk; ++k) {
      double dev = 0.0;
      if (k >= ck.fitBegin) {
        for (int b = 0; b < kBootstrapReps; ++b) spread[b] = bootCurves[b][k - ck.fitBegin];
        dev = sample_deviation(spread);
      }
      series[k] = {ck.times[k], meanAll[k], logMax[k], dev};
    }
    windows = window_slopes(ck.times, logMax, tFinal);
  }
};

std::vector<std::uint32_t> bootstrap_indices(std::uint64_t masterSeed, std::uint32_t init,
                                             long nPaths) {
  GaussianStream draws(masterSeed, make_stream(kStreamBootstrap, init, 0));
  std::vector<std::uint32_t> idx(static_cast<std::size_t>(kBootstrapReps) * nPaths);
  for (auto& v : idx)
    v = static_cast<std::uint32_t>(draws.uniformIndex(static_cast<std::uint64_t>(nPaths)));
  return idx;
}

}  // namespace

FlowScheme parse_scheme(const std::string& name) {
  if (name == "stratonovich-heun" || name == "heun") return FlowScheme::StratonovichHeun;
  if (name == "ito-drift-project" || name == "ito") return FlowScheme::ItoDriftProject;
  throw ConfigError("unknown scheme '" + name +
                    "' (options: stratonovich-heun | heun | ito-drift-project | ito)");
}

std::string scheme_name(FlowScheme scheme) {
  return scheme == FlowScheme::StratonovichHeun ? "stratonovich-heun" : "ito-drift-project";
}

std::vector<Eigen::VectorXd> tensor_init_grid(const ImmersionChart& chart, int pointsPerDim) {
  if (pointsPerDim < 1) throw ConfigError("init grid needs at least one point per dimension");
  if (pointsPerDim == 1) return {0.5 * (chart.domain().lo + chart.domain().hi)};
  const ParamGrid grid = make_grid(chart.domain(), pointsPerDim);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(grid.size()));
  for (long i = 0; i < grid.size(); ++i) out.push_back(grid.point(i));
  return out;
}

void validate_config(const FlowConfig& config, const ImmersionChart& chart) {
  if (!(config.dt > 0.0) || !std::isfinite(config.dt))
    throw ConfigError("flow config: dt must be positive");
  if (!(config.tFinal >= 10.0 * config.dt))
    throw ConfigError("flow config: tFinal must be at least 10 dt");
  if (config.nPaths < 1) throw ConfigError("flow config: nPaths must be at least 1");
  const auto& dom = chart.domain();
  for (const auto& u : config.initGrid) {
    if (u.size() != chart.n())
      throw ConfigError("flow config: initGrid point dimension mismatch");
    for (int d = 0; d < chart.n(); ++d) {
      if (dom.periodic[static_cast<std::size_t>(d)]) continue;
      if (u(d) < dom.lo(d) || u(d) > dom.hi(d))
        throw ConfigError("flow config: initGrid point outside the chart domain");
    }
  }
}

FlowState initial_state(const ImmersionChart& chart, const Eigen::VectorXd& u0) {
  Stepper stepper(chart, 1.0, FlowScheme::StratonovichHeun);
  return stepper.start(u0);
}

FlowState brownian_step(const FlowState& state, const Eigen::VectorXd& dB,
                        const ImmersionChart& chart, const FlowConfig& config) {
  Stepper stepper(chart, config.dt, config.scheme);
  stepper.sync(state);
  FlowState out = state;
  stepper.advance(out, dB, false);
  return out;
}

Eigen::MatrixXd derivative_step(const FlowState& state, const Eigen::VectorXd& dB,
                                const ImmersionChart& chart, const FlowConfig& config) {
  Stepper stepper(chart, config.dt, config.scheme);
  stepper.sync(state);
  FlowState out = state;
  stepper.advance(out, dB, true);
  return std::exp(out.jacLogScale - state.jacLogScale) * out.jac;
}

FlowState flow_step(const FlowState& state, const Eigen::VectorXd& dB,
                    const ImmersionChart& chart, const FlowConfig& config) {
  Stepper stepper(chart, config.dt, config.scheme);
  stepper.sync(state);
  FlowState out = state;
  stepper.advance(out, dB, true);
  return out;
}

LambdaNorm lambda_q_log_norm(const Eigen::MatrixXd& jac, int q, double logScale) {
  const int n = static_cast<int>(jac.rows());
  if (jac.cols() != n) throw std::domain_error("lambda_q_norm: square matrix required");
  if (q < 0 || q > n) throw std::domain_error("lambda_q_norm: need 0 <= q <= n");
  if (q == 0) return {0.0, 0.0};
  Eigen::JacobiSVD<MatrixXd> svd(jac);
  const VectorXd& sv = svd.singularValues();  // descending
  if (!(sv(0) > 0.0)) return {-kInf, -kInf};
  VectorXd lsv(n);
  for (int a = 0; a < n; ++a) lsv(a) = std::log(sv(a)) + logScale;
  double logOp = 0.0;
  for (int a = 0; a < q; ++a) logOp += lsv(a);
  // e_q of the squared singular values, factored by the top one for scale.
  const double top = lsv(0);
  std::vector<double> elem(static_cast<std::size_t>(q) + 1, 0.0);
  elem[0] = 1.0;
  for (int a = 0; a < n; ++a) {
    const double s2 = std::exp(2.0 * (lsv(a) - top));
    for (int j = std::min(q, a + 1); j >= 1; --j)
      elem[static_cast<std::size_t>(j)] += elem[static_cast<std::size_t>(j) - 1] * s2;
  }
  const double logHs = q * top + 0.5 * std::log(elem[static_cast<std::size_t>(q)]);
  return {logOp, logHs};
}

LambdaNorm lambda_q_norm(const Eigen::MatrixXd& jac, int q) {
  const LambdaNorm logs = lambda_q_log_norm(jac, q, 0.0);
  return {std::exp(logs.op), std::exp(logs.hs)};
}

std::vector<MomentEstimate> moment_exponents(const ImmersionChart& chart,
                                             const FlowConfig& config,
                                             const std::vector<std::pair<double, int>>& pqs) {
  validate_config(config, chart);
  const int n = chart.n();
  for (const auto& [p, q] : pqs) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw ConfigError("moment_exponent: p must be finite and nonnegative");
    if (q < 0 || q > n) throw ConfigError("moment_exponent: need 0 <= q <= n");
  }
  const auto grid = resolved_init_grid(config, chart);
  const long nSteps = step_count(config);
  const Checkpoints ck = make_checkpoints(nSteps, config.dt, config.tFinal);
  const std::size_t nCk = ck.count();
  const auto nPaths = static_cast<std::size_t>(config.nPaths);
  const double rt = std::sqrt(config.dt);

  std::vector<GridReduction> opRed(pqs.size(), GridReduction(grid.size(), ck));
  std::vector<GridReduction> hsRed(pqs.size(), GridReduction(grid.size(), ck));

  // Per-path log singular values of the (rescaled) jac at each checkpoint,
  // log scale folded in, descending order: table[(j * nCk + k) * n + a].
  std::vector<double> table(nPaths * nCk * static_cast<std::size_t>(n));
  std::vector<double> values(nCk * nPaths);
  for (std::size_t init = 0; init < grid.size(); ++init) {
    parallel_for(config.nPaths, [&](long j) {
      Stepper stepper(chart, config.dt, config.scheme);
      FlowState s = stepper.start(grid[init]);
      GaussianStream noise(config.masterSeed,
                           make_stream(kStreamMoment, static_cast<std::uint32_t>(init),
                                       static_cast<std::uint32_t>(j)));
      VectorXd dB(chart.m());
      std::size_t next = 0;
      for (long step = 1; step <= nSteps; ++step) {
        noise.fillGaussian(dB);
        dB *= rt;
        stepper.advance(s, dB, true);
        if (next < nCk && step == ck.steps[next]) {
          Eigen::JacobiSVD<MatrixXd> svd(s.jac);
          double* row = table.data() + (static_cast<std::size_t>(j) * nCk + next) *
                                           static_cast<std::size_t>(n);
          for (int a = 0; a < n; ++a)
            row[a] = std::log(svd.singularValues()(a)) + s.jacLogScale;
          ++next;
        }
      }
    });
    const auto bootIdx =
        bootstrap_indices(config.masterSeed, static_cast<std::uint32_t>(init), config.nPaths);
    for (std::size_t w = 0; w < pqs.size(); ++w) {
      const double p = pqs[w].first;
      const int q = pqs[w].second;
      // operator norm: sum of the top q log singular values
      for (std::size_t k = 0; k < nCk; ++k)
        for (std::size_t j = 0; j < nPaths; ++j) {
          const double* row =
              table.data() + (j * nCk + k) * static_cast<std::size_t>(n);
          double acc = 0.0;
          for (int a = 0; a < q; ++a) acc += row[a];
          values[k * nPaths + j] = p * acc;
        }
      opRed[w].reduce(init, values, config.nPaths, bootIdx);
      // Hilbert-Schmidt norm via the elementary symmetric sum
      for (std::size_t k = 0; k < nCk; ++k)
        for (std::size_t j = 0; j < nPaths; ++j) {
          const double* row =
              table.data() + (j * nCk + k) * static_cast<std::size_t>(n);
          double hs = 0.0;
          if (q > 0) {
            const double top = row[0];
            std::vector<double> elem(static_cast<std::size_t>(q) + 1, 0.0);
            elem[0] = 1.0;
            for (int a = 0; a < n; ++a) {
              const double s2 = std::exp(2.0 * (row[a] - top));
              for (int e = std::min(q, a + 1); e >= 1; --e)
                elem[static_cast<std::size_t>(e)] += elem[static_cast<std::size_t>(e) - 1] * s2;
            }
            hs = q * top + 0.5 * std::log(elem[static_cast<std::size_t>(q)]);
          }
          values[k * nPaths + j] = p * hs;
        }
      hsRed[w].reduce(init, values, config.nPaths, bootIdx);
    }
  }

  std::vector<MomentEstimate> out(pqs.size());
  for (std::size_t w = 0; w < pqs.size(); ++w) {
    MomentEstimate& est = out[w];
    est.p = pqs[w].first;
    est.q = pqs[w].second;
    std::vector<MomentWindow> hsWindows;
    std::vector<MomentSeriesPoint> hsSeries;
    opRed[w].finish(config.tFinal, est.muHat, est.standardError, est.series, est.windows);
    hsRed[w].finish(config.tFinal, est.muHatHs, est.standardErrorHs, hsSeries, hsWindows);
  }
  return out;
}

MomentEstimate moment_exponent(const ImmersionChart& chart, const FlowConfig& config, double p,
                               int q) {
  return moment_exponents(chart, config, {{p, q}}).front();
}

PathwiseIdentity pathwise_identity_check(const ImmersionChart& chart, const FlowConfig& config,
                                         double p, int q) {
  validate_config(config, chart);
  const int n = chart.n();
  if (q < 0 || q > n) throw ConfigError("pathwise_identity_check: need 0 <= q <= n");
  if (!(p >= 0.0)) throw ConfigError("pathwise_identity_check: p must be nonnegative");
  const auto grid = resolved_init_grid(config, chart);
  const long nSteps = step_count(config);
  const Checkpoints ck = make_checkpoints(nSteps, config.dt, config.tFinal);
  const long nPairs = (config.nPaths + 1) / 2;
  const double rt = std::sqrt(config.dt);

  const long tasks = static_cast<long>(grid.size()) * nPairs * 2;
  std::vector<double> pathMax(tasks, 0.0), finalSigned(tasks, 0.0);

  parallel_for(tasks, [&](long task) {
    const int sign = task % 2 == 0 ? 1 : -1;
    const long pair = (task / 2) % nPairs;
    const std::size_t init = static_cast<std::size_t>(task / (2 * nPairs));
    Stepper stepper(chart, config.dt, config.scheme);
    FlowState s = stepper.start(grid[init]);
    GaussianStream noise(config.masterSeed,
                         make_stream(kStreamIdentity, static_cast<std::uint32_t>(init),
                                     static_cast<std::uint32_t>(pair)));
    VectorXd dB(chart.m());

    const auto qVector = [&](double& norm) {
      const MatrixXd cols = (stepper.rot() * s.jac).leftCols(q);
      MultiVector<double> v = wedge(cols);
      norm = v.coords.norm() * std::exp(q * s.jacLogScale);
      if (v.coords.norm() > 0.0) v.coords /= v.coords.norm();
      return v;
    };
    const auto driftIntegrand = [&](const MultiVector<double>& vHat, double norm) {
      if (q == 0 || !(norm > 0.0)) return 0.0;
      return 0.5 * p * std::pow(norm, p) * hpq_quadratic(stepper.forms(), vHat, p);
    };

    double norm = 0.0;
    MultiVector<double> vHat = qVector(norm);
    double gPrev = driftIntegrand(vHat, norm);
    double stoch = 0.0, drift = 0.0, worst = 0.0;
    std::size_t next = 0;
    for (long step = 1; step <= nSteps; ++step) {
      noise.fillGaussian(dB);
      dB *= rt * sign;
      // left-point stochastic increment p |V|^{p-2} <V, dLambda^q(C) V>
      if (q > 0 && norm > 0.0) {
        const MatrixXd Ccan =
            shape_operator(stepper.forms(), stepper.canon().normal.transpose() * dB);
        const MatrixXd D = derivation_extend(Ccan, q);
        const double quad = vHat.coords.dot(D * vHat.coords) * norm * norm;
        stoch += p * std::pow(norm, p - 2.0) * quad;
      }
      stepper.advance(s, dB, true);
      vHat = qVector(norm);
      const double gNew = driftIntegrand(vHat, norm);
      drift += 0.5 * (gPrev + gNew) * config.dt;
      gPrev = gNew;
      if (next < ck.count() && step == ck.steps[next]) {
        const double vp = std::pow(norm, p);
        const double residual = (vp - 1.0) - (stoch + drift);
        const double rel = residual / (1.0 + vp);
        worst = std::max(worst, std::abs(rel));
        if (step == nSteps) finalSigned[task] = rel;
        ++next;
      }
    }
    pathMax[task] = worst;
  });

  PathwiseIdentity out;
  out.maxResidual = *std::max_element(pathMax.begin(), pathMax.end());
  out.meanResidual = pairwise_mean(pathMax.data(), pathMax.size());
  std::vector<double> pairAvg(static_cast<std::size_t>(tasks / 2));
  for (long pair = 0; pair < tasks / 2; ++pair)
    pairAvg[static_cast<std::size_t>(pair)] =
        std::abs(0.5 * (finalSigned[2 * pair] + finalSigned[2 * pair + 1]));
  out.antitheticResidual = pairwise_mean(pairAvg.data(), pairAvg.size());
  return out;
}

FeynmanKac feynman_kac(
    const ImmersionChart& chart,
    const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& h,
    const FlowConfig& config) {
  validate_config(config, chart);
  const auto grid = resolved_init_grid(config, chart);
  const long nSteps = step_count(config);
  const Checkpoints ck = make_checkpoints(nSteps, config.dt, config.tFinal);
  const std::size_t nCk = ck.count();
  const auto nPaths = static_cast<std::size_t>(config.nPaths);
  const double rt = std::sqrt(config.dt);

  GridReduction red(grid.size(), ck);
  std::vector<double> values(nCk * nPaths);
  std::size_t essInit = 0;
  double essBest = -kInf;
  std::vector<double> finalAcc(nPaths);
  std::vector<double> essFinal(nPaths);
  for (std::size_t init = 0; init < grid.size(); ++init) {
    parallel_for(config.nPaths, [&](long j) {
      Stepper stepper(chart, config.dt, config.scheme);
      FlowState s = stepper.start(grid[init]);
      GaussianStream noise(config.masterSeed,
                           make_stream(kStreamFeynmanKac, static_cast<std::uint32_t>(init),
                                       static_cast<std::uint32_t>(j)));
      VectorXd dB(chart.m());
      double acc = 0.0;
      double hPrev = h(s.u, s.x);
      std::size_t next = 0;
      for (long step = 1; step <= nSteps; ++step) {
        noise.fillGaussian(dB);
        dB *= rt;
        stepper.advance(s, dB, false);
        const double hCur = h(s.u, s.x);
        acc += 0.5 * (hPrev + hCur) * config.dt;
        hPrev = hCur;
        if (next < nCk && step == ck.steps[next]) {
          values[next * nPaths + static_cast<std::size_t>(j)] = acc;
          ++next;
        }
      }
      finalAcc[static_cast<std::size_t>(j)] = acc;
    });
    const auto bootIdx =
        bootstrap_indices(config.masterSeed, static_cast<std::uint32_t>(init), config.nPaths);
    red.reduce(init, values, config.nPaths, bootIdx);
    if (red.lse[init * nCk + (nCk - 1)] > essBest) {
      essBest = red.lse[init * nCk + (nCk - 1)];
      essInit = init;
      essFinal = finalAcc;
    }
  }

  FeynmanKac out;
  std::vector<MomentWindow> windows;
  red.finish(config.tFinal, out.estimate, out.standardError, out.series, windows);
  out.lambdaHat = -2.0 * out.estimate;

  // effective sample size on the ensemble that achieves the final max
  (void)essInit;
  double top = -kInf;
  for (double a : essFinal) top = std::max(top, a);
  std::vector<double> wts(nPaths), wts2(nPaths);
  for (std::size_t j = 0; j < nPaths; ++j) {
    wts[j] = std::exp(essFinal[j] - top);
    wts2[j] = wts[j] * wts[j];
  }
  const double sw = pairwise_sum(wts.data(), nPaths);
  const double sw2 = pairwise_sum(wts2.data(), nPaths);
  out.ess = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
  out.lowEss = out.ess < 0.1 * static_cast<double>(config.nPaths);
  return out;
}

FeynmanKac feynman_kac(const ImmersionChart& chart, const PotentialField& h,
                       const FlowConfig& config) {
  Eigen::Index argmax = 0;
  h.values.maxCoeff(&argmax);
  FlowConfig started = config;
  started.initGrid = {h.grid.point(static_cast<long>(argmax))};
  return feynman_kac(
      chart, [&h](const Eigen::VectorXd& u, const Eigen::VectorXd&) { return h(u); }, started);
}

VolumeCheck volume_identity(const ImmersionChart& chart, const ParamGrid& grid,
                            const FlowConfig& config) {
  FlowConfig probe = config;
  probe.initGrid.clear();
  probe.initGrid.push_back(grid.point(0L));
  validate_config(probe, chart);
  const long nSteps = step_count(config);
  const double rt = std::sqrt(config.dt);
  const int n = chart.n();
  const int m = chart.m();

  VolumeCheck out;
  const VectorXd weights = metric_weights(chart, grid);
  out.exactVolume = weights.sum();
  out.flowVolumes.resize(config.nPaths);

  std::vector<double> contributions(static_cast<std::size_t>(grid.size()));
  MatrixXd increments(m, nSteps);
  for (long path = 0; path < config.nPaths; ++path) {
    GaussianStream noise(config.masterSeed,
                         make_stream(kStreamVolume, 0, static_cast<std::uint32_t>(path)));
    for (long step = 0; step < nSteps; ++step) {
      noise.fillGaussian(increments.col(step));
      increments.col(step) *= rt;
    }
    parallel_for(grid.size(), [&](long i) {
      Stepper stepper(chart, config.dt, config.scheme);
      FlowState s = stepper.start(grid.point(i));
      for (long step = 0; step < nSteps; ++step) stepper.advance(s, increments.col(step), true);
      contributions[static_cast<std::size_t>(i)] =
          weights(i) * std::exp(n * s.jacLogScale) * s.jac.determinant();
    });
    out.flowVolumes(path) = pairwise_sum(contributions.data(), contributions.size());
    out.maxRelError = std::max(
        out.maxRelError, std::abs(out.flowVolumes(path) - out.exactVolume) / out.exactVolume);
  }
  return out;
}

}  // namespace curvflow
