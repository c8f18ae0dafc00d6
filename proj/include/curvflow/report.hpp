#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "curvflow/flow.hpp"

namespace curvflow {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct ReportOptions {
  std::vector<int> qs;         // homology degrees; empty = 1..n
  std::vector<double> ps;      // moment orders; empty = {1}
  int gridPoints = 0;          // quadrature/spectral points per axis; 0 = dimension default
  bool simulate = false;       // run the Monte Carlo moment stage
  FlowConfig flow;             // simulation parameters (initGrid resolved if empty)
  int initPointsPerDim = 1;    // default flow start grid when flow.initGrid is empty
  bool keepPartial = false;    // record a simulation-stage failure instead of rethrowing
};

/// Criteria document for one manifold: per-degree potentials, operator
/// margins, optional Monte Carlo exponents, and the vanishing verdicts they
/// support.  The tree is deterministic for a fixed (config, options) pair;
/// every verdict requires its margin to clear the stated tolerance, and
/// pointwise criteria additionally need one grid point 10x above it.
struct VanishingReport {
  nlohmann::ordered_json doc;
  bool complete = true;
};

VanishingReport build_report(const nlohmann::json& config, const ReportOptions& options);

/// Canonical serializations; byte-stable for fixed inputs.
std::string report_json(const VanishingReport& report);
std::string report_csv(const VanishingReport& report);

/// Command-line entry: catalog | analyze | simulate | spectrum | report.
/// Returns 0 on success, 2 on configuration/usage errors, 3 on numerical
/// failure (including a simulated exponent violating its spectral bound).
int run_cli(int argc, char** argv);

}  // namespace curvflow
