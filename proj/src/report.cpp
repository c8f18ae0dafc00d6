#include "curvflow/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "curvflow/catalog.hpp"
#include "curvflow/field.hpp"
#include "curvflow/spectral.hpp"
#include "curvflow/weitzenbock.hpp"

namespace curvflow {

namespace {

using nlohmann::ordered_json;

// Rethrow with the failing stage recorded, preserving the error category
// (ConfigError -> exit 2, NumericError -> exit 3 at the CLI boundary).
template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("stage ") + name + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(std::string("stage ") + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
  }
}

constexpr const char* kSpectralRule = "1e-6 * max(1, sup|potential|)";
constexpr const char* kPointwiseRule =
    "margin >= -tol on the whole grid and > 10*tol at some grid point";

struct PointwiseVerdict {
  double minMargin = 0.0;
  double maxMargin = 0.0;
  double tolerance = 0.0;
  bool satisfied = false;
};

// Grid version of the paper-style ">= 0 everywhere, > 0 somewhere" criteria:
// no sampled violation beyond tolerance, and one strict point well above it.
PointwiseVerdict pointwise_verdict(const PotentialField& margin) {
  PointwiseVerdict v;
  v.minMargin = margin.minValue();
  v.maxMargin = margin.maxValue();
  const double scale = std::max(std::abs(v.minMargin), std::abs(v.maxMargin));
  v.tolerance = 1e-6 * std::max(1.0, scale);
  v.satisfied = v.minMargin >= -v.tolerance && v.maxMargin > 10.0 * v.tolerance;
  return v;
}

ordered_json pointwise_json(const PointwiseVerdict& v) {
  ordered_json j;
  j["minMargin"] = v.minMargin;
  j["maxMargin"] = v.maxMargin;
  j["tolerance"] = v.tolerance;
  j["satisfied"] = v.satisfied;
  return j;
}

struct SpectralEntry {
  double lambdaMin = 0.0;
  double residual = 0.0;
  bool converged = false;
};

struct SpectralVerdict {
  double margin = 0.0;
  double tolerance = 0.0;
  bool converged = false;
  bool satisfied = false;
};

struct RowData {
  int q = 0;
  double rhat0Min = 0.0;
  std::map<double, PotentialField> hpqFields;  // key: p
  std::map<double, SpectralEntry> lambdas;
  SpectralVerdict spectral;     // Delta - 2 h_1^q, from the p = 1 eigensolve
  PositivityVerdict gap;        // Delta + (rhat0 - ||alpha||^2/2 + (n/2)|H|^2)
  double gapNegativePart = 0.0;
  bool hasSphere = false;
  PointwiseVerdict sphere;
  bool hasMinimal = false;
  PointwiseVerdict minimal;
  bool homologyZero = false;
  std::string route;
};

std::vector<int> resolve_qs(const std::vector<int>& requested, int n) {
  std::vector<int> qs = requested;
  if (qs.empty())
    for (int q = 1; q <= n; ++q) qs.push_back(q);
  std::sort(qs.begin(), qs.end());
  qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
  for (int q : qs)
    if (q < 1 || q > n)
      throw ConfigError("report: q must lie in 1.." + std::to_string(n) + ", got " +
                        std::to_string(q));
  return qs;
}

std::vector<double> resolve_ps(const std::vector<double>& requested) {
  std::vector<double> ps = requested;
  if (ps.empty()) ps.push_back(1.0);
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  for (double p : ps)
    if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("report: p must be finite and >= 0");
  return ps;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_number(const ordered_json& value) {
  if (value.is_null()) return {};
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  if (value.is_string()) return csv_quote(value.get<std::string>());
  return value.dump();
}

}  // namespace

VanishingReport build_report(const nlohmann::json& config, const ReportOptions& options) {
  VanishingReport report;
  ordered_json& doc = report.doc;

  const ManifoldTarget target = stage("config", [&] { return target_from_config(config); });
  const ImmersionChart& chart = target.chart;
  const int n = chart.n();
  const std::vector<int> qs = stage("config", [&] { return resolve_qs(options.qs, n); });
  const std::vector<double> requestedPs = stage("config", [&] { return resolve_ps(options.ps); });
  std::vector<double> computedPs = requestedPs;  // p = 1 drives the homology criterion
  if (!std::binary_search(computedPs.begin(), computedPs.end(), 1.0)) {
    computedPs.push_back(1.0);
    std::sort(computedPs.begin(), computedPs.end());
  }
  const int gridN = options.gridPoints > 0 ? options.gridPoints : default_spectral_points(n);

  ParamGrid grid;
  Eigen::VectorXd weights;
  stage("geometry", [&] {
    grid = make_grid(chart.domain(), gridN);
    weights = metric_weights(chart, grid);
    return 0;
  });

  doc["schemaVersion"] = kReportSchemaVersion;
  doc["generator"] = std::string("curvflow ") + kToolVersion;
  doc["caveat"] = "numerical evidence, grid-resolution-limited";

  ordered_json manifold;
  manifold["description"] = chart.describe();
  manifold["dim"] = n;
  manifold["ambientDim"] = chart.m();
  manifold["volume"] = weights.sum();
  manifold["sphereImmersed"] = (target.inSphere != nullptr);
  manifold["minimalInSphere"] = false;  // refined below
  manifold["config"] = target.configEcho;

  // Per-degree potentials, operator margins, pointwise sphere criteria.
  std::vector<RowData> rows;
  bool minimalAllQ = (target.inSphere != nullptr);
  for (int q : qs) {
    RowData row;
    row.q = q;
    stage("potentials", [&] {
      row.rhat0Min = rhat0_field(chart, grid, q).minValue();
      for (double p : computedPs) row.hpqFields.emplace(p, hpq_field(chart, grid, p, q));
      return 0;
    });
    stage("spectral", [&] {
      for (const auto& [p, field] : row.hpqFields) {
        const EigenPair pair = schrodinger_lambda_min(chart, field, grid);
        row.lambdas[p] = {pair.value, pair.residual, pair.converged};
      }
      const SpectralEntry& base = row.lambdas.at(1.0);
      const PotentialField& h1 = row.hpqFields.at(1.0);
      const double supV = 2.0 * std::max(std::abs(h1.minValue()), std::abs(h1.maxValue()));
      row.spectral.margin = base.lambdaMin;
      row.spectral.tolerance = 1e-6 * std::max(1.0, supV);
      row.spectral.converged = base.converged;
      row.spectral.satisfied = base.converged && base.lambdaMin > row.spectral.tolerance;
      const PotentialField gapField = weitzenbock_gap_field(chart, grid, q);
      row.gap = positivity_verdict(chart, gapField, grid);
      row.gapNegativePart = negative_part_norm(gapField, 0.0, std::max(1.0, n / 2.0));
      return 0;
    });
    if (target.inSphere) {
      stage("potentials", [&] {
        row.hasSphere = true;
        row.sphere = pointwise_verdict(sphere_homology_field(target, grid, q));
        try {
          row.minimal = pointwise_verdict(minimal_sphere_field(target, grid, q));
          row.hasMinimal = true;
        } catch (const std::domain_error&) {
          minimalAllQ = false;  // not minimal in the sphere: criterion not applicable
        }
        return 0;
      });
    }
    rows.push_back(std::move(row));
  }
  manifold["minimalInSphere"] = minimalAllQ && target.inSphere != nullptr && !rows.empty();
  doc["manifold"] = manifold;

  // Monte Carlo stage: one batch shares the path ensemble across all (p, q).
  std::map<std::pair<double, int>, MomentEstimate> simulated;
  ordered_json stageErrors = ordered_json::array();
  FlowConfig flowCfg = options.flow;
  if (options.simulate) {
    try {
      stage("simulation", [&] {
        if (flowCfg.initGrid.empty())
          flowCfg.initGrid = tensor_init_grid(chart, options.initPointsPerDim);
        validate_config(flowCfg, chart);
        std::vector<std::pair<double, int>> pairs;
        for (int q : qs)
          for (double p : requestedPs) pairs.emplace_back(p, q);
        for (MomentEstimate& est : moment_exponents(chart, flowCfg, pairs))
          simulated.emplace(std::make_pair(est.p, est.q), std::move(est));
        return 0;
      });
    } catch (const std::exception& e) {
      if (!options.keepPartial) throw;
      stageErrors.push_back(e.what());
      report.complete = false;
      simulated.clear();
    }
  }

  // Thm-style coherence: a simulated exponent must respect its spectral bound
  // whenever the eigenvalue converged.
  for (const RowData& row : rows) {
    for (const auto& [key, est] : simulated) {
      if (key.second != row.q) continue;
      const auto it = row.lambdas.find(key.first);
      if (it == row.lambdas.end() || !it->second.converged) continue;
      const double bound = -0.5 * it->second.lambdaMin + 3.0 * est.standardError;
      if (est.muHat > bound) {
        std::ostringstream msg;
        msg << "stage simulation: moment exponent p=" << key.first << " q=" << key.second
            << " (muHat=" << est.muHat << ") exceeds the spectral bound " << bound
            << "; refine dt or increase paths";
        throw NumericError(msg.str());
      }
    }
  }

  // Verdict composition: strict margins only, then Hodge partners.
  for (RowData& row : rows) {
    if (row.q >= n) continue;  // top homology of a closed oriented manifold never vanishes
    if (row.spectral.satisfied)
      row.route = "spectral";
    else if (row.gap.positive)
      row.route = "weitzenbockGap";
    else if (row.hasSphere && row.sphere.satisfied)
      row.route = "sphereHomology";
    else if (row.hasMinimal && row.minimal.satisfied)
      row.route = "minimalSphere";
    row.homologyZero = !row.route.empty();
  }
  for (RowData& row : rows) {
    if (row.homologyZero || row.q >= n) continue;
    const int partner = n - row.q;
    if (partner < 1 || partner >= n) continue;
    for (const RowData& other : rows)
      if (other.q == partner && !other.route.empty() && other.route != "hodgePartner") {
        row.homologyZero = true;
        row.route = "hodgePartner";
        break;
      }
  }

  ordered_json rowsJson = ordered_json::array();
  for (const RowData& row : rows) {
    ordered_json r;
    r["q"] = row.q;
    r["rhat0Min"] = row.rhat0Min;
    ordered_json pots = ordered_json::array();
    for (const auto& [p, field] : row.hpqFields) {
      ordered_json entry;
      entry["p"] = p;
      entry["min"] = field.minValue();
      entry["max"] = field.maxValue();
      const SpectralEntry& se = row.lambdas.at(p);
      entry["lambdaMin"] = se.lambdaMin;
      entry["residual"] = se.residual;
      entry["spectralConverged"] = se.converged;
      const auto sim = simulated.find(std::make_pair(p, row.q));
      if (sim != simulated.end()) {
        const MomentEstimate& est = sim->second;
        entry["muHat"] = est.muHat;
        entry["standardError"] = est.standardError;
        entry["muHatHs"] = est.muHatHs;
        entry["standardErrorHs"] = est.standardErrorHs;
        entry["spectralBound"] = -0.5 * se.lambdaMin;
        if (se.converged) {
          entry["boundSlack"] = (-0.5 * se.lambdaMin + 3.0 * est.standardError) - est.muHat;
          entry["boundSatisfied"] = true;  // a violation would have aborted above
        }
        ordered_json windows = ordered_json::array();
        for (const MomentWindow& w : est.windows) {
          ordered_json wj;
          wj["t0"] = w.t0;
          wj["t1"] = w.t1;
          wj["slope"] = w.slope;
          windows.push_back(wj);
        }
        entry["windows"] = windows;
      }
      pots.push_back(entry);
    }
    r["potentials"] = pots;

    ordered_json criteria;
    ordered_json spectral;
    spectral["margin"] = row.spectral.margin;
    spectral["tolerance"] = row.spectral.tolerance;
    spectral["converged"] = row.spectral.converged;
    spectral["satisfied"] = row.spectral.satisfied;
    criteria["spectral"] = spectral;
    ordered_json gap;
    gap["margin"] = row.gap.lambdaMin;
    gap["tolerance"] = row.gap.tolerance;
    gap["converged"] = row.gap.detail.converged;
    gap["satisfied"] = row.gap.positive;
    gap["negativePartNorm"] = row.gapNegativePart;  // informational, never a verdict
    criteria["weitzenbockGap"] = gap;
    if (row.hasSphere) criteria["sphereHomology"] = pointwise_json(row.sphere);
    if (row.hasMinimal) criteria["minimalSphere"] = pointwise_json(row.minimal);
    r["criteria"] = criteria;
    r["homologyZero"] = row.homologyZero;
    r["homologyRoute"] = row.route;
    rowsJson.push_back(r);
  }
  doc["rows"] = rowsJson;

  // Global conclusions.
  const auto rowOf = [&](int q) -> const RowData* {
    for (const RowData& row : rows)
      if (row.q == q) return &row;
    return nullptr;
  };
  const RowData* q1 = rowOf(1);
  const RowData* q2 = rowOf(2);
  const bool pi1Zero = q1 != nullptr && q1->spectral.satisfied;
  const bool pi2Zero = q2 != nullptr && q2->spectral.satisfied;
  bool homotopySphere = pi1Zero;
  for (int q = 1; q <= (n + 1) / 2 && homotopySphere; ++q) {
    const RowData* row = rowOf(q);
    homotopySphere = row != nullptr && (row->homologyZero || q == n);
  }
  const PointwiseVerdict harmonic = stage("spectral", [&] {
    return pointwise_verdict(harmonic_stability_field(chart, grid));
  });

  ordered_json conclusions;
  conclusions["pi1Zero"] = pi1Zero;
  conclusions["pi2Zero"] = pi2Zero;
  conclusions["homotopySphere"] = homotopySphere;
  conclusions["noStableHarmonicMaps"] = harmonic.satisfied;
  conclusions["harmonicStability"] = pointwise_json(harmonic);
  doc["conclusions"] = conclusions;

  ordered_json provenance;
  provenance["requestedQ"] = qs;
  provenance["requestedP"] = requestedPs;
  provenance["gridShape"] = grid.shape;
  provenance["frameSeed"] = 0;
  provenance["spectralToleranceRule"] = kSpectralRule;
  provenance["pointwiseRule"] = kPointwiseRule;
  if (options.simulate) {
    ordered_json sim;
    sim["masterSeed"] = flowCfg.masterSeed;
    sim["nPaths"] = flowCfg.nPaths;
    sim["dt"] = flowCfg.dt;
    sim["tFinal"] = flowCfg.tFinal;
    sim["scheme"] = scheme_name(flowCfg.scheme);
    sim["startPoints"] = flowCfg.initGrid.size();
    provenance["simulation"] = sim;
  } else {
    provenance["simulation"] = nullptr;
  }
  doc["provenance"] = provenance;
  doc["stageErrors"] = stageErrors;
  doc["complete"] = report.complete;
  return report;
}

std::string report_json(const VanishingReport& report) { return report.doc.dump(2) + "\n"; }

std::string report_csv(const VanishingReport& report) {
  const ordered_json& doc = report.doc;
  std::ostringstream out;
  out << "description,q,p,potentialMin,potentialMax,lambdaMin,spectralConverged,rhat0Min,"
         "spectralMargin,spectralSatisfied,gapMargin,gapNegativePartNorm,gapSatisfied,"
         "sphereHomologyMin,sphereHomologyMax,sphereHomologySatisfied,"
         "minimalSphereMin,minimalSphereMax,minimalSphereSatisfied,"
         "muHat,muHatStandardError,muHatHs,muHatHsStandardError,spectralBound,boundSatisfied,"
         "homologyZero,homologyRoute,pi1Zero,pi2Zero,homotopySphere,noStableHarmonicMaps\n";
  const std::string desc = csv_quote(doc["manifold"]["description"].get<std::string>());
  const ordered_json& conc = doc["conclusions"];
  for (const ordered_json& row : doc["rows"]) {
    const ordered_json& crit = row["criteria"];
    for (const ordered_json& entry : row["potentials"]) {
      const auto field = [&](const ordered_json& obj, const char* key) -> std::string {
        if (!obj.contains(key)) return {};
        return csv_number(obj[key]);
      };
      out << desc << ',' << row["q"] << ',' << entry["p"].dump() << ','
          << entry["min"].dump() << ',' << entry["max"].dump() << ','
          << entry["lambdaMin"].dump() << ',' << csv_number(entry["spectralConverged"]) << ','
          << row["rhat0Min"].dump() << ',' << crit["spectral"]["margin"].dump() << ','
          << csv_number(crit["spectral"]["satisfied"]) << ','
          << crit["weitzenbockGap"]["margin"].dump() << ','
          << crit["weitzenbockGap"]["negativePartNorm"].dump() << ','
          << csv_number(crit["weitzenbockGap"]["satisfied"]) << ','
          << (crit.contains("sphereHomology") ? crit["sphereHomology"]["minMargin"].dump() : "")
          << ','
          << (crit.contains("sphereHomology") ? crit["sphereHomology"]["maxMargin"].dump() : "")
          << ','
          << (crit.contains("sphereHomology") ? csv_number(crit["sphereHomology"]["satisfied"])
                                              : "")
          << ','
          << (crit.contains("minimalSphere") ? crit["minimalSphere"]["minMargin"].dump() : "")
          << ','
          << (crit.contains("minimalSphere") ? crit["minimalSphere"]["maxMargin"].dump() : "")
          << ','
          << (crit.contains("minimalSphere") ? csv_number(crit["minimalSphere"]["satisfied"])
                                             : "")
          << ',' << field(entry, "muHat") << ',' << field(entry, "standardError") << ','
          << field(entry, "muHatHs") << ',' << field(entry, "standardErrorHs") << ','
          << field(entry, "spectralBound") << ',' << field(entry, "boundSatisfied") << ','
          << csv_number(row["homologyZero"]) << ',' << csv_quote(row["homologyRoute"]) << ','
          << csv_number(conc["pi1Zero"]) << ',' << csv_number(conc["pi2Zero"]) << ','
          << csv_number(conc["homotopySphere"]) << ','
          << csv_number(conc["noStableHarmonicMaps"]) << '\n';
    }
  }
  return out.str();
}

}  // namespace curvflow
