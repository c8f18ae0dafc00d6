#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "curvflow/catalog.hpp"
#include "curvflow/field.hpp"
#include "curvflow/flow.hpp"
#include "curvflow/report.hpp"
#include "curvflow/spectral.hpp"
#include "curvflow/weitzenbock.hpp"

namespace curvflow {

namespace {

using nlohmann::ordered_json;

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

void write_output(const std::string& text, const std::string& outPath) {
  if (outPath.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(outPath, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + outPath + "'");
  out << text;
}

// Flags shared by the config-driven subcommands; each subcommand registers
// only the subset it understands.
struct Flags {
  std::string configPath;
  std::string outPath;
  std::string format = "json";
  std::vector<int> qs;
  std::vector<double> ps;
  int gridPoints = 0;
  long nPaths = 100;
  double dt = 1e-3;
  double tFinal = 1.0;
  std::uint64_t seed = 0;
  std::string scheme = "stratonovich-heun";
  int initPointsPerDim = 1;
  bool keepPartial = false;
};

void add_config_flag(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.configPath, "manifold config JSON file")->required();
}

void add_output_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--out", f.outPath, "write to this file instead of stdout");
  cmd.add_option("--format", f.format, "output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
}

void add_degree_flags(CLI::App& cmd, Flags& f, const char* qHelp, const char* pHelp) {
  cmd.add_option("--q", f.qs, qHelp)->delimiter(',');
  cmd.add_option("--p", f.ps, pHelp)->delimiter(',');
}

void add_flow_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--paths", f.nPaths, "simulated paths per start point")->capture_default_str();
  cmd.add_option("--dt", f.dt, "time step")->capture_default_str();
  cmd.add_option("--t-final", f.tFinal, "simulation horizon")->capture_default_str();
  cmd.add_option("--seed", f.seed, "master seed for the path ensemble")->capture_default_str();
  cmd.add_option("--scheme", f.scheme,
                 "integration scheme: stratonovich-heun | heun | ito-drift-project | ito")
      ->capture_default_str();
  cmd.add_option("--init-grid", f.initPointsPerDim,
                 "start points per parameter dimension (tensor grid)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

FlowConfig flow_config(const Flags& f) {
  FlowConfig fc;
  fc.dt = f.dt;
  fc.tFinal = f.tFinal;
  fc.nPaths = f.nPaths;
  fc.masterSeed = f.seed;
  fc.scheme = parse_scheme(f.scheme);
  return fc;
}

int run_catalog(const Flags& f) {
  const std::vector<CatalogEntry>& entries = catalog();
  std::string text;
  if (f.format == "json") {
    ordered_json doc = ordered_json::array();
    for (const CatalogEntry& e : entries) {
      ordered_json j;
      j["kind"] = e.kind;
      j["summary"] = e.summary;
      doc.push_back(j);
    }
    text = doc.dump(2) + "\n";
  } else if (f.format == "csv") {
    text = "kind,summary\n";
    for (const CatalogEntry& e : entries) text += e.kind + ",\"" + e.summary + "\"\n";
  } else {
    std::size_t width = 0;
    for (const CatalogEntry& e : entries) width = std::max(width, e.kind.size());
    for (const CatalogEntry& e : entries)
      text += e.kind + std::string(width + 2 - e.kind.size(), ' ') + e.summary + "\n";
  }
  write_output(text, f.outPath);
  return 0;
}

int run_report(const Flags& f, bool simulate) {
  ReportOptions opts;
  opts.qs = f.qs;
  opts.ps = f.ps;
  opts.gridPoints = f.gridPoints;
  opts.simulate = simulate;
  opts.flow = flow_config(f);
  opts.initPointsPerDim = f.initPointsPerDim;
  opts.keepPartial = f.keepPartial;
  const VanishingReport report = build_report(load_config(f.configPath), opts);
  write_output(f.format == "csv" ? report_csv(report) : report_json(report), f.outPath);
  return 0;
}

int run_simulate(const Flags& f) {
  const ManifoldTarget target = target_from_config(load_config(f.configPath));
  FlowConfig fc = flow_config(f);
  fc.initGrid = tensor_init_grid(target.chart, f.initPointsPerDim);
  validate_config(fc, target.chart);
  std::vector<int> qs = f.qs.empty() ? std::vector<int>{1} : f.qs;
  std::vector<double> ps = f.ps.empty() ? std::vector<double>{1.0} : f.ps;
  std::vector<std::pair<double, int>> pairs;
  for (int q : qs)
    for (double p : ps) pairs.emplace_back(p, q);
  const std::vector<MomentEstimate> estimates = moment_exponents(target.chart, fc, pairs);

  std::string text;
  if (f.format == "csv") {
    std::ostringstream out;
    out << "p,q,muHat,standardError,muHatHs,standardErrorHs\n";
    for (const MomentEstimate& est : estimates)
      out << ordered_json(est.p).dump() << ',' << est.q << ',' << ordered_json(est.muHat).dump()
          << ',' << ordered_json(est.standardError).dump() << ','
          << ordered_json(est.muHatHs).dump() << ',' << ordered_json(est.standardErrorHs).dump()
          << '\n';
    text = out.str();
  } else {
    ordered_json doc;
    doc["manifold"] = target.chart.describe();
    ordered_json sim;
    sim["masterSeed"] = fc.masterSeed;
    sim["nPaths"] = fc.nPaths;
    sim["dt"] = fc.dt;
    sim["tFinal"] = fc.tFinal;
    sim["scheme"] = scheme_name(fc.scheme);
    sim["startPoints"] = fc.initGrid.size();
    doc["simulation"] = sim;
    ordered_json rows = ordered_json::array();
    for (const MomentEstimate& est : estimates) {
      ordered_json r;
      r["p"] = est.p;
      r["q"] = est.q;
      r["muHat"] = est.muHat;
      r["standardError"] = est.standardError;
      r["muHatHs"] = est.muHatHs;
      r["standardErrorHs"] = est.standardErrorHs;
      ordered_json windows = ordered_json::array();
      for (const MomentWindow& w : est.windows) {
        ordered_json wj;
        wj["t0"] = w.t0;
        wj["t1"] = w.t1;
        wj["slope"] = w.slope;
        windows.push_back(wj);
      }
      r["windows"] = windows;
      ordered_json series = ordered_json::array();
      for (const MomentSeriesPoint& pt : est.series) {
        ordered_json sj;
        sj["t"] = pt.t;
        sj["meanLog"] = pt.meanLog;
        sj["logMax"] = pt.logMax;
        sj["deviation"] = pt.deviation;
        series.push_back(sj);
      }
      r["series"] = series;
      rows.push_back(r);
    }
    doc["estimates"] = rows;
    text = doc.dump(2) + "\n";
  }
  write_output(text, f.outPath);
  return 0;
}

int run_spectrum(const Flags& f) {
  const ManifoldTarget target = target_from_config(load_config(f.configPath));
  const ImmersionChart& chart = target.chart;
  const int n = chart.n();
  const int gridN = f.gridPoints > 0 ? f.gridPoints : default_spectral_points(n);
  const ParamGrid grid = make_grid(chart.domain(), gridN);
  const DiscreteOperator op = laplacian_matrix(chart, grid);
  const std::vector<EigenPair> laplacian = eigs_smallest(op, Eigen::VectorXd(), 4);

  std::vector<int> qs = f.qs.empty() ? std::vector<int>{1} : f.qs;
  std::vector<double> ps = f.ps.empty() ? std::vector<double>{1.0} : f.ps;
  struct SchroedingerRow {
    int q;
    double p;
    double potMin, potMax;
    EigenPair pair;
  };
  std::vector<SchroedingerRow> rows;
  for (int q : qs) {
    if (q < 1 || q > n)
      throw ConfigError("spectrum: q must lie in 1.." + std::to_string(n) + ", got " +
                        std::to_string(q));
    for (double p : ps) {
      const PotentialField h = hpq_field(chart, grid, p, q);
      rows.push_back({q, p, h.minValue(), h.maxValue(), schrodinger_lambda_min(chart, h, grid)});
    }
  }

  std::string text;
  if (f.format == "csv") {
    std::ostringstream out;
    out << "q,p,potentialMin,potentialMax,lambdaMin,residual,converged\n";
    for (const SchroedingerRow& r : rows)
      out << r.q << ',' << ordered_json(r.p).dump() << ',' << ordered_json(r.potMin).dump()
          << ',' << ordered_json(r.potMax).dump() << ',' << ordered_json(r.pair.value).dump()
          << ',' << ordered_json(r.pair.residual).dump() << ','
          << (r.pair.converged ? "true" : "false") << '\n';
    text = out.str();
  } else {
    ordered_json doc;
    doc["manifold"] = chart.describe();
    doc["gridShape"] = grid.shape;
    ordered_json lap = ordered_json::array();
    for (const EigenPair& pair : laplacian) {
      ordered_json j;
      j["value"] = pair.value;
      j["residual"] = pair.residual;
      j["converged"] = pair.converged;
      lap.push_back(j);
    }
    doc["laplacian"] = lap;
    ordered_json sch = ordered_json::array();
    for (const SchroedingerRow& r : rows) {
      ordered_json j;
      j["q"] = r.q;
      j["p"] = r.p;
      j["potentialMin"] = r.potMin;
      j["potentialMax"] = r.potMax;
      j["lambdaMin"] = r.pair.value;
      j["residual"] = r.pair.residual;
      j["converged"] = r.pair.converged;
      sch.push_back(j);
    }
    doc["schroedinger"] = sch;
    text = doc.dump(2) + "\n";
  }
  write_output(text, f.outPath);
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"extrinsic curvature potentials and stochastic moment exponents\n"
               "for cataloged isometric immersions"};
  app.require_subcommand(1);

  Flags f;
  CLI::App* catalogCmd = app.add_subcommand("catalog", "list the built-in manifold families");
  f.format = "text";
  catalogCmd->add_option("--format", f.format, "output format")
      ->check(CLI::IsMember({"text", "json", "csv"}))
      ->capture_default_str();
  catalogCmd->add_option("--out", f.outPath, "write to this file instead of stdout");

  Flags fa;
  CLI::App* analyzeCmd =
      app.add_subcommand("analyze", "vanishing report from potentials and spectra (no paths)");
  add_config_flag(*analyzeCmd, fa);
  add_degree_flags(*analyzeCmd, fa, "form degrees (default: 1..n)", "moment orders (default: 1)");
  analyzeCmd->add_option("--grid", fa.gridPoints, "grid points per axis (0 = dimension default)")
      ->capture_default_str();
  add_output_flags(*analyzeCmd, fa);

  Flags fr;
  CLI::App* reportCmd = app.add_subcommand(
      "report", "full vanishing report with a moment-exponent simulation attached");
  add_config_flag(*reportCmd, fr);
  add_degree_flags(*reportCmd, fr, "form degrees (default: 1..n)", "moment orders (default: 1)");
  reportCmd->add_option("--grid", fr.gridPoints, "grid points per axis (0 = dimension default)")
      ->capture_default_str();
  add_flow_flags(*reportCmd, fr);
  reportCmd->add_flag("--keep-partial", fr.keepPartial,
                      "on simulation failure emit the spectral part, marked incomplete");
  add_output_flags(*reportCmd, fr);

  Flags fs;
  CLI::App* simulateCmd =
      app.add_subcommand("simulate", "moment exponents of the derivative flow along paths");
  add_config_flag(*simulateCmd, fs);
  add_degree_flags(*simulateCmd, fs, "form degrees (default: 1)", "moment orders (default: 1)");
  add_flow_flags(*simulateCmd, fs);
  add_output_flags(*simulateCmd, fs);

  Flags fx;
  CLI::App* spectrumCmd = app.add_subcommand(
      "spectrum", "Laplacian and Schroedinger eigenvalues on the quadrature grid");
  add_config_flag(*spectrumCmd, fx);
  add_degree_flags(*spectrumCmd, fx, "form degrees (default: 1)", "moment orders (default: 1)");
  spectrumCmd->add_option("--grid", fx.gridPoints, "grid points per axis (0 = dimension default)")
      ->capture_default_str();
  add_output_flags(*spectrumCmd, fx);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(catalogCmd)) return run_catalog(f);
    if (app.got_subcommand(analyzeCmd)) return run_report(fa, false);
    if (app.got_subcommand(reportCmd)) return run_report(fr, true);
    if (app.got_subcommand(simulateCmd)) return run_simulate(fs);
    if (app.got_subcommand(spectrumCmd)) return run_spectrum(fx);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace curvflow
