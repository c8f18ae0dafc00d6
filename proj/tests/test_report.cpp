#include "curvflow/report.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "curvflow/catalog.hpp"

using nlohmann::json;
using namespace curvflow;

namespace {

json sphere2() { return json::parse(R"({"kind":"sphere","n":2,"r":1.0})"); }

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Run the command line with console streams captured (help and error text
// would otherwise clutter the test log).
int cli(std::vector<std::string> args) {
  std::vector<char*> argv;
  argv.push_back(const_cast<char*>("curvflow"));
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream sink;
  std::streambuf* out = std::cout.rdbuf(sink.rdbuf());
  std::streambuf* err = std::cerr.rdbuf(sink.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(out);
  std::cerr.rdbuf(err);
  return code;
}

}  // namespace

TEST_CASE("report: unit sphere verdicts at the default grid") {
  ReportOptions opts;
  const VanishingReport rep = build_report(sphere2(), opts);
  const auto& doc = rep.doc;
  CHECK(rep.complete);
  CHECK(doc["schemaVersion"].get<int>() == 1);
  CHECK(doc["manifold"]["dim"].get<int>() == 2);
  CHECK(doc["manifold"]["volume"].get<double>() ==
        doctest::Approx(4.0 * M_PI).epsilon(1e-3));
  CHECK_FALSE(doc["manifold"]["sphereImmersed"].get<bool>());
  REQUIRE(doc["rows"].size() == 2);

  const auto& q1 = doc["rows"][0];
  CHECK(q1["q"].get<int>() == 1);
  CHECK(q1["potentials"][0]["min"].get<double>() == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(q1["potentials"][0]["lambdaMin"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(q1["criteria"]["spectral"]["satisfied"].get<bool>());
  CHECK(q1["criteria"]["weitzenbockGap"]["satisfied"].get<bool>());
  CHECK(q1["homologyZero"].get<bool>());
  CHECK(q1["homologyRoute"].get<std::string>() == "spectral");

  // Top degree: margins vanish identically and no verdict may be issued.
  const auto& q2 = doc["rows"][1];
  CHECK(std::abs(q2["criteria"]["spectral"]["margin"].get<double>()) < 1e-8);
  CHECK_FALSE(q2["homologyZero"].get<bool>());
  CHECK(q2["homologyRoute"].get<std::string>().empty());

  CHECK(doc["conclusions"]["pi1Zero"].get<bool>());
  CHECK_FALSE(doc["conclusions"]["pi2Zero"].get<bool>());
  CHECK(doc["conclusions"]["homotopySphere"].get<bool>());
  // Stability potential is identically zero here, so the strict part fails.
  CHECK_FALSE(doc["conclusions"]["noStableHarmonicMaps"].get<bool>());
  CHECK(doc["provenance"]["gridShape"] == json::array({64, 64}));
  CHECK(doc["provenance"]["simulation"].is_null());
}

TEST_CASE("report: obstructed torus withholds every verdict") {
  ReportOptions opts;
  opts.gridPoints = 16;
  const json cfg = json::parse(R"({"kind":"clifford_torus","r1":1.0,"r2":0.6})");
  const VanishingReport rep = build_report(cfg, opts);
  for (const auto& row : rep.doc["rows"]) {
    CHECK_FALSE(row["homologyZero"].get<bool>());
    CHECK(row["criteria"]["spectral"]["margin"].get<double>() < 1e-8);
    CHECK_FALSE(row["criteria"]["weitzenbockGap"]["satisfied"].get<bool>());
  }
  CHECK(rep.doc["rows"][0]["criteria"]["weitzenbockGap"]["negativePartNorm"].get<double>() >
        1.0);
  CHECK_FALSE(rep.doc["conclusions"]["pi1Zero"].get<bool>());
  CHECK_FALSE(rep.doc["conclusions"]["homotopySphere"].get<bool>());

  const std::string csv = report_csv(rep);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + one line per degree
  CHECK(csv.find("false") != std::string::npos);
}

TEST_CASE("report: sphere-immersed criteria appear for the geodesic sphere") {
  ReportOptions opts;
  opts.gridPoints = 16;
  const json cfg = json::parse(
      R"({"kind":"in_sphere","inner":{"kind":"sphere","n":2,"r":1.0},"pad":1})");
  const VanishingReport rep = build_report(cfg, opts);
  CHECK(rep.doc["manifold"]["sphereImmersed"].get<bool>());
  CHECK(rep.doc["manifold"]["minimalInSphere"].get<bool>());
  const auto& q1 = rep.doc["rows"][0];
  CHECK(q1["criteria"]["sphereHomology"]["minMargin"].get<double>() ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(q1["criteria"]["sphereHomology"]["satisfied"].get<bool>());
  CHECK(q1["criteria"]["minimalSphere"]["satisfied"].get<bool>());
  CHECK(q1["homologyZero"].get<bool>());
}

TEST_CASE("report: requested degrees bound the conclusions") {
  ReportOptions opts;
  opts.gridPoints = 12;
  opts.qs = {1};
  const json cfg = json::parse(R"({"kind":"sphere","n":3,"r":1.0})");
  const VanishingReport rep = build_report(cfg, opts);
  REQUIRE(rep.doc["rows"].size() == 1);
  CHECK(rep.doc["rows"][0]["homologyZero"].get<bool>());
  CHECK(rep.doc["conclusions"]["pi1Zero"].get<bool>());
  // q = 2 was not computed, so the sphere conclusion must stay conservative.
  CHECK_FALSE(rep.doc["conclusions"]["homotopySphere"].get<bool>());
}

TEST_CASE("report: simulation attachment is deterministic and bound-checked") {
  ReportOptions opts;
  opts.gridPoints = 16;
  opts.qs = {1};
  opts.simulate = true;
  opts.flow.nPaths = 40;
  opts.flow.tFinal = 1.0;
  opts.flow.dt = 4e-3;
  opts.flow.masterSeed = 3;
  const VanishingReport r1 = build_report(sphere2(), opts);
  const VanishingReport r2 = build_report(sphere2(), opts);
  CHECK(report_json(r1) == report_json(r2));
  CHECK(report_csv(r1) == report_csv(r2));

  const auto& entry = r1.doc["rows"][0]["potentials"][0];
  REQUIRE(entry.contains("muHat"));
  CHECK(entry["standardError"].get<double>() > 0.0);
  CHECK(entry["boundSatisfied"].get<bool>());
  CHECK(entry["boundSlack"].get<double>() >= 0.0);
  CHECK(r1.doc["provenance"]["simulation"]["startPoints"].get<int>() == 1);

  opts.flow.masterSeed = 4;
  const VanishingReport r3 = build_report(sphere2(), opts);
  CHECK(report_json(r1) != report_json(r3));
}

TEST_CASE("report: bad requests fail as config errors, blowups as numeric") {
  ReportOptions opts;
  CHECK_THROWS_AS(build_report(json::parse(R"({"kind":"moebius"})"), opts), ConfigError);
  opts.qs = {5};
  CHECK_THROWS_AS(build_report(sphere2(), opts), ConfigError);
  opts.qs = {};
  opts.ps = {-1.0};
  CHECK_THROWS_AS(build_report(sphere2(), opts), ConfigError);

  ReportOptions blowup;
  blowup.gridPoints = 16;
  blowup.qs = {1};
  blowup.simulate = true;
  blowup.flow.nPaths = 10;
  blowup.flow.dt = 4e-3;
  blowup.flow.tFinal = 0.05;
  const json tiny = json::parse(R"({"kind":"sphere","n":2,"r":0.02})");
  CHECK_THROWS_AS(build_report(tiny, blowup), NumericError);
  blowup.keepPartial = true;
  const VanishingReport partial = build_report(tiny, blowup);
  CHECK_FALSE(partial.complete);
  REQUIRE(partial.doc["stageErrors"].size() == 1);
  CHECK_FALSE(partial.doc["rows"][0]["potentials"][0].contains("muHat"));
  CHECK_FALSE(partial.doc["complete"].get<bool>());
}

TEST_CASE("cli: subcommands, output files, and exit codes") {
  const std::string cfgPath = temp_path("curvflow_test_sphere2.json");
  {
    std::ofstream out(cfgPath);
    out << sphere2().dump();
  }
  const std::string outPath = temp_path("curvflow_test_catalog.json");

  CHECK(cli({"catalog"}) == 0);
  CHECK(cli({"catalog", "--format", "json", "--out", outPath}) == 0);
  {
    std::ifstream in(outPath);
    const json entries = json::parse(in);
    CHECK(entries.size() == catalog().size());
    CHECK(entries[0].contains("kind"));
  }

  const std::string specPath = temp_path("curvflow_test_spectrum.json");
  CHECK(cli({"spectrum", "--config", cfgPath, "--grid", "16", "--out", specPath}) == 0);
  {
    std::ifstream in(specPath);
    const json spec = json::parse(in);
    CHECK(spec["laplacian"][0]["value"].get<double>() == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(spec["schroedinger"][0]["lambdaMin"].get<double>() ==
          doctest::Approx(1.0).epsilon(0.05));
  }

  CHECK(cli({}) == 2);                            // a subcommand is required
  CHECK(cli({"analyze"}) == 2);                   // --config is required
  CHECK(cli({"analyze", "--config", "/nonexistent/x.json"}) == 2);
  CHECK(cli({"simulate", "--config", cfgPath, "--scheme", "leapfrog"}) == 2);
  CHECK(cli({"--help"}) == 0);

  std::remove(cfgPath.c_str());
  std::remove(outPath.c_str());
  std::remove(specPath.c_str());
}
