#pragma once

#include "curvflow/chart.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace curvflow {

/// Raised on malformed or unsupported run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Round sphere S^n(r) in R^{n+1}, polar coordinates; the last parameter is
/// the periodic one.
ImmersionChart sphere_chart(int n, double r);

/// Product immersion of the factors, parameters and ambient blocks
/// concatenated in order.
ImmersionChart product_chart(std::vector<ImmersionChart> factors);

/// S^1(r1) x S^1(r2) in R^4.
ImmersionChart clifford_torus_chart(double r1, double r2);

/// Triaxial ellipsoid x^2/a^2 + y^2/b^2 + z^2/c^2 = 1 in R^3.
ImmersionChart ellipsoid_chart(double a, double b, double c);

/// Same image, ambient space extended by trailing zero coordinates.
ImmersionChart pad_ambient(ImmersionChart inner, int extraZeros);

/// Chart built from user callables; hessian falls back to finite differences
/// of the jacobian when not supplied.
ImmersionChart function_chart(
    int n, int m, DomainBox domain, std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval,
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian,
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> retract,
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> paramOf,
    std::function<HessianList(const Eigen::VectorXd&)> hessian = nullptr,
    std::string description = "user chart");

/// Immersion whose image lies on the unit sphere of its ambient space.
/// Exposes second fundamental forms both of M in R^{N+1} and of M in S^N,
/// with the radial direction pinned as the first normal.
class SphereImmersion {
 public:
  explicit SphereImmersion(ImmersionChart chart);

  struct Forms {
    FramedPoint frame;                // normal frame starts with x/|x|
    FundamentalForms full;            // alpha of M in R^{N+1}
    std::vector<Eigen::MatrixXd> beta;  // slices over sphere-tangent normals
    double betaNormSq = 0.0;
    Eigen::VectorXd betaMean;         // sphere-relative mean curvature coords
  };

  Forms forms_at(const Eigen::VectorXd& u) const;
  const ImmersionChart& chart() const { return chart_; }
  int n() const { return chart_.n(); }
  int sphereDim() const { return chart_.m() - 1; }

 private:
  ImmersionChart chart_;
};

/// Verifies the chart image lies on the unit sphere (sampled), then wraps it.
SphereImmersion compose_into_ambient(ImmersionChart chartIntoUnitSphere);

/// S^1(1/sqrt(2)) x S^1(1/sqrt(2)) inside S^3, the minimal Clifford torus.
SphereImmersion minimal_clifford_torus_in_s3();

struct CatalogEntry {
  std::string kind;
  std::string summary;
};
const std::vector<CatalogEntry>& catalog();

/// Parsed run target: always carries the ambient chart; sphere-immersed
/// targets also carry the SphereImmersion wrapper.
struct ManifoldTarget {
  ImmersionChart chart;
  std::shared_ptr<SphereImmersion> inSphere;  // null unless immersed in a round sphere
  nlohmann::ordered_json configEcho;
};

/// Config schema: {"kind": "sphere", "n": 2, "r": 1.0},
/// {"kind": "product", "factors": [...]}, {"kind": "clifford_torus", "r1": ..,
/// "r2": ..}, {"kind": "ellipsoid", "semiaxes": [a, b, c]},
/// {"kind": "in_sphere", "inner": {...}, "pad": k},
/// {"kind": "minimal_clifford_torus"}.
ManifoldTarget target_from_config(const nlohmann::json& cfg);

}  // namespace curvflow
