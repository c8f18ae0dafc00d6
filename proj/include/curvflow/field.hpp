#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "curvflow/chart.hpp"

namespace curvflow {

/// Cell-centered tensor grid over a parameter box.  Periodic axes tile the
/// full period; non-periodic axes keep cell centers strictly inside the open
/// box, which steps around chart singularities at the box faces (sphere
/// poles).  Flat indices are row major with the last axis fastest.
struct ParamGrid {
  DomainBox domain;
  std::vector<int> shape;
  std::vector<Eigen::VectorXd> axes;
  std::vector<double> steps;

  int dim() const { return static_cast<int>(shape.size()); }
  long size() const;
  std::vector<int> unravel(long flat) const;
  long ravel(const std::vector<int>& idx) const;
  Eigen::VectorXd point(const std::vector<int>& idx) const;
  Eigen::VectorXd point(long flat) const;
  /// Parameter cell volume (product of steps).
  double cell() const;
};

ParamGrid make_grid(const DomainBox& domain, const std::vector<int>& shape);
ParamGrid make_grid(const DomainBox& domain, int pointsPerDim);

/// Midpoint quadrature weights sqrt(det J^T J) * cell volume, one per grid
/// point.  Their sum approximates vol(M).
Eigen::VectorXd metric_weights(const ImmersionChart& chart, const ParamGrid& grid);

/// Scalar field sampled on a quadrature grid of a chart: a pointwise
/// potential (weitzenbock gap, h_p^q, ...) ready for quadrature,
/// interpolation along simulated paths, and reporting.
struct PotentialField {
  ImmersionChart chart;
  ParamGrid grid;
  Eigen::VectorXd weights;
  Eigen::VectorXd values;
  double p = 0.0;
  int q = 0;
  std::string criterion;

  double volume() const { return weights.sum(); }
  double minValue() const { return values.minCoeff(); }
  double maxValue() const { return values.maxCoeff(); }
  /// Multilinear interpolation at a parameter point; periodic axes wrap,
  /// non-periodic axes clamp to the outermost cell centers.
  double operator()(const Eigen::VectorXd& u) const;
  /// CSV rows: parameter coords, weight, value.
  void write_csv(std::ostream& out) const;
};

/// Sample `eval(point, flatIndex)` over the grid in parallel (deterministic:
/// each task writes its own slot).
PotentialField make_field(const ImmersionChart& chart, const ParamGrid& grid,
                          const std::function<double(const Eigen::VectorXd&, long)>& eval,
                          double p = 0.0, int q = 0, std::string criterion = {});

/// ||min(field - w, 0)||_{1/exponent} quadrature norm:
/// (sum_i weight_i |min(value_i - w, 0)|^exponent)^(1/exponent).
double negative_part_norm(const PotentialField& field, double w, double exponent);

struct Extremum {
  double value = 0.0;
  Eigen::VectorXd point;
  long gridIndex = 0;
};

/// Grid min/max of `eval` (seeded by the field samples) followed by one local
/// refinement pass: a 5^d stencil of half-step spacing around the extremal
/// cell.
Extremum refined_minimum(const PotentialField& field,
                         const std::function<double(const Eigen::VectorXd&)>& eval);
Extremum refined_maximum(const PotentialField& field,
                         const std::function<double(const Eigen::VectorXd&)>& eval);

}  // namespace curvflow
