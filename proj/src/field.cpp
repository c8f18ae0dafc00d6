#include "curvflow/field.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "curvflow/parallel.hpp"

namespace curvflow {

long ParamGrid::size() const {
  long total = 1;
  for (int s : shape) total *= s;
  return total;
}

std::vector<int> ParamGrid::unravel(long flat) const {
  std::vector<int> idx(shape.size());
  for (int d = dim() - 1; d >= 0; --d) {
    idx[d] = static_cast<int>(flat % shape[d]);
    flat /= shape[d];
  }
  return idx;
}

long ParamGrid::ravel(const std::vector<int>& idx) const {
  long flat = 0;
  for (int d = 0; d < dim(); ++d) flat = flat * shape[d] + idx[d];
  return flat;
}

Eigen::VectorXd ParamGrid::point(const std::vector<int>& idx) const {
  Eigen::VectorXd u(dim());
  for (int d = 0; d < dim(); ++d) u(d) = axes[d](idx[d]);
  return u;
}

Eigen::VectorXd ParamGrid::point(long flat) const { return point(unravel(flat)); }

double ParamGrid::cell() const {
  double v = 1.0;
  for (double h : steps) v *= h;
  return v;
}

ParamGrid make_grid(const DomainBox& domain, const std::vector<int>& shape) {
  if (static_cast<int>(shape.size()) != domain.dim())
    throw std::domain_error("grid shape rank does not match the domain");
  ParamGrid grid;
  grid.domain = domain;
  grid.shape = shape;
  grid.axes.resize(shape.size());
  grid.steps.resize(shape.size());
  for (int d = 0; d < domain.dim(); ++d) {
    if (shape[d] < 2) throw std::domain_error("grid needs at least 2 points per dimension");
    const double h = domain.span(d) / shape[d];
    grid.steps[d] = h;
    grid.axes[d].resize(shape[d]);
    for (int i = 0; i < shape[d]; ++i) grid.axes[d](i) = domain.lo(d) + (i + 0.5) * h;
  }
  return grid;
}

ParamGrid make_grid(const DomainBox& domain, int pointsPerDim) {
  return make_grid(domain, std::vector<int>(domain.dim(), pointsPerDim));
}

Eigen::VectorXd metric_weights(const ImmersionChart& chart, const ParamGrid& grid) {
  const long total = grid.size();
  const double cell = grid.cell();
  Eigen::VectorXd w(total);
  parallel_for(total, [&](long i) {
    const Eigen::MatrixXd jac = chart.jacobian(grid.point(i));
    w(i) = std::sqrt((jac.transpose() * jac).determinant()) * cell;
  });
  return w;
}

double PotentialField::operator()(const Eigen::VectorXd& u) const {
  const int d = grid.dim();
  // Per axis: bracketing cell centers and the interpolation fraction.
  std::vector<int> left(d), right(d);
  std::vector<double> frac(d);
  for (int a = 0; a < d; ++a) {
    const int count = grid.shape[a];
    const double h = grid.steps[a];
    const double span = grid.domain.span(a);
    double rel = u(a) - grid.domain.lo(a);
    if (grid.domain.periodic[a]) {
      rel = std::fmod(rel, span);
      if (rel < 0) rel += span;
      const double t = rel / h - 0.5;
      const double base = std::floor(t);
      left[a] = ((static_cast<int>(base) % count) + count) % count;
      right[a] = (left[a] + 1) % count;
      frac[a] = t - base;
    } else {
      double t = rel / h - 0.5;
      t = std::min(std::max(t, 0.0), static_cast<double>(count - 1));
      left[a] = std::min(static_cast<int>(t), count - 2);
      right[a] = left[a] + 1;
      frac[a] = t - left[a];
    }
  }
  double acc = 0.0;
  std::vector<int> idx(d);
  for (int corner = 0; corner < (1 << d); ++corner) {
    double weight = 1.0;
    for (int a = 0; a < d; ++a) {
      const bool hi = corner & (1 << a);
      idx[a] = hi ? right[a] : left[a];
      weight *= hi ? frac[a] : 1.0 - frac[a];
    }
    if (weight != 0.0) acc += weight * values(grid.ravel(idx));
  }
  return acc;
}

void PotentialField::write_csv(std::ostream& out) const {
  for (int a = 0; a < grid.dim(); ++a) out << "u" << a << ",";
  out << "weight,value\n";
  for (long i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXd u = grid.point(i);
    for (int a = 0; a < grid.dim(); ++a) out << u(a) << ",";
    out << weights(i) << "," << values(i) << "\n";
  }
}

PotentialField make_field(const ImmersionChart& chart, const ParamGrid& grid,
                          const std::function<double(const Eigen::VectorXd&, long)>& eval,
                          double p, int q, std::string criterion) {
  PotentialField field;
  field.chart = chart;
  field.grid = grid;
  field.weights = metric_weights(chart, grid);
  field.values.resize(grid.size());
  field.p = p;
  field.q = q;
  field.criterion = std::move(criterion);
  parallel_for(grid.size(), [&](long i) { field.values(i) = eval(grid.point(i), i); });
  return field;
}

double negative_part_norm(const PotentialField& field, double w, double exponent) {
  if (exponent <= 0) throw std::domain_error("negative_part_norm needs a positive exponent");
  double sum = 0.0;
  for (long i = 0; i < field.values.size(); ++i) {
    const double neg = std::min(field.values(i) - w, 0.0);
    if (neg < 0) sum += field.weights(i) * std::pow(-neg, exponent);
  }
  return std::pow(sum, 1.0 / exponent);
}

namespace {

Extremum refined_extremum(const PotentialField& field,
                          const std::function<double(const Eigen::VectorXd&)>& eval,
                          bool minimize) {
  Extremum best;
  best.gridIndex = 0;
  long argIdx;
  if (minimize)
    field.values.minCoeff(&argIdx);
  else
    field.values.maxCoeff(&argIdx);
  best.gridIndex = argIdx;
  best.value = field.values(argIdx);
  best.point = field.grid.point(argIdx);

  // One refinement pass: 5-per-axis stencil spanning +-1 cell around the
  // winner, clamped inside the open box on non-periodic axes.
  const int d = field.grid.dim();
  const Eigen::VectorXd center = best.point;
  std::vector<int> steps(d, 5);
  long total = 1;
  for (int a = 0; a < d; ++a) total *= steps[a];
  for (long s = 0; s < total; ++s) {
    long rem = s;
    Eigen::VectorXd u(d);
    for (int a = d - 1; a >= 0; --a) {
      const int k = static_cast<int>(rem % steps[a]);
      rem /= steps[a];
      const double h = field.grid.steps[a];
      double val = center(a) + (k - 2) * (h / 2.0);
      if (!field.grid.domain.periodic[a]) {
        const double lo = field.grid.domain.lo(a) + 0.05 * h;
        const double hi = field.grid.domain.hi(a) - 0.05 * h;
        val = std::min(std::max(val, lo), hi);
      }
      u(a) = val;
    }
    const double v = eval(u);
    if (minimize ? v < best.value : v > best.value) {
      best.value = v;
      best.point = u;
    }
  }
  return best;
}

}  // namespace

Extremum refined_minimum(const PotentialField& field,
                         const std::function<double(const Eigen::VectorXd&)>& eval) {
  return refined_extremum(field, eval, true);
}

Extremum refined_maximum(const PotentialField& field,
                         const std::function<double(const Eigen::VectorXd&)>& eval) {
  return refined_extremum(field, eval, false);
}

}  // namespace curvflow
