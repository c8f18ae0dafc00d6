#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <vector>

#include "curvflow/chart.hpp"
#include "curvflow/field.hpp"

namespace curvflow {

/// Divergence-form discretization of the Laplace-Beltrami operator on a
/// parameter grid.  `stiffness` is the symmetric quadratic form of the
/// Dirichlet energy (so Delta f corresponds to mass^{-1} * stiffness * f) and
/// `mass` the lumped sqrt(g) quadrature weights.  Positive semidefinite with
/// constants in the kernel.
struct DiscreteOperator {
  ParamGrid grid;
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd mass;
};

/// Assemble the operator: per-axis face fluxes sqrt(g) g^{aa} plus symmetric
/// centered-difference coupling for off-diagonal metric terms (triaxial
/// charts).  Periodic axes wrap; non-periodic axes get natural (zero-flux)
/// closure, which at polar boundaries is exact because sqrt(g) g^{aa}
/// vanishes on the boundary face.  Refuses grids with fewer than 8 points on
/// any axis.
DiscreteOperator laplacian_matrix(const ImmersionChart& chart, const ParamGrid& grid);

struct EigenPair {
  double value = 0.0;
  Eigen::VectorXd function;  // per grid point, mass-normalized
  double residual = 0.0;
  bool converged = false;
};

/// Smallest `count` eigenpairs of Delta + diag(potential) in the
/// mass-weighted inner product, by shifted inverse iteration with deflation
/// (deterministic).  `potential` may be empty for the plain Laplacian.
std::vector<EigenPair> eigs_smallest(const DiscreteOperator& op,
                                     const Eigen::VectorXd& potential, int count,
                                     int maxIters = 800, double tol = 1e-11);

/// Smallest eigenvalue of the Schroedinger operator Delta - 2h.
EigenPair schrodinger_lambda_min(const ImmersionChart& chart, const PotentialField& h,
                                 const ParamGrid& grid);

/// Strict-positivity verdict for Delta + V (V an additive zeroth-order
/// potential, e.g. the weitzenbock gap): positive iff lambda_min exceeds a
/// tolerance relative to the potential's sup norm.
struct PositivityVerdict {
  bool positive = false;
  double lambdaMin = 0.0;
  double tolerance = 0.0;
  EigenPair detail;
};
PositivityVerdict positivity_verdict(const ImmersionChart& chart, const PotentialField& V,
                                     const ParamGrid& grid);

/// Per-dimension default spectral resolution (denser for low-dimensional
/// manifolds, kept tractable for 3-parameter charts).
int default_spectral_points(int dim);

}  // namespace curvflow
