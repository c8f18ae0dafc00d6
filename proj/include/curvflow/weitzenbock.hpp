#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "curvflow/catalog.hpp"
#include "curvflow/chart.hpp"
#include "curvflow/exterior.hpp"
#include "curvflow/field.hpp"
#include "curvflow/frame_opt.hpp"

namespace curvflow {

/// Orthonormal tangent frame (columns, in FramedPoint tangent coordinates)
/// whose first q columns span the primitive vector V = v_1 ^ ... ^ v_q.
struct FrameSelection {
  Eigen::MatrixXd basis;
  int q = 1;
};

/// Throws std::domain_error unless basis is n x n orthogonal (1e-10) and
/// 1 <= q <= n.
void validate_selection(const FrameSelection& sel, int n);

/// Weitzenbock curvature on the primitive vector of the selection, evaluated
/// intrinsically: sum_{j<=q} sum_{l>q} K(v_j, v_l) from Gauss-equation
/// sectional curvatures.
double weitzenbock_primitive(const FundamentalForms& ff, const FrameSelection& sel);

/// Same quantity evaluated directly from the second fundamental form:
/// sum_{j<=q} sum_{l>q} (<alpha_jj, alpha_ll> - |alpha_jl|^2).  Agrees with
/// weitzenbock_primitive; the pair cross-validates both routes.
double weitzenbock_extrinsic(const FundamentalForms& ff, const FrameSelection& sel);

/// Weitzenbock operator on Lambda^q as a C(n,q) x C(n,q) matrix in the
/// tangent-frame multi-index basis:
///   dLambda^q(Ric) - sum_a delta2(A_a, q),
/// the sum running over an orthonormal normal basis.  `normalBasis` re-expresses
/// that basis relative to the frame's stored normals ((m-n) x (m-n)
/// orthogonal, identity when empty); the result is invariant under this
/// choice.
Eigen::MatrixXd weitzenbock_operator(const FundamentalForms& ff, int q,
                                     const Eigen::MatrixXd& normalBasis = Eigen::MatrixXd());

/// Quadratic form driving the moment drift:
///   H_p^q(V, V) = sum_a [ |dLambda^q(A_a) V|^2 + (p-2) <V, dLambda^q(A_a) V>^2 ]
///                 - <V, weitzenbock_operator V>.
/// V must be a unit primitive q-vector (throws std::domain_error otherwise).
double hpq_quadratic(const FundamentalForms& ff, const MultiVector<double>& V, double p,
                     const Eigen::MatrixXd& normalBasis = Eigen::MatrixXd());

/// Frame-extremized pointwise value plus the frame achieving it.  converged
/// is false when the optimizer hit its iteration cap with a large gradient
/// (value still returned).
struct FrameValue {
  double value = 0.0;
  Eigen::MatrixXd frame;
  bool converged = true;
};

/// rhat0: infimum of the Weitzenbock curvature over primitive unit q-vectors.
/// q = 1 is the smallest Ricci eigenvalue (exact); q = n is 0; otherwise
/// multi-start descent over frames seeded with the identity, the Ricci
/// eigenframe and random rotations.
FrameValue rhat0(const FundamentalForms& ff, int q, const FrameOptSettings& settings = {});

/// h_p^q: sup over primitive unit V of (p/2) H_p^q(V, V).  Exact shortcuts:
/// p = 0 gives 0; q = n is frame independent; (q, p) = (1, 2) is the largest
/// eigenvalue of sum_a A_a^2 - Ric.  Otherwise the frame optimizer.
FrameValue hpq(const FundamentalForms& ff, double p, int q,
               const FrameOptSettings& settings = {});

/// Homology-vanishing margin for a manifold immersed in the unit sphere, from
/// the second fundamental form beta relative to the sphere:
///   q(n-q) - sup_frames sum_{j<=q,l>q} (2|beta_jl|^2 - <beta_jj, beta_ll>).
/// Positive margin at every point certifies H_q = H_{n-q} = 0.
FrameValue sphere_homology_margin(const std::vector<Eigen::MatrixXd>& beta, int q,
                                  const FrameOptSettings& settings = {});

/// Convenience overload; throws std::domain_error unless the target is
/// sphere-immersed.
FrameValue sphere_homology_margin(const ManifoldTarget& target, const Eigen::VectorXd& u, int q,
                                  const FrameOptSettings& settings = {});

/// Sectional-curvature margin for minimal immersions in the unit sphere:
///   inf_frames sum_{j<=q,l>q} K(v_j, v_l) - q(n-q)/2.
/// chainResidual is the largest discrepancy in the algebraic identity linking
/// this criterion to sphere_homology_margin, evaluated at sampled frames
/// (should sit at rounding level).  Throws std::domain_error when the
/// sphere-relative mean curvature is not ~0 (non-minimal input).
struct MinimalSphereMargin {
  double value = 0.0;
  Eigen::MatrixXd frame;
  bool converged = true;
  double chainResidual = 0.0;
};
MinimalSphereMargin minimal_sphere_margin(const SphereImmersion::Forms& forms, int q,
                                          const FrameOptSettings& settings = {});

/// Stability potential for harmonic maps out of M: smallest eigenvalue of
/// Ric - sum_a A_a^2 over unit tangent vectors.  Positive everywhere rules
/// out nonconstant stable harmonic maps from M.
double harmonic_stability_potential(const FundamentalForms& ff);

/// Pointwise fields over a quadrature grid.  Optimizer-backed builders seed
/// each grid point deterministically from (seed, point index).
PotentialField hpq_field(const ImmersionChart& chart, const ParamGrid& grid, double p, int q,
                         std::uint64_t seed = 0, const FrameOptSettings& settings = {});
PotentialField rhat0_field(const ImmersionChart& chart, const ParamGrid& grid, int q,
                           std::uint64_t seed = 0, const FrameOptSettings& settings = {});

/// Gap potential rhat0^q - ||alpha||^2/2 + (n/2)|H|^2; the operator
/// Delta + gap being positive certifies H_q = H_{n-q} = 0.
PotentialField weitzenbock_gap_field(const ImmersionChart& chart, const ParamGrid& grid, int q,
                                     std::uint64_t seed = 0,
                                     const FrameOptSettings& settings = {});

PotentialField harmonic_stability_field(const ImmersionChart& chart, const ParamGrid& grid);

PotentialField sphere_homology_field(const ManifoldTarget& target, const ParamGrid& grid, int q,
                                     std::uint64_t seed = 0,
                                     const FrameOptSettings& settings = {});

PotentialField minimal_sphere_field(const ManifoldTarget& target, const ParamGrid& grid, int q,
                                    std::uint64_t seed = 0,
                                    const FrameOptSettings& settings = {});

}  // namespace curvflow
