#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace curvflow {

/// Raised when a numerical routine leaves its validated regime (rank-deficient
/// jacobian, failed retraction, non-convergent iteration asked to be strict).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rectangular parameter domain with per-dimension periodicity.
struct DomainBox {
  Eigen::VectorXd lo, hi;
  std::vector<bool> periodic;

  int dim() const { return static_cast<int>(lo.size()); }
  double span(int d) const { return hi(d) - lo(d); }
};

/// Hessian of the immersion: one n x n second-derivative block per ambient
/// coordinate, hess[k](i,j) = d^2 f_k / du_i du_j.
using HessianList = std::vector<Eigen::MatrixXd>;

/// Interface a concrete immersion family implements.  `retract` maps ambient
/// points near the image back onto it (nearest point), `param_of` inverts the
/// chart on its image.
class ChartImpl {
 public:
  virtual ~ChartImpl() = default;

  virtual int param_dim() const = 0;
  virtual int ambient_dim() const = 0;
  virtual const DomainBox& domain() const = 0;
  virtual Eigen::VectorXd eval(const Eigen::VectorXd& u) const = 0;
  virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& u) const = 0;
  virtual HessianList hessian(const Eigen::VectorXd& u) const;
  virtual Eigen::VectorXd retract(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd param_of(const Eigen::VectorXd& x) const = 0;
  virtual std::optional<Eigen::MatrixXd> declared_metric(const Eigen::VectorXd&) const {
    return std::nullopt;
  }
  virtual bool analytic_hessian() const { return true; }
  virtual std::string describe() const = 0;
};

/// Value-semantic handle to an isometric immersion chart f : U in R^n -> R^m.
class ImmersionChart {
 public:
  ImmersionChart() = default;
  explicit ImmersionChart(std::shared_ptr<const ChartImpl> impl) : impl_(std::move(impl)) {}

  int n() const { return impl_->param_dim(); }
  int m() const { return impl_->ambient_dim(); }
  const DomainBox& domain() const { return impl_->domain(); }
  Eigen::VectorXd eval(const Eigen::VectorXd& u) const { return impl_->eval(u); }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& u) const { return impl_->jacobian(u); }
  HessianList hessian(const Eigen::VectorXd& u) const { return impl_->hessian(u); }
  Eigen::VectorXd retract(const Eigen::VectorXd& x) const { return impl_->retract(x); }
  Eigen::VectorXd param_of(const Eigen::VectorXd& x) const { return impl_->param_of(x); }
  std::optional<Eigen::MatrixXd> declared_metric(const Eigen::VectorXd& u) const {
    return impl_->declared_metric(u);
  }
  bool analytic_hessian() const { return impl_->analytic_hessian(); }
  std::string describe() const { return impl_->describe(); }
  const std::shared_ptr<const ChartImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<const ChartImpl> impl_;
};

/// Adapted frame at a point: orthonormal tangent columns (Gram-Schmidt of the
/// jacobian columns, in fixed column order) and a deterministic orthonormal
/// completion of the normal space.  coeff holds the parameter-space
/// coordinates of the tangent frame, tangent = jacobian * coeff.
struct FramedPoint {
  Eigen::VectorXd u;
  Eigen::VectorXd x;
  Eigen::MatrixXd tangent;  // m x n
  Eigen::MatrixXd normal;   // m x (m - n)
  Eigen::MatrixXd coeff;    // n x n upper triangular
};

/// Second fundamental form in an adapted frame.  alpha[a](i,j) is the nu_a
/// component of alpha(v_i, v_j); slice a equals the shape operator A(., nu_a)
/// as a matrix in the tangent frame.
struct FundamentalForms {
  std::vector<Eigen::MatrixXd> alpha;
  Eigen::VectorXd mean;  // <H, nu_a>, H = trace(alpha)/n
  double hsNormSq = 0.0;
  int n = 0;
  int codim = 0;
};

FramedPoint frame_at(const ImmersionChart& chart, const Eigen::VectorXd& u);

/// Deterministic orthonormal completion: candidates from `forced` first, then
/// the standard ambient basis; each is projected off the tangent space and the
/// normals accepted so far, near-zero residuals dropped.
Eigen::MatrixXd complete_normal_frame(const Eigen::MatrixXd& tangent,
                                      const std::vector<Eigen::VectorXd>& forced = {});

FundamentalForms fundamental_forms(const ImmersionChart& chart, const FramedPoint& fp);

/// Shape operator A(., w) for a normal vector with coordinates w over the
/// frame's normal basis.
Eigen::MatrixXd shape_operator(const FundamentalForms& ff, const Eigen::VectorXd& w);

/// Gauss-equation sectional curvature of the plane spanned by a, b (tangent
/// frame coordinates; orthonormalized first when needed).
double sectional_curvature(const FundamentalForms& ff, Eigen::VectorXd a, Eigen::VectorXd b);

/// Ricci quadratic form Ric(a, a) as a sum of sectional curvatures over a
/// deterministic orthonormal completion of a.
double ricci_quadratic(const FundamentalForms& ff, const Eigen::VectorXd& a);

/// Ricci endomorphism in the tangent frame: sum_a (tr(A_a) A_a - A_a^2).
Eigen::MatrixXd ricci_matrix(const FundamentalForms& ff);

/// Mean curvature vector in ambient coordinates.
Eigen::VectorXd mean_curvature_ambient(const FramedPoint& fp, const FundamentalForms& ff);

/// Orthogonal projection onto the tangent space, P = T T^T.  Its columns are
/// the gradient fields X^i = grad(x_i|_M): the gradient Brownian system's
/// driving fields.
Eigen::MatrixXd tangent_projector(const FramedPoint& fp);

/// Same chart with the analytic hessian replaced by central differences of
/// the jacobian (user-chart mode).
ImmersionChart with_fd_hessian(ImmersionChart chart);

/// Closest-orthogonal change of tangent coordinates between two frames at
/// nearby points (polar factor of Tto^T Tfrom).
Eigen::MatrixXd frame_transport(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to);

}  // namespace curvflow
