#include "curvflow/chart.hpp"

#include <cmath>

namespace curvflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

HessianList ChartImpl::hessian(const VectorXd& u) const {
  // Central differences of the jacobian; components then symmetrized to kill
  // the O(eps/h) asymmetry.
  const int n = param_dim();
  const int m = ambient_dim();
  HessianList out(static_cast<std::size_t>(m), MatrixXd::Zero(n, n));
  VectorXd up = u, um = u;
  for (int a = 0; a < n; ++a) {
    const double h = 1e-5 * std::max(1.0, std::abs(u(a)));
    up(a) = u(a) + h;
    um(a) = u(a) - h;
    const MatrixXd dJ = (jacobian(up) - jacobian(um)) / (2.0 * h);
    up(a) = u(a);
    um(a) = u(a);
    for (int k = 0; k < m; ++k) out[static_cast<std::size_t>(k)].col(a) = dJ.row(k).transpose();
  }
  for (auto& Hk : out) Hk = 0.5 * (Hk + Hk.transpose()).eval();
  return out;
}

FramedPoint frame_at(const ImmersionChart& chart, const VectorXd& u) {
  const int n = chart.n();
  const int m = chart.m();
  FramedPoint fp;
  fp.u = u;
  fp.x = chart.eval(u);
  const MatrixXd J = chart.jacobian(u);

  // Modified Gram-Schmidt in fixed column order; R tracked for coeff = R^{-1}.
  MatrixXd Q = MatrixXd::Zero(m, n);
  MatrixXd R = MatrixXd::Zero(n, n);
  double minDiag = std::numeric_limits<double>::max();
  for (int j = 0; j < n; ++j) {
    VectorXd v = J.col(j);
    for (int i = 0; i < j; ++i) {
      R(i, j) = Q.col(i).dot(v);
      v -= R(i, j) * Q.col(i);
    }
    R(j, j) = v.norm();
    minDiag = std::min(minDiag, R(j, j));
    if (R(j, j) < 1e-12)
      throw NumericError("frame_at: degenerate chart (rank-deficient jacobian) at parameter");
    Q.col(j) = v / R(j, j);
  }
  if (minDiag < 1e-6) {
    // MGS pivots can underestimate conditioning; confirm with the true
    // smallest singular value before rejecting.
    Eigen::JacobiSVD<MatrixXd> svd(J);
    if (svd.singularValues()(n - 1) < 1e-8)
      throw NumericError("frame_at: degenerate chart (singular value below 1e-8)");
  }
  fp.tangent = Q;
  fp.coeff = R.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(n, n));
  fp.normal = complete_normal_frame(Q);
  return fp;
}

MatrixXd complete_normal_frame(const MatrixXd& tangent, const std::vector<VectorXd>& forced) {
  const int m = static_cast<int>(tangent.rows());
  const int n = static_cast<int>(tangent.cols());
  const int codim = m - n;
  MatrixXd N(m, codim);
  int have = 0;
  auto tryAccept = [&](VectorXd v, bool mustAccept) {
    v -= tangent * (tangent.transpose() * v);
    for (int a = 0; a < have; ++a) v -= N.col(a).dot(v) * N.col(a);
    const double norm = v.norm();
    if (norm <= 1e-6) {
      if (mustAccept)
        throw NumericError("complete_normal_frame: forced direction lies in the spanned space");
      return;
    }
    if (have < codim) N.col(have++) = v / norm;
  };
  for (const auto& f : forced) tryAccept(f, true);
  for (int k = 0; k < m && have < codim; ++k) tryAccept(VectorXd::Unit(m, k), false);
  if (have != codim) throw NumericError("complete_normal_frame: completion failed");
  return N;
}

FundamentalForms fundamental_forms(const ImmersionChart& chart, const FramedPoint& fp) {
  const int n = chart.n();
  const int m = chart.m();
  const int codim = m - n;
  const HessianList hess = chart.hessian(fp.u);

  FundamentalForms ff;
  ff.n = n;
  ff.codim = codim;
  ff.alpha.assign(static_cast<std::size_t>(codim), MatrixXd::Zero(n, n));
  // alpha(v_i, v_j) = (D^2 f)(c_i, c_j) projected on the normals, where c_i
  // are the parameter coordinates of the frame vectors.
  for (int k = 0; k < m; ++k) {
    const MatrixXd S = fp.coeff.transpose() * hess[static_cast<std::size_t>(k)] * fp.coeff;
    for (int a = 0; a < codim; ++a) {
      const double w = fp.normal(k, a);
      if (w != 0.0) ff.alpha[static_cast<std::size_t>(a)] += w * S;
    }
  }
  ff.mean.resize(codim);
  ff.hsNormSq = 0.0;
  for (int a = 0; a < codim; ++a) {
    auto& Aa = ff.alpha[static_cast<std::size_t>(a)];
    Aa = 0.5 * (Aa + Aa.transpose()).eval();
    ff.mean(a) = Aa.trace() / n;
    ff.hsNormSq += Aa.squaredNorm();
  }
  return ff;
}

MatrixXd shape_operator(const FundamentalForms& ff, const VectorXd& w) {
  if (w.size() != ff.codim) throw std::domain_error("shape_operator: bad normal coordinate size");
  MatrixXd A = MatrixXd::Zero(ff.n, ff.n);
  for (int a = 0; a < ff.codim; ++a) A += w(a) * ff.alpha[static_cast<std::size_t>(a)];
  return A;
}

double sectional_curvature(const FundamentalForms& ff, VectorXd a, VectorXd b) {
  const double na = a.norm();
  if (na < 1e-14) throw std::domain_error("sectional_curvature: zero input");
  a /= na;
  b -= a.dot(b) * a;
  const double nb = b.norm();
  if (nb < 1e-14) throw std::domain_error("sectional_curvature: inputs span no plane");
  b /= nb;
  double K = 0.0;
  for (const auto& A : ff.alpha) {
    const double aa = a.dot(A * a);
    const double bb = b.dot(A * b);
    const double ab = a.dot(A * b);
    K += aa * bb - ab * ab;
  }
  return K;
}

double ricci_quadratic(const FundamentalForms& ff, const VectorXd& a) {
  const int n = ff.n;
  if (n == 1) return 0.0;
  VectorXd v = a / a.norm();
  // Orthonormal completion of v inside the tangent frame coordinates.
  MatrixXd basis(n, n);
  basis.col(0) = v;
  int have = 1;
  for (int k = 0; k < n && have < n; ++k) {
    VectorXd w = VectorXd::Unit(n, k);
    for (int i = 0; i < have; ++i) w -= basis.col(i).dot(w) * basis.col(i);
    const double norm = w.norm();
    if (norm > 1e-6) basis.col(have++) = w / norm;
  }
  if (have != n) throw NumericError("ricci_quadratic: completion failed");
  double sum = 0.0;
  for (int l = 1; l < n; ++l) sum += sectional_curvature(ff, v, basis.col(l));
  return sum;
}

MatrixXd ricci_matrix(const FundamentalForms& ff) {
  MatrixXd ric = MatrixXd::Zero(ff.n, ff.n);
  for (const auto& A : ff.alpha) ric += A.trace() * A - A * A;
  return ric;
}

VectorXd mean_curvature_ambient(const FramedPoint& fp, const FundamentalForms& ff) {
  return fp.normal * ff.mean;
}

MatrixXd tangent_projector(const FramedPoint& fp) {
  return fp.tangent * fp.tangent.transpose();
}

namespace {

class FdHessianChart final : public ChartImpl {
 public:
  explicit FdHessianChart(ImmersionChart inner) : inner_(std::move(inner)) {}

  int param_dim() const override { return inner_.n(); }
  int ambient_dim() const override { return inner_.m(); }
  const DomainBox& domain() const override { return inner_.domain(); }
  VectorXd eval(const VectorXd& u) const override { return inner_.eval(u); }
  MatrixXd jacobian(const VectorXd& u) const override { return inner_.jacobian(u); }
  HessianList hessian(const VectorXd& u) const override { return ChartImpl::hessian(u); }
  VectorXd retract(const VectorXd& x) const override { return inner_.retract(x); }
  VectorXd param_of(const VectorXd& x) const override { return inner_.param_of(x); }
  std::optional<MatrixXd> declared_metric(const VectorXd& u) const override {
    return inner_.declared_metric(u);
  }
  bool analytic_hessian() const override { return false; }
  std::string describe() const override { return inner_.describe() + " [fd-hessian]"; }

 private:
  ImmersionChart inner_;
};

}  // namespace

ImmersionChart with_fd_hessian(ImmersionChart chart) {
  return ImmersionChart(std::make_shared<FdHessianChart>(std::move(chart)));
}

MatrixXd frame_transport(const MatrixXd& from, const MatrixXd& to) {
  const MatrixXd M = to.transpose() * from;
  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace curvflow
