#include "curvflow/catalog.hpp"

#include <cmath>
#include <numeric>

namespace curvflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// ---------------------------------------------------------------------------
// Round sphere S^n(r).
//
// With prefix products c_k = prod_{j<k} sin(u_j), the chart is built from
//   raw_k = r c_k cos(u_k)  (k = 0..n-1),   raw_n = r c_n,
// cyclically shifted so that ambient coordinates read
//   x_i = raw_{i+1} (i = 0..n-1),  x_n = raw_0.
// For n = 2 this is the usual (sin t cos p, sin t sin p, cos t).  Derivatives
// of every component are products of per-factor sin/cos derivatives, so the
// jacobian and hessian are assembled exactly, without divisions.
class SphereChart final : public ChartImpl {
 public:
  SphereChart(int n, double r) : n_(n), r_(r) {
    if (n < 1) throw ConfigError("sphere: need n >= 1");
    if (!(r > 0.0)) throw ConfigError("sphere: need r > 0");
    dom_.lo = VectorXd::Zero(n);
    dom_.hi = VectorXd::Constant(n, M_PI);
    dom_.hi(n - 1) = kTwoPi;
    dom_.periodic.assign(static_cast<std::size_t>(n), false);
    dom_.periodic[static_cast<std::size_t>(n - 1)] = true;
  }

  int param_dim() const override { return n_; }
  int ambient_dim() const override { return n_ + 1; }
  const DomainBox& domain() const override { return dom_; }

  VectorXd eval(const VectorXd& u) const override {
    VectorXd raw(n_ + 1);
    for (int k = 0; k <= n_; ++k) raw(k) = component(u, k, -1, -1);
    return shift(raw);
  }

  MatrixXd jacobian(const VectorXd& u) const override {
    MatrixXd rawJ(n_ + 1, n_);
    for (int k = 0; k <= n_; ++k)
      for (int a = 0; a < n_; ++a) rawJ(k, a) = component(u, k, a, -1);
    MatrixXd J(n_ + 1, n_);
    for (int k = 0; k <= n_; ++k) J.row(shiftIndex(k)) = rawJ.row(k);
    return J;
  }

  HessianList hessian(const VectorXd& u) const override {
    HessianList out(static_cast<std::size_t>(n_ + 1), MatrixXd::Zero(n_, n_));
    for (int k = 0; k <= n_; ++k) {
      MatrixXd& H = out[static_cast<std::size_t>(shiftIndex(k))];
      for (int a = 0; a < n_; ++a)
        for (int b = a; b < n_; ++b) H(a, b) = H(b, a) = component(u, k, a, b);
    }
    return out;
  }

  VectorXd retract(const VectorXd& x) const override {
    const double norm = x.norm();
    if (norm < 1e-14) throw NumericError("sphere retract: zero vector");
    return (r_ / norm) * x;
  }

  VectorXd param_of(const VectorXd& x) const override {
    // Undo the cyclic shift, then peel polar angles.
    VectorXd raw(n_ + 1);
    raw(0) = x(n_);
    for (int k = 1; k <= n_; ++k) raw(k) = x(k - 1);
    VectorXd u(n_);
    for (int k = 0; k < n_ - 1; ++k) {
      double tailSq = 0.0;
      for (int j = k + 1; j <= n_; ++j) tailSq += raw(j) * raw(j);
      u(k) = std::atan2(std::sqrt(tailSq), raw(k));
    }
    double last = std::atan2(raw(n_), raw(n_ - 1));
    if (last < 0.0) last += kTwoPi;
    u(n_ - 1) = last;
    return u;
  }

  std::optional<MatrixXd> declared_metric(const VectorXd& u) const override {
    MatrixXd g = MatrixXd::Zero(n_, n_);
    double prefix = r_ * r_;
    for (int a = 0; a < n_; ++a) {
      g(a, a) = prefix;
      const double s = std::sin(u(a));
      prefix *= s * s;
    }
    return g;
  }

  std::string describe() const override {
    return "sphere S^" + std::to_string(n_) + "(r=" + std::to_string(r_) + ")";
  }

 private:
  // Value of raw component k, optionally differentiated once against u_da and
  // once against u_db (-1 = no derivative).  Factor j carries sin(u_j) for
  // j < k and cos(u_k) at j = k (absent for k = n).
  double component(const VectorXd& u, int k, int da, int db) const {
    double prod = r_;
    const int factors = std::min(k + 1, n_);
    for (int j = 0; j < factors; ++j) {
      int order = (j == da ? 1 : 0) + (j == db ? 1 : 0);
      const bool isSin = j < k;
      prod *= deriv(isSin, u(j), order);
    }
    if (da >= 0 && da >= factors) return 0.0;
    if (db >= 0 && db >= factors) return 0.0;
    return prod;
  }

  static double deriv(bool isSin, double t, int order) {
    switch (order) {
      case 0: return isSin ? std::sin(t) : std::cos(t);
      case 1: return isSin ? std::cos(t) : -std::sin(t);
      default: return isSin ? -std::sin(t) : -std::cos(t);
    }
  }

  int shiftIndex(int k) const { return k == 0 ? n_ : k - 1; }

  VectorXd shift(const VectorXd& raw) const {
    VectorXd x(n_ + 1);
    for (int k = 0; k <= n_; ++k) x(shiftIndex(k)) = raw(k);
    return x;
  }

  int n_;
  double r_;
  DomainBox dom_;
};

// ---------------------------------------------------------------------------
// Product of immersions, blocks concatenated.
class ProductChart final : public ChartImpl {
 public:
  explicit ProductChart(std::vector<ImmersionChart> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw ConfigError("product: need at least one factor");
    int np = 0, mp = 0;
    for (const auto& f : factors_) {
      paramOffset_.push_back(np);
      ambientOffset_.push_back(mp);
      np += f.n();
      mp += f.m();
    }
    n_ = np;
    m_ = mp;
    dom_.lo.resize(n_);
    dom_.hi.resize(n_);
    dom_.periodic.resize(static_cast<std::size_t>(n_));
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      const auto& d = factors_[i].domain();
      const int off = paramOffset_[i];
      dom_.lo.segment(off, d.dim()) = d.lo;
      dom_.hi.segment(off, d.dim()) = d.hi;
      for (int a = 0; a < d.dim(); ++a)
        dom_.periodic[static_cast<std::size_t>(off + a)] = d.periodic[static_cast<std::size_t>(a)];
    }
  }

  int param_dim() const override { return n_; }
  int ambient_dim() const override { return m_; }
  const DomainBox& domain() const override { return dom_; }

  VectorXd eval(const VectorXd& u) const override {
    VectorXd x(m_);
    forEach([&](std::size_t i, int po, int ao, const ImmersionChart& f) {
      x.segment(ao, f.m()) = f.eval(u.segment(po, f.n()));
      (void)i;
    });
    return x;
  }

  MatrixXd jacobian(const VectorXd& u) const override {
    MatrixXd J = MatrixXd::Zero(m_, n_);
    forEach([&](std::size_t, int po, int ao, const ImmersionChart& f) {
      J.block(ao, po, f.m(), f.n()) = f.jacobian(u.segment(po, f.n()));
    });
    return J;
  }

  HessianList hessian(const VectorXd& u) const override {
    HessianList out(static_cast<std::size_t>(m_), MatrixXd::Zero(n_, n_));
    forEach([&](std::size_t, int po, int ao, const ImmersionChart& f) {
      const HessianList child = f.hessian(u.segment(po, f.n()));
      for (int k = 0; k < f.m(); ++k)
        out[static_cast<std::size_t>(ao + k)].block(po, po, f.n(), f.n()) =
            child[static_cast<std::size_t>(k)];
    });
    return out;
  }

  VectorXd retract(const VectorXd& x) const override {
    VectorXd y(m_);
    forEach([&](std::size_t, int, int ao, const ImmersionChart& f) {
      y.segment(ao, f.m()) = f.retract(x.segment(ao, f.m()));
    });
    return y;
  }

  VectorXd param_of(const VectorXd& x) const override {
    VectorXd u(n_);
    forEach([&](std::size_t, int po, int ao, const ImmersionChart& f) {
      u.segment(po, f.n()) = f.param_of(x.segment(ao, f.m()));
    });
    return u;
  }

  std::optional<MatrixXd> declared_metric(const VectorXd& u) const override {
    MatrixXd g = MatrixXd::Zero(n_, n_);
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      const auto& f = factors_[i];
      const int po = paramOffset_[i];
      auto child = f.declared_metric(u.segment(po, f.n()));
      if (!child) return std::nullopt;
      g.block(po, po, f.n(), f.n()) = *child;
    }
    return g;
  }

  bool analytic_hessian() const override {
    for (const auto& f : factors_)
      if (!f.analytic_hessian()) return false;
    return true;
  }

  std::string describe() const override {
    std::string s = "product(";
    for (std::size_t i = 0; i < factors_.size(); ++i)
      s += (i ? ", " : "") + factors_[i].describe();
    return s + ")";
  }

 private:
  template <typename F>
  void forEach(F&& f) const {
    for (std::size_t i = 0; i < factors_.size(); ++i)
      f(i, paramOffset_[i], ambientOffset_[i], factors_[i]);
  }

  std::vector<ImmersionChart> factors_;
  std::vector<int> paramOffset_, ambientOffset_;
  int n_ = 0, m_ = 0;
  DomainBox dom_;
};

// ---------------------------------------------------------------------------
// Triaxial ellipsoid in R^3.
class EllipsoidChart final : public ChartImpl {
 public:
  EllipsoidChart(double a, double b, double c) : s_(a, b, c) {
    if (!(a > 0 && b > 0 && c > 0)) throw ConfigError("ellipsoid: semiaxes must be positive");
    dom_.lo = VectorXd::Zero(2);
    dom_.hi.resize(2);
    dom_.hi << M_PI, kTwoPi;
    dom_.periodic = {false, true};
  }

  int param_dim() const override { return 2; }
  int ambient_dim() const override { return 3; }
  const DomainBox& domain() const override { return dom_; }

  VectorXd eval(const VectorXd& u) const override {
    const double st = std::sin(u(0)), ct = std::cos(u(0));
    const double sp = std::sin(u(1)), cp = std::cos(u(1));
    return Eigen::Vector3d(s_(0) * st * cp, s_(1) * st * sp, s_(2) * ct);
  }

  MatrixXd jacobian(const VectorXd& u) const override {
    const double st = std::sin(u(0)), ct = std::cos(u(0));
    const double sp = std::sin(u(1)), cp = std::cos(u(1));
    MatrixXd J(3, 2);
    J << s_(0) * ct * cp, -s_(0) * st * sp,
         s_(1) * ct * sp,  s_(1) * st * cp,
        -s_(2) * st,       0.0;
    return J;
  }

  HessianList hessian(const VectorXd& u) const override {
    const double st = std::sin(u(0)), ct = std::cos(u(0));
    const double sp = std::sin(u(1)), cp = std::cos(u(1));
    HessianList H(3, MatrixXd::Zero(2, 2));
    H[0] << -s_(0) * st * cp, -s_(0) * ct * sp, -s_(0) * ct * sp, -s_(0) * st * cp;
    H[1] << -s_(1) * st * sp, s_(1) * ct * cp, s_(1) * ct * cp, -s_(1) * st * sp;
    H[2] << -s_(2) * ct, 0.0, 0.0, 0.0;
    return H;
  }

  VectorXd retract(const VectorXd& x) const override {
    // Nearest point: y_i = x_i s_i^2 / (s_i^2 + t) with the multiplier t
    // solving F(t) = sum x_i^2 s_i^2 / (s_i^2 + t)^2 = 1, F decreasing.
    const double sMin2 = s_.minCoeff() * s_.minCoeff();
    auto F = [&](double t) {
      double sum = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double d = s_(i) * s_(i) + t;
        sum += x(i) * x(i) * s_(i) * s_(i) / (d * d);
      }
      return sum - 1.0;
    };
    double lo = -sMin2 * (1.0 - 1e-12);
    double hi = std::max(1.0, s_.maxCoeff() * x.norm());
    while (F(hi) > 0.0) hi *= 2.0;
    if (F(lo) < 0.0) {
      // x is (numerically) on the short axis inside the focal region; fall
      // back to the best boundary value.
      lo = -sMin2;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (F(mid) > 0.0 ? lo : hi) = mid;
      if (hi - lo < 1e-15 * (1.0 + std::abs(hi))) break;
    }
    const double t = 0.5 * (lo + hi);
    VectorXd y(3);
    for (int i = 0; i < 3; ++i) y(i) = x(i) * s_(i) * s_(i) / (s_(i) * s_(i) + t);
    return y;
  }

  VectorXd param_of(const VectorXd& x) const override {
    const double cx = x(0) / s_(0), cy = x(1) / s_(1), cz = x(2) / s_(2);
    VectorXd u(2);
    u(0) = std::atan2(std::hypot(cx, cy), cz);
    double phi = std::atan2(cy, cx);
    if (phi < 0.0) phi += kTwoPi;
    u(1) = phi;
    return u;
  }

  std::optional<MatrixXd> declared_metric(const VectorXd& u) const override {
    const double st = std::sin(u(0)), ct = std::cos(u(0));
    const double sp = std::sin(u(1)), cp = std::cos(u(1));
    const double a = s_(0), b = s_(1), c = s_(2);
    MatrixXd g(2, 2);
    g(0, 0) = ct * ct * (a * a * cp * cp + b * b * sp * sp) + c * c * st * st;
    g(0, 1) = g(1, 0) = (b * b - a * a) * st * ct * sp * cp;
    g(1, 1) = st * st * (a * a * sp * sp + b * b * cp * cp);
    return g;
  }

  std::string describe() const override {
    return "ellipsoid(" + std::to_string(s_(0)) + ", " + std::to_string(s_(1)) + ", " +
           std::to_string(s_(2)) + ")";
  }

 private:
  Eigen::Vector3d s_;
  DomainBox dom_;
};

// ---------------------------------------------------------------------------
// Trailing zero coordinates appended to the ambient space.
class PaddedChart final : public ChartImpl {
 public:
  PaddedChart(ImmersionChart inner, int pad) : inner_(std::move(inner)), pad_(pad) {
    if (pad < 0) throw ConfigError("pad_ambient: pad must be nonnegative");
  }

  int param_dim() const override { return inner_.n(); }
  int ambient_dim() const override { return inner_.m() + pad_; }
  const DomainBox& domain() const override { return inner_.domain(); }

  VectorXd eval(const VectorXd& u) const override {
    VectorXd x = VectorXd::Zero(ambient_dim());
    x.head(inner_.m()) = inner_.eval(u);
    return x;
  }

  MatrixXd jacobian(const VectorXd& u) const override {
    MatrixXd J = MatrixXd::Zero(ambient_dim(), inner_.n());
    J.topRows(inner_.m()) = inner_.jacobian(u);
    return J;
  }

  HessianList hessian(const VectorXd& u) const override {
    HessianList H = inner_.hessian(u);
    H.resize(static_cast<std::size_t>(ambient_dim()), MatrixXd::Zero(inner_.n(), inner_.n()));
    return H;
  }

  VectorXd retract(const VectorXd& x) const override {
    // The image sits in the zero-section of the extra coordinates, so the
    // nearest point ignores them.
    VectorXd y = VectorXd::Zero(ambient_dim());
    y.head(inner_.m()) = inner_.retract(x.head(inner_.m()));
    return y;
  }

  VectorXd param_of(const VectorXd& x) const override {
    return inner_.param_of(x.head(inner_.m()));
  }

  std::optional<MatrixXd> declared_metric(const VectorXd& u) const override {
    return inner_.declared_metric(u);
  }
  bool analytic_hessian() const override { return inner_.analytic_hessian(); }
  std::string describe() const override {
    return inner_.describe() + " + 0^" + std::to_string(pad_);
  }

 private:
  ImmersionChart inner_;
  int pad_;
};

// ---------------------------------------------------------------------------
class FunctionChart final : public ChartImpl {
 public:
  FunctionChart(int n, int m, DomainBox dom,
                std::function<VectorXd(const VectorXd&)> eval,
                std::function<MatrixXd(const VectorXd&)> jac,
                std::function<VectorXd(const VectorXd&)> retract,
                std::function<VectorXd(const VectorXd&)> paramOf,
                std::function<HessianList(const VectorXd&)> hess, std::string desc)
      : n_(n), m_(m), dom_(std::move(dom)), eval_(std::move(eval)), jac_(std::move(jac)),
        retract_(std::move(retract)), paramOf_(std::move(paramOf)), hess_(std::move(hess)),
        desc_(std::move(desc)) {}

  int param_dim() const override { return n_; }
  int ambient_dim() const override { return m_; }
  const DomainBox& domain() const override { return dom_; }
  VectorXd eval(const VectorXd& u) const override { return eval_(u); }
  MatrixXd jacobian(const VectorXd& u) const override { return jac_(u); }
  HessianList hessian(const VectorXd& u) const override {
    return hess_ ? hess_(u) : ChartImpl::hessian(u);
  }
  VectorXd retract(const VectorXd& x) const override { return retract_(x); }
  VectorXd param_of(const VectorXd& x) const override { return paramOf_(x); }
  bool analytic_hessian() const override { return static_cast<bool>(hess_); }
  std::string describe() const override { return desc_; }

 private:
  int n_, m_;
  DomainBox dom_;
  std::function<VectorXd(const VectorXd&)> eval_;
  std::function<MatrixXd(const VectorXd&)> jac_;
  std::function<VectorXd(const VectorXd&)> retract_;
  std::function<VectorXd(const VectorXd&)> paramOf_;
  std::function<HessianList(const VectorXd&)> hess_;
  std::string desc_;
};

std::vector<VectorXd> domain_samples(const ImmersionChart& chart, int perDim) {
  // Small deterministic tensor sample of the (open) domain interior.
  const auto& d = chart.domain();
  const int n = d.dim();
  std::vector<VectorXd> pts;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    VectorXd u(n);
    for (int a = 0; a < n; ++a)
      u(a) = d.lo(a) + d.span(a) * (idx[static_cast<std::size_t>(a)] + 0.61803) / perDim;
    pts.push_back(u);
    int a = 0;
    for (; a < n; ++a) {
      if (++idx[static_cast<std::size_t>(a)] < perDim) break;
      idx[static_cast<std::size_t>(a)] = 0;
    }
    if (a == n) break;
  }
  return pts;
}

}  // namespace

ImmersionChart sphere_chart(int n, double r) {
  return ImmersionChart(std::make_shared<SphereChart>(n, r));
}

ImmersionChart product_chart(std::vector<ImmersionChart> factors) {
  return ImmersionChart(std::make_shared<ProductChart>(std::move(factors)));
}

ImmersionChart clifford_torus_chart(double r1, double r2) {
  std::vector<ImmersionChart> fs;
  fs.push_back(sphere_chart(1, r1));
  fs.push_back(sphere_chart(1, r2));
  return product_chart(std::move(fs));
}

ImmersionChart ellipsoid_chart(double a, double b, double c) {
  return ImmersionChart(std::make_shared<EllipsoidChart>(a, b, c));
}

ImmersionChart pad_ambient(ImmersionChart inner, int extraZeros) {
  if (extraZeros == 0) return inner;
  return ImmersionChart(std::make_shared<PaddedChart>(std::move(inner), extraZeros));
}

ImmersionChart function_chart(int n, int m, DomainBox domain,
                              std::function<VectorXd(const VectorXd&)> eval,
                              std::function<MatrixXd(const VectorXd&)> jacobian,
                              std::function<VectorXd(const VectorXd&)> retract,
                              std::function<VectorXd(const VectorXd&)> paramOf,
                              std::function<HessianList(const VectorXd&)> hessian,
                              std::string description) {
  return ImmersionChart(std::make_shared<FunctionChart>(
      n, m, std::move(domain), std::move(eval), std::move(jacobian), std::move(retract),
      std::move(paramOf), std::move(hessian), std::move(description)));
}

SphereImmersion::SphereImmersion(ImmersionChart chart) : chart_(std::move(chart)) {
  for (const auto& u : domain_samples(chart_, 3)) {
    const double norm = chart_.eval(u).norm();
    if (std::abs(norm - 1.0) > 1e-10)
      throw ConfigError("compose_into_ambient: chart image must lie on the unit sphere");
  }
}

SphereImmersion::Forms SphereImmersion::forms_at(const VectorXd& u) const {
  Forms out;
  out.frame = frame_at(chart_, u);
  const VectorXd radial = out.frame.x / out.frame.x.norm();
  out.frame.normal = complete_normal_frame(out.frame.tangent, {radial});
  out.full = fundamental_forms(chart_, out.frame);

  // With |f| = 1, differentiating <f, df> = 0 gives <alpha(v, w), x> = -<v, w>:
  // the radial slice must be -Id.  Enforced as a consistency guard.
  const int n = chart_.n();
  if ((out.full.alpha[0] + MatrixXd::Identity(n, n)).norm() > 1e-8)
    throw NumericError("compose_into_ambient: radial slice of alpha is not -Id");

  out.beta.assign(out.full.alpha.begin() + 1, out.full.alpha.end());
  out.betaNormSq = 0.0;
  out.betaMean.resize(static_cast<Eigen::Index>(out.beta.size()));
  for (std::size_t a = 0; a < out.beta.size(); ++a) {
    out.betaNormSq += out.beta[a].squaredNorm();
    out.betaMean(static_cast<Eigen::Index>(a)) = out.beta[a].trace() / n;
  }
  return out;
}

SphereImmersion compose_into_ambient(ImmersionChart chartIntoUnitSphere) {
  return SphereImmersion(std::move(chartIntoUnitSphere));
}

SphereImmersion minimal_clifford_torus_in_s3() {
  const double r = 1.0 / std::sqrt(2.0);
  return compose_into_ambient(clifford_torus_chart(r, r));
}

const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries = {
      {"sphere", "round sphere S^n(r) in R^{n+1}; params n >= 1, r > 0"},
      {"product", "product of catalog immersions; params factors: [config, ...]"},
      {"clifford_torus", "S^1(r1) x S^1(r2) in R^4; params r1, r2 > 0"},
      {"ellipsoid", "triaxial ellipsoid in R^3; params semiaxes: [a, b, c]"},
      {"in_sphere",
       "immersion with unit-norm image viewed inside the ambient sphere; "
       "params inner: config, pad: zero coords appended"},
      {"minimal_clifford_torus",
       "S^1(1/sqrt 2) x S^1(1/sqrt 2) viewed inside S^3 (minimal)"},
  };
  return entries;
}

namespace {

ImmersionChart chart_from_config(const nlohmann::json& cfg);

ImmersionChart chart_from_config(const nlohmann::json& cfg) {
  if (!cfg.is_object() || !cfg.contains("kind"))
    throw ConfigError("config: expected an object with a \"kind\" field");
  const std::string kind = cfg.at("kind").get<std::string>();
  try {
    if (kind == "sphere") {
      return sphere_chart(cfg.at("n").get<int>(), cfg.at("r").get<double>());
    }
    if (kind == "product") {
      std::vector<ImmersionChart> fs;
      for (const auto& sub : cfg.at("factors")) fs.push_back(chart_from_config(sub));
      return product_chart(std::move(fs));
    }
    if (kind == "clifford_torus") {
      return clifford_torus_chart(cfg.at("r1").get<double>(), cfg.at("r2").get<double>());
    }
    if (kind == "ellipsoid") {
      const auto s = cfg.at("semiaxes").get<std::vector<double>>();
      if (s.size() != 3) throw ConfigError("ellipsoid: semiaxes must have 3 entries");
      return ellipsoid_chart(s[0], s[1], s[2]);
    }
    if (kind == "in_sphere") {
      ImmersionChart inner = chart_from_config(cfg.at("inner"));
      return pad_ambient(std::move(inner), cfg.value("pad", 0));
    }
    if (kind == "minimal_clifford_torus") {
      const double r = 1.0 / std::sqrt(2.0);
      return clifford_torus_chart(r, r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  throw ConfigError("config: unknown kind \"" + kind + "\"");
}

}  // namespace

ManifoldTarget target_from_config(const nlohmann::json& cfg) {
  ManifoldTarget t;
  t.chart = chart_from_config(cfg);
  const std::string kind = cfg.at("kind").get<std::string>();
  if (kind == "in_sphere" || kind == "minimal_clifford_torus")
    t.inSphere = std::make_shared<SphereImmersion>(compose_into_ambient(t.chart));
  t.configEcho = nlohmann::ordered_json::parse(cfg.dump());
  return t;
}

}  // namespace curvflow
