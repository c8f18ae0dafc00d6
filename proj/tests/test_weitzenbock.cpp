#include "curvflow/weitzenbock.hpp"

#include <doctest.h>

#include <cmath>

#include "curvflow/catalog.hpp"
#include "oracles.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace curvflow;

namespace {

FundamentalForms forms_of(const ImmersionChart& chart, const VectorXd& u) {
  return fundamental_forms(chart, frame_at(chart, u));
}

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<long>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

struct SamplePoint {
  ImmersionChart chart;
  VectorXd u;
  std::string label;
};

// One representative interior point per catalog family.
std::vector<SamplePoint> catalog_points() {
  return {
      {sphere_chart(2, 1.0), vec({1.1, 0.7}), "sphere2"},
      {sphere_chart(3, 0.7), vec({1.2, 0.9, 2.1}), "sphere3"},
      {clifford_torus_chart(1.0, 0.5), vec({0.4, 1.9}), "torus"},
      {product_chart({sphere_chart(2, 1.0), sphere_chart(1, 0.8)}), vec({1.0, 0.6, 2.2}),
       "product"},
      {ellipsoid_chart(2.0, 1.0, 1.0), vec({0.9, 0.8}), "ellipsoid"},
  };
}

double sphere_hpq_value(int n, int q, double p, double r) {
  return p * q * (p * q - n) / (2.0 * r * r);
}

}  // namespace

TEST_CASE("weitzenbock primitive and extrinsic agree with sphere constants") {
  for (int n : {2, 3, 4}) {
    for (double r : {0.5, 1.0, 2.0}) {
      const ImmersionChart chart = sphere_chart(n, r);
      VectorXd u(n);
      for (int d = 0; d < n; ++d) u(d) = 0.8 + 0.2 * d;
      const auto ff = forms_of(chart, u);
      for (int q = 1; q <= n; ++q) {
        const FrameSelection sel{oracle::random_orthogonal(n, 17 * n + q), q};
        const double expected = q * (n - q) / (r * r);
        CHECK(weitzenbock_primitive(ff, sel) == doctest::Approx(expected).epsilon(1e-10));
        CHECK(weitzenbock_extrinsic(ff, sel) == doctest::Approx(expected).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("weitzenbock sums vanish on flat tori and at q = n") {
  const auto ff = forms_of(clifford_torus_chart(1.0, 0.5), vec({0.3, 1.1}));
  const FrameSelection coord{MatrixXd::Identity(2, 2), 1};
  CHECK(weitzenbock_primitive(ff, coord) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(weitzenbock_extrinsic(ff, coord) == doctest::Approx(0.0).epsilon(1e-12));
  const FrameSelection rotated{oracle::random_orthogonal(2, 5), 1};
  CHECK(weitzenbock_extrinsic(ff, rotated) == doctest::Approx(0.0).epsilon(1e-12));

  const auto sphereForms = forms_of(sphere_chart(3, 1.0), vec({1.0, 1.3, 0.4}));
  const FrameSelection top{oracle::random_orthogonal(3, 7), 3};
  CHECK(weitzenbock_primitive(sphereForms, top) == 0.0);
  CHECK(weitzenbock_extrinsic(sphereForms, top) == 0.0);
}

TEST_CASE("frame selection validation") {
  const auto ff = forms_of(sphere_chart(2, 1.0), vec({1.1, 0.7}));
  CHECK_THROWS_AS(weitzenbock_primitive(ff, FrameSelection{MatrixXd::Identity(2, 2), 0}),
                  std::domain_error);
  CHECK_THROWS_AS(weitzenbock_primitive(ff, FrameSelection{MatrixXd::Identity(2, 2), 3}),
                  std::domain_error);
  MatrixXd skewed = MatrixXd::Identity(2, 2);
  skewed(0, 1) = 0.2;
  CHECK_THROWS_AS(weitzenbock_extrinsic(ff, FrameSelection{skewed, 1}), std::domain_error);
  CHECK_THROWS_AS(weitzenbock_extrinsic(ff, FrameSelection{MatrixXd::Identity(3, 3), 1}),
                  std::domain_error);
}

TEST_CASE("intrinsic and extrinsic weitzenbock values agree over random frames") {
  for (const auto& pt : catalog_points()) {
    CAPTURE(pt.label);
    const auto ff = forms_of(pt.chart, pt.u);
    const int n = ff.n;
    for (int s = 0; s < 100; ++s) {
      const MatrixXd Q = oracle::random_orthogonal(n, 1000 + s);
      for (int q = 1; q <= n; ++q) {
        const FrameSelection sel{Q, q};
        CHECK(std::abs(weitzenbock_primitive(ff, sel) - weitzenbock_extrinsic(ff, sel)) < 1e-8);
      }
    }
  }
}

TEST_CASE("finite-difference hessians keep the equivalence to 1e-4") {
  const ImmersionChart userChart = with_fd_hessian(ellipsoid_chart(2.0, 1.0, 1.0));
  const auto ff = forms_of(userChart, vec({0.9, 0.8}));
  for (int s = 0; s < 25; ++s) {
    const FrameSelection sel{oracle::random_orthogonal(2, 300 + s), 1};
    const double a = weitzenbock_primitive(ff, sel);
    const double b = weitzenbock_extrinsic(ff, sel);
    CHECK(std::abs(a - b) < 1e-4);
  }
}

TEST_CASE("weitzenbock operator: sphere constants, q = 1 Ricci, frame invariance") {
  for (int n : {2, 3, 4}) {
    const double r = (n == 3) ? 0.7 : 1.0;
    const ImmersionChart chart = sphere_chart(n, r);
    VectorXd u(n);
    for (int d = 0; d < n; ++d) u(d) = 1.0 + 0.15 * d;
    const auto ff = forms_of(chart, u);
    for (int q = 0; q <= n; ++q) {
      const auto op = weitzenbock_operator(ff, q);
      const double expected = q * (n - q) / (r * r);
      const long dim = binomial(n, q);
      CHECK((op - expected * MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  for (const auto& pt : catalog_points()) {
    CAPTURE(pt.label);
    const auto ff = forms_of(pt.chart, pt.u);
    CHECK((weitzenbock_operator(ff, 1) - ricci_matrix(ff)).cwiseAbs().maxCoeff() < 1e-12);

    // Same operator from any orthonormal normal basis.
    const MatrixXd rot = oracle::random_orthogonal(ff.codim, 91);
    const auto op = weitzenbock_operator(ff, std::min(2, ff.n));
    const auto opRot = weitzenbock_operator(ff, std::min(2, ff.n), rot);
    CHECK((op - opRot).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("operator quadratic form matches the frame sum on decomposables") {
  for (const auto& pt : catalog_points()) {
    CAPTURE(pt.label);
    const auto ff = forms_of(pt.chart, pt.u);
    const int n = ff.n;
    for (int s = 0; s < 40; ++s) {
      const MatrixXd Q = oracle::random_orthogonal(n, 4000 + s);
      for (int q = 1; q <= n; ++q) {
        const auto V = wedge(Q.leftCols(q));
        const auto op = weitzenbock_operator(ff, q);
        const double viaOperator = V.coords.dot(op * V.coords);
        const double viaFrames = weitzenbock_primitive(ff, FrameSelection{Q, q});
        CHECK(std::abs(viaOperator - viaFrames) < 1e-8);
      }
    }
  }
}

TEST_CASE("hodge duality: operator spectra agree for q and n - q") {
  for (const auto& pt : catalog_points()) {
    CAPTURE(pt.label);
    const auto ff = forms_of(pt.chart, pt.u);
    for (int q = 1; q < ff.n; ++q) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> a(weitzenbock_operator(ff, q));
      Eigen::SelfAdjointEigenSolver<MatrixXd> b(weitzenbock_operator(ff, ff.n - q));
      REQUIRE(a.eigenvalues().size() == b.eigenvalues().size());
      CHECK((a.eigenvalues() - b.eigenvalues()).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("hpq quadratic form: sphere value and input validation") {
  const auto ff = forms_of(sphere_chart(3, 1.0), vec({1.0, 1.3, 0.4}));
  for (int q = 1; q <= 3; ++q) {
    for (double p : {0.5, 1.0, 2.0, 3.0}) {
      const MatrixXd Q = oracle::random_orthogonal(3, 11 * q + static_cast<int>(4 * p));
      const auto V = wedge(Q.leftCols(q));
      CHECK(hpq_quadratic(ff, V, p) == doctest::Approx(q * (p * q - 3)).epsilon(1e-10));
    }
  }

  auto V = wedge(MatrixXd::Identity(3, 3).leftCols(1));
  V.coords *= 2.0;
  CHECK_THROWS_AS(hpq_quadratic(ff, V, 1.0), std::domain_error);

  const auto ff4 = forms_of(sphere_chart(4, 1.0), vec({1.0, 1.3, 0.4, 0.9}));
  MultiVector<double> sum;
  sum.q = 2;
  sum.n = 4;
  sum.coords = VectorXd::Zero(6);
  const auto basis = basis_indices(2, 4);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis[i] == MultiIndex{0, 1} || basis[i] == MultiIndex{2, 3})
      sum.coords(static_cast<long>(i)) = 1.0 / std::sqrt(2.0);
  }
  CHECK_THROWS_AS(hpq_quadratic(ff4, sum, 1.0), std::domain_error);  // not decomposable
}

TEST_CASE("hpq quadratic form at p = 2, q = 1 matches the stability matrix") {
  const auto ff = forms_of(ellipsoid_chart(2.0, 1.0, 1.0), vec({0.9, 0.8}));
  MatrixXd quad = -ricci_matrix(ff);
  for (const auto& A : ff.alpha) quad += A * A;
  for (int s = 0; s < 10; ++s) {
    const MatrixXd Q = oracle::random_orthogonal(2, 700 + s);
    const auto V = wedge(Q.leftCols(1));
    const double expected = Q.col(0).dot(quad * Q.col(0));
    CHECK(hpq_quadratic(ff, V, 2.0) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("rhat0: exact cases and optimizer") {
  for (int n : {2, 3, 4}) {
    const auto ff = forms_of(sphere_chart(n, 1.0), [&] {
      VectorXd u(n);
      for (int d = 0; d < n; ++d) u(d) = 1.0 + 0.1 * d;
      return u;
    }());
    for (int q = 1; q <= n; ++q) {
      const auto res = rhat0(ff, q);
      CHECK(res.converged);
      CHECK(res.value == doctest::Approx(q * (n - q)).epsilon(1e-7));
    }
  }

  const auto torus = forms_of(clifford_torus_chart(1.0, 0.5), vec({0.3, 1.1}));
  CHECK(rhat0(torus, 1).value == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(rhat0(torus, 2).value == 0.0);
}

TEST_CASE("rhat0 at q = n - 1 matches the operator's smallest eigenvalue") {
  const auto ff = forms_of(product_chart({sphere_chart(2, 1.0), sphere_chart(1, 0.8)}),
                           vec({1.0, 0.6, 2.2}));
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(weitzenbock_operator(ff, 2));
  const auto res = rhat0(ff, 2);
  CHECK(res.value == doctest::Approx(eig.eigenvalues()(0)).epsilon(1e-6));
}

TEST_CASE("rhat0 never loses to random frame search") {
  const auto ff = forms_of(product_chart({sphere_chart(2, 1.0), sphere_chart(1, 0.8)}),
                           vec({1.0, 0.6, 2.2}));
  const auto res = rhat0(ff, 2);
  const double brute = oracle::brute_force_frames(
      3,
      [&](const MatrixXd& Q) { return weitzenbock_extrinsic(ff, FrameSelection{Q, 2}); },
      false, 10000, 77);
  CHECK(res.value <= brute + 1e-3);
}

TEST_CASE("hpq closed form on spheres") {
  for (int n : {2, 3}) {
    for (double r : {0.5, 1.0}) {
      const ImmersionChart chart = sphere_chart(n, r);
      VectorXd u(n);
      for (int d = 0; d < n; ++d) u(d) = 0.9 + 0.2 * d;
      const auto ff = forms_of(chart, u);
      for (int q = 1; q <= n; ++q) {
        for (double p : {0.5, 1.0, 2.0}) {
          CAPTURE(n);
          CAPTURE(q);
          CAPTURE(p);
          CAPTURE(r);
          const auto res = hpq(ff, p, q);
          CHECK(res.value == doctest::Approx(sphere_hpq_value(n, q, p, r)).epsilon(1e-8));
        }
      }
    }
  }
}

TEST_CASE("hpq on the square flat torus attains 1/4 at the diagonal frame") {
  const auto ff = forms_of(clifford_torus_chart(1.0, 1.0), vec({0.2, 1.7}));
  const auto res = hpq(ff, 1.0, 1);
  CHECK(res.value == doctest::Approx(0.25).epsilon(1e-8));
  // Achieving direction bisects the coordinate axes.
  const double c = std::abs(res.frame(0, 0));
  CHECK(c == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-4));

  CHECK(hpq(ff, 0.0, 1).value == 0.0);
}

TEST_CASE("hpq never loses to random frame search") {
  const auto ff = forms_of(ellipsoid_chart(2.0, 1.0, 1.0), vec({0.9, 0.8}));
  const auto res = hpq(ff, 1.0, 1);
  const double brute = oracle::brute_force_frames(
      2,
      [&](const MatrixXd& Q) { return 0.5 * hpq_quadratic(ff, wedge(Q.leftCols(1)), 1.0); },
      true, 10000, 33);
  CHECK(res.value >= brute - 1e-3);
}

TEST_CASE("harmonic stability potential") {
  for (int n : {2, 3, 4}) {
    VectorXd u(n);
    for (int d = 0; d < n; ++d) u(d) = 1.0 + 0.1 * d;
    const auto ff = forms_of(sphere_chart(n, 1.0), u);
    CHECK(harmonic_stability_potential(ff) == doctest::Approx(n - 2.0).epsilon(1e-10));
  }
  const auto ffr = forms_of(sphere_chart(2, 2.0), vec({1.0, 0.5}));
  CHECK(harmonic_stability_potential(ffr) == doctest::Approx(0.0).epsilon(1e-12));

  const auto torus = forms_of(clifford_torus_chart(1.0, 0.5), vec({0.3, 1.1}));
  CHECK(harmonic_stability_potential(torus) == doctest::Approx(-4.0).epsilon(1e-10));

  // Sign-flipped p = 2, q = 1 potential.
  const auto ell = forms_of(ellipsoid_chart(2.0, 1.0, 1.0), vec({0.9, 0.8}));
  CHECK(harmonic_stability_potential(ell) == doctest::Approx(-hpq(ell, 2.0, 1).value).epsilon(1e-10));
}

TEST_CASE("sphere homology margin: geodesic spheres and the minimal torus") {
  const auto geodesic = target_from_config(
      {{"kind", "in_sphere"}, {"inner", {{"kind", "sphere"}, {"n", 2}, {"r", 1.0}}}, {"pad", 1}});
  const VectorXd u2 = vec({1.1, 0.7});
  const auto margin = sphere_homology_margin(geodesic, u2, 1);
  CHECK(margin.value == doctest::Approx(1.0).epsilon(1e-8));

  const auto torus = target_from_config({{"kind", "minimal_clifford_torus"}});
  const auto tm = sphere_homology_margin(torus, vec({0.4, 1.9}), 1);
  CHECK(tm.value == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(tm.value <= 0.0);  // H_1(T^2) != 0, criterion must fail

  const auto plain = target_from_config({{"kind", "sphere"}, {"n", 2}, {"r", 1.0}});
  CHECK_THROWS_AS(sphere_homology_margin(plain, u2, 1), std::domain_error);
}

TEST_CASE("sphere route equals flat-space route: margin = -2 h_1^q") {
  struct Case {
    ManifoldTarget target;
    VectorXd u;
  };
  std::vector<Case> cases;
  cases.push_back({target_from_config({{"kind", "in_sphere"},
                                       {"inner", {{"kind", "sphere"}, {"n", 2}, {"r", 1.0}}},
                                       {"pad", 1}}),
                   vec({1.1, 0.7})});
  cases.push_back({target_from_config({{"kind", "minimal_clifford_torus"}}), vec({0.4, 1.9})});
  for (auto& c : cases) {
    const int n = c.target.chart.n();
    const auto ff = forms_of(c.target.chart, c.u);
    for (int q = 1; q < n; ++q) {
      const double flatRoute = 2.0 * hpq(ff, 1.0, q).value;
      const double sphereRoute = -sphere_homology_margin(c.target, c.u, q).value;
      CHECK(std::abs(flatRoute - sphereRoute) < 1e-6);
    }
  }
}

TEST_CASE("minimal sphere margin: values, identity chain, minimality gate") {
  const auto torus = minimal_clifford_torus_in_s3();
  const auto forms = torus.forms_at(vec({0.4, 1.9}));
  const auto res = minimal_sphere_margin(forms, 1);
  CHECK(res.value == doctest::Approx(-0.5).epsilon(1e-8));
  CHECK(res.chainResidual < 1e-8);

  const auto geodesic = target_from_config(
      {{"kind", "in_sphere"}, {"inner", {{"kind", "sphere"}, {"n", 2}, {"r", 1.0}}}, {"pad", 1}});
  const auto gforms = geodesic.inSphere->forms_at(vec({1.1, 0.7}));
  const auto gres = minimal_sphere_margin(gforms, 1);
  CHECK(gres.value == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(gres.chainResidual < 1e-8);

  // q = 1 margin is Ric_min - (n-1)/2.
  Eigen::SelfAdjointEigenSolver<MatrixXd> ric(ricci_matrix(gforms.full));
  CHECK(gres.value == doctest::Approx(ric.eigenvalues()(0) - 0.5).epsilon(1e-8));

  // Same torus, non-minimal radii: rejected.
  const auto skewed = target_from_config(
      {{"kind", "in_sphere"}, {"inner", {{"kind", "clifford_torus"}, {"r1", 0.8}, {"r2", 0.6}}}});
  const auto sforms = skewed.inSphere->forms_at(vec({0.4, 1.9}));
  CHECK_THROWS_AS(minimal_sphere_margin(sforms, 1), std::domain_error);
}

TEST_CASE("form-energy dominates the off-block sum at every frame") {
  // ||alpha||^2/2 - (n/2)|H|^2 >= sum_{j<=q<l} |alpha(v_j, v_l)|^2.
  for (const auto& pt : catalog_points()) {
    CAPTURE(pt.label);
    const auto ff = forms_of(pt.chart, pt.u);
    const int n = ff.n;
    const double lhs = 0.5 * ff.hsNormSq - 0.5 * n * ff.mean.squaredNorm();
    for (int s = 0; s < 30; ++s) {
      const MatrixXd Q = oracle::random_orthogonal(n, 8000 + s);
      for (int q = 1; q < n; ++q) {
        double offBlock = 0.0;
        for (const auto& A : ff.alpha) {
          const MatrixXd M = Q.transpose() * A * Q;
          for (int j = 0; j < q; ++j)
            for (int l = q; l < n; ++l) offBlock += M(j, l) * M(j, l);
        }
        CHECK(lhs >= offBlock - 1e-10);
      }
    }
  }
}

TEST_CASE("quadrature grids integrate catalog areas") {
  {
    const ImmersionChart sphere = sphere_chart(2, 1.0);
    const auto grid = make_grid(sphere.domain(), 24);
    CHECK(metric_weights(sphere, grid).sum() == doctest::Approx(4.0 * M_PI).epsilon(0.01));
  }
  {
    const ImmersionChart torus = clifford_torus_chart(1.0, 0.5);
    const auto grid = make_grid(torus.domain(), 16);
    const double area = 4.0 * M_PI * M_PI * 1.0 * 0.5;
    CHECK(metric_weights(torus, grid).sum() == doctest::Approx(area).epsilon(0.01));
  }
  {
    // Prolate spheroid, semi-axes (2, 1, 1).
    const ImmersionChart ell = ellipsoid_chart(2.0, 1.0, 1.0);
    const auto grid = make_grid(ell.domain(), 32);
    const double e = std::sqrt(3.0) / 2.0;
    const double area = 2.0 * M_PI * (1.0 + 2.0 * std::asin(e) / e);
    CHECK(metric_weights(ell, grid).sum() == doctest::Approx(area).epsilon(0.01));
  }
}

TEST_CASE("field interpolation reproduces samples and wraps periodically") {
  const ImmersionChart sphere = sphere_chart(2, 1.0);
  const auto grid = make_grid(sphere.domain(), 20);
  const auto field = make_field(
      sphere, grid, [&](const VectorXd& u, long) { return std::cos(u(0)); }, 0, 0, "height");
  for (long i : {0L, 7L, 123L, 399L}) {
    CHECK(field(grid.point(i)) == doctest::Approx(field.values(i)).epsilon(1e-12));
  }
  const VectorXd mid = vec({1.0, 3.0});
  CHECK(field(mid) == doctest::Approx(std::cos(1.0)).epsilon(1e-2));
  const VectorXd wrapped = vec({1.0, 3.0 + 2.0 * M_PI});
  CHECK(field(wrapped) == doctest::Approx(field(mid)).epsilon(1e-12));
}

TEST_CASE("negative part norm") {
  const ImmersionChart sphere = sphere_chart(2, 1.0);
  const auto grid = make_grid(sphere.domain(), 24);
  const auto constant = make_field(
      sphere, grid, [](const VectorXd&, long) { return 3.0; }, 0, 0, "const");
  CHECK(negative_part_norm(constant, 1.0, 1.0) == 0.0);
  const double vol = constant.volume();
  CHECK(negative_part_norm(constant, 5.0, 1.0) == doctest::Approx(2.0 * vol).epsilon(1e-12));

  // Dip below w only near the south pole; refinement oracle at doubled
  // resolution.
  const auto dip = [](const VectorXd& u, long) { return -std::cos(M_PI - u(0)); };
  const auto coarse = make_field(sphere, grid, dip, 0, 0, "dip");
  const auto fine = make_field(sphere, make_grid(sphere.domain(), 48), dip, 0, 0, "dip");
  const double a = negative_part_norm(coarse, -0.5, 1.0);
  const double b = negative_part_norm(fine, -0.5, 1.0);
  CHECK(std::abs(a - b) / b < 0.01);

  CHECK_THROWS_AS(negative_part_norm(coarse, 0.0, 0.0), std::domain_error);
}

TEST_CASE("refined extrema beat the raw grid") {
  const ImmersionChart sphere = sphere_chart(2, 1.0);
  const auto grid = make_grid(sphere.domain(), 16);
  const auto height = [](const VectorXd& u, long) { return std::cos(u(0)); };
  const auto field = make_field(sphere, grid, height, 0, 0, "height");
  const auto lo = refined_minimum(field, [&](const VectorXd& u) { return std::cos(u(0)); });
  const auto hi = refined_maximum(field, [&](const VectorXd& u) { return std::cos(u(0)); });
  CHECK(lo.value <= field.minValue());
  CHECK(lo.value >= -1.0 - 1e-12);
  CHECK(hi.value >= field.maxValue());
  CHECK(hi.value <= 1.0 + 1e-12);
}

TEST_CASE("potential fields over grids: sphere and torus constants") {
  const ImmersionChart sphere = sphere_chart(2, 1.0);
  const auto grid = make_grid(sphere.domain(), 6);
  const auto h11 = hpq_field(sphere, grid, 1.0, 1, 42);
  CHECK((h11.values.array() + 0.5).abs().maxCoeff() < 1e-8);
  const auto gap = weitzenbock_gap_field(sphere, grid, 1, 42);
  CHECK((gap.values.array() - 1.0).abs().maxCoeff() < 1e-8);

  const ImmersionChart torus = clifford_torus_chart(1.0, 1.0);
  const auto tgrid = make_grid(torus.domain(), 5);
  const auto tgap = weitzenbock_gap_field(torus, tgrid, 1, 42);
  CHECK((tgap.values.array() + 0.5).abs().maxCoeff() < 1e-8);
  CHECK(tgap.maxValue() <= 0.0);

  const auto stability = harmonic_stability_field(sphere, grid);
  CHECK(stability.values.cwiseAbs().maxCoeff() < 1e-10);
}
