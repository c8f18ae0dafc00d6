#include "curvflow/spectral.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "curvflow/catalog.hpp"
#include "oracles.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace curvflow;

namespace {

// Dense reference for the same discretization: eigenvalues of
// M^{-1/2} (K + M diag(v)) M^{-1/2}.
VectorXd dense_spectrum(const DiscreteOperator& op, const VectorXd& v) {
  const VectorXd isqrt = op.mass.cwiseSqrt().cwiseInverse();
  MatrixXd C = MatrixXd(op.stiffness);
  C = isqrt.asDiagonal() * C * isqrt.asDiagonal();
  C += MatrixXd(v.asDiagonal());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
  return eig.eigenvalues();
}

PotentialField sampled_field(const ImmersionChart& chart, const ParamGrid& grid,
                             const std::function<double(const VectorXd&)>& f) {
  return make_field(chart, grid, [&](const VectorXd& u, long) { return f(u); });
}

}  // namespace

TEST_CASE("laplacian matrix: symmetry, kernel, coarse-grid refusal") {
  const ImmersionChart sphere = sphere_chart(2, 1.0);
  const auto grid = make_grid(sphere.domain(), 24);
  const auto op = laplacian_matrix(sphere, grid);

  const Eigen::SparseMatrix<double> skew =
      Eigen::SparseMatrix<double>(op.stiffness.transpose()) - op.stiffness;
  double asym = 0.0;
  for (int k = 0; k < skew.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(skew, k); it; ++it)
      asym = std::max(asym, std::abs(it.value()));
  CHECK(asym < 1e-10);

  const VectorXd ones = VectorXd::Ones(grid.size());
  CHECK((op.stiffness * ones).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(op.mass.minCoeff() > 0.0);

  CHECK_THROWS_AS(laplacian_matrix(sphere, make_grid(sphere.domain(), 6)), ConfigError);
}

TEST_CASE("flat torus spectrum matches the Fourier lattice") {
  const ImmersionChart torus = clifford_torus_chart(1.0, 1.0);
  const auto op = laplacian_matrix(torus, make_grid(torus.domain(), 64));
  const auto pairs = eigs_smallest(op, VectorXd(), 13);
  const std::vector<double> expected = {0, 1, 1, 1, 1, 2, 2, 2, 2, 4, 4, 4, 4};
  std::vector<double> got;
  for (const auto& p : pairs) {
    CHECK(p.converged);
    got.push_back(p.value);
  }
  std::sort(got.begin(), got.end());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i] == 0.0)
      CHECK(std::abs(got[i]) < 1e-9);
    else
      CHECK(std::abs(got[i] - expected[i]) / expected[i] < 0.01);
  }
}

TEST_CASE("sphere ground tone is 2 and refines stably") {
  const ImmersionChart sphere = sphere_chart(2, 1.0);
  const auto coarse = laplacian_matrix(sphere, make_grid(sphere.domain(), {32, 64}));
  const auto fine = laplacian_matrix(sphere, make_grid(sphere.domain(), {64, 128}));
  const double l1coarse = eigs_smallest(coarse, VectorXd(), 2)[1].value;
  const double l1fine = eigs_smallest(fine, VectorXd(), 2)[1].value;
  CHECK(std::abs(l1fine - 2.0) / 2.0 < 0.01);
  CHECK(std::abs(l1fine - l1coarse) / l1fine < 0.005);
}

TEST_CASE("constant potential shifts the spectrum exactly") {
  const ImmersionChart sphere = sphere_chart(2, 1.0);
  const auto grid = make_grid(sphere.domain(), 24);
  const auto field = sampled_field(sphere, grid, [](const VectorXd&) { return -0.5; });
  const auto res = schrodinger_lambda_min(sphere, field, grid);
  CHECK(res.converged);
  CHECK(res.value == doctest::Approx(1.0).epsilon(1e-9));

  // Sphere closed-form potentials: lambda(h_p^q) = -2 h_p^q for constants.
  const auto h21 = sampled_field(sphere, grid, [](const VectorXd&) { return 0.0; });
  CHECK(std::abs(schrodinger_lambda_min(sphere, h21, grid).value) < 1e-9);
}

TEST_CASE("mixed-term assembly agrees with a dense solve on the ellipsoid") {
  const ImmersionChart ell = ellipsoid_chart(2.0, 1.0, 1.0);
  const auto grid = make_grid(ell.domain(), {20, 24});
  const auto op = laplacian_matrix(ell, grid);

  const VectorXd ones = VectorXd::Ones(grid.size());
  CHECK((op.stiffness * ones).cwiseAbs().maxCoeff() < 1e-8);

  VectorXd v(grid.size());
  for (long i = 0; i < grid.size(); ++i) v(i) = 0.2 * ell.eval(grid.point(i))(2);
  const auto pairs = eigs_smallest(op, v, 3);
  const VectorXd dense = dense_spectrum(op, v);
  for (int k = 0; k < 3; ++k) {
    CHECK(pairs[k].converged);
    CHECK(std::abs(pairs[k].value - dense(k)) < 1e-6);
  }
}

TEST_CASE("height potential on the sphere: dense oracle and ground-state sign") {
  const ImmersionChart sphere = sphere_chart(2, 1.0);
  const auto grid = make_grid(sphere.domain(), {24, 24});
  const auto h = sampled_field(sphere, grid,
                               [&](const VectorXd& u) { return 0.1 * sphere.eval(u)(2); });
  const auto res = schrodinger_lambda_min(sphere, h, grid);
  CHECK(res.converged);

  const auto op = laplacian_matrix(sphere, grid);
  const VectorXd dense = dense_spectrum(op, -2.0 * h.values);
  CHECK(std::abs(res.value - dense(0)) < 1e-6);

  // Ground state of a Schroedinger operator has a fixed sign.
  CHECK(((res.function.array() > 0).all() || (res.function.array() < 0).all()));
}

TEST_CASE("rayleigh quotients dominate the reported minimum") {
  const ImmersionChart sphere = sphere_chart(2, 1.0);
  const auto grid = make_grid(sphere.domain(), 16);
  const auto op = laplacian_matrix(sphere, grid);
  VectorXd v(grid.size());
  for (long i = 0; i < grid.size(); ++i) v(i) = 0.3 * std::sin(grid.point(i)(0));
  const double lmin = eigs_smallest(op, v, 1).front().value;
  for (int s = 0; s < 12; ++s) {
    const VectorXd psi = oracle::random_matrix(static_cast<int>(grid.size()), 60 + s).col(0);
    const double num = psi.dot(op.stiffness * psi) + psi.dot(op.mass.cwiseProduct(v.cwiseProduct(psi)));
    const double den = psi.dot(op.mass.cwiseProduct(psi));
    CHECK(num / den >= lmin - 1e-10);
  }
}

TEST_CASE("positivity verdicts: strict margins only") {
  const ImmersionChart sphere = sphere_chart(2, 1.0);
  const auto grid = make_grid(sphere.domain(), 24);

  // Delta - 2 h with h == -1/2, i.e. Delta + 1 > 0: margin 1.
  const auto plusOne = sampled_field(sphere, grid, [](const VectorXd&) { return 1.0; });
  const auto good = positivity_verdict(sphere, plusOne, grid);
  CHECK(good.positive);
  CHECK(good.lambdaMin == doctest::Approx(1.0).epsilon(1e-9));

  const auto zero = sampled_field(sphere, grid, [](const VectorXd&) { return 0.0; });
  CHECK_FALSE(positivity_verdict(sphere, zero, grid).positive);

  const ImmersionChart torus = clifford_torus_chart(1.0, 1.0);
  const auto tgrid = make_grid(torus.domain(), 16);
  // Delta - 2 h_1^1 on the square torus, h_1^1 == 1/4: lambda = -1/2 < 0.
  const auto minusHalf = sampled_field(torus, tgrid, [](const VectorXd&) { return -0.5; });
  const auto bad = positivity_verdict(torus, minusHalf, tgrid);
  CHECK_FALSE(bad.positive);
  CHECK(bad.lambdaMin == doctest::Approx(-0.5).epsilon(1e-9));
}

TEST_CASE("ambient coordinate functions are laplacian eigenfunctions via the gradient fields") {
  // Delta f = -sum_i X^i(X^i f) for f = x_k restricted to S^n(r), giving
  // (n/r^2) x_k; directional finite differences along the fields.
  for (double r : {1.0, 2.0}) {
    const ImmersionChart sphere = sphere_chart(2, r);
    const VectorXd u = (VectorXd(2) << 1.1, 0.7).finished();
    const auto fp = frame_at(sphere, u);
    const int m = sphere.m();
    const double eps = 1e-5;
    for (int k = 0; k < m; ++k) {
      double lap = 0.0;
      for (int i = 0; i < m; ++i) {
        // g(x) = (P(x) e_i)_k = X^i(f), differentiated along X^i.
        const auto g = [&](const VectorXd& x) {
          const auto fpx = frame_at(sphere, sphere.param_of(x));
          return tangent_projector(fpx)(k, i);
        };
        const VectorXd dir = tangent_projector(fp).col(i);
        const VectorXd fwd = sphere.retract(fp.x + eps * dir);
        const VectorXd bwd = sphere.retract(fp.x - eps * dir);
        lap -= (g(fwd) - g(bwd)) / (2.0 * eps);
      }
      const double expected = 2.0 / (r * r) * fp.x(k);
      CHECK(std::abs(lap - expected) < 1e-3 * std::max(1.0, std::abs(expected)));
    }
  }
}
