#include "curvflow/spectral.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "curvflow/catalog.hpp"
#include "curvflow/parallel.hpp"
#include "curvflow/rng.hpp"

namespace curvflow {

namespace {

using Triplet = Eigen::Triplet<double>;

// sqrt(det g) * g^{ab} column b at a parameter point; solves with the full
// metric so mixed terms are exact.
Eigen::VectorXd scaled_inverse_metric_col(const ImmersionChart& chart, const Eigen::VectorXd& u,
                                          int b) {
  const Eigen::MatrixXd jac = chart.jacobian(u);
  const Eigen::MatrixXd g = jac.transpose() * jac;
  const double det = g.determinant();
  if (det <= 0) throw NumericError("degenerate metric while assembling the Laplacian");
  Eigen::VectorXd col = g.ldlt().solve(Eigen::VectorXd::Unit(g.rows(), b));
  return std::sqrt(det) * col;
}

bool metric_has_mixed_terms(const ImmersionChart& chart, const ParamGrid& grid) {
  // Sampled test; catalog charts are either orthogonal or triaxial.
  const long total = grid.size();
  const long stride = std::max(total / 17, 1L);
  for (long i = 0; i < total; i += stride) {
    const Eigen::MatrixXd jac = chart.jacobian(grid.point(i));
    const Eigen::MatrixXd g = jac.transpose() * jac;
    const double scale = g.diagonal().maxCoeff();
    for (int a = 0; a < g.rows(); ++a)
      for (int b = a + 1; b < g.cols(); ++b)
        if (std::abs(g(a, b)) > 1e-10 * scale) return true;
  }
  return false;
}

}  // namespace

int default_spectral_points(int dim) {
  switch (dim) {
    case 1: return 256;
    case 2: return 64;
    default: return 20;
  }
}

DiscreteOperator laplacian_matrix(const ImmersionChart& chart, const ParamGrid& grid) {
  const int d = grid.dim();
  if (d != chart.n()) throw std::domain_error("laplacian_matrix: grid rank mismatch");
  for (int s : grid.shape)
    if (s < 8) throw ConfigError("spectral grid too coarse: need at least 8 points per axis");

  DiscreteOperator op;
  op.grid = grid;
  op.mass = metric_weights(chart, grid);

  const long total = grid.size();
  std::vector<Triplet> trips;

  // Face fluxes along each axis: for the face between cells i and j at face
  // point uf, weight w = sqrt(g) g^{aa}(uf) * cellvol / h_a^2 enters the
  // Dirichlet form as w (f_j - f_i)^2.
  const double cellVol = grid.cell();
  for (int a = 0; a < d; ++a) {
    const bool wrap = grid.domain.periodic[a];
    const int count = grid.shape[a];
    const double h = grid.steps[a];
    const double scale = cellVol / (h * h);
    struct Face {
      long neighbor = -1;
      double weight = 0.0;
    };
    std::vector<Face> faces(total);  // one owner face per cell (to its +a neighbor)
    parallel_for(total, [&](long flat) {
      auto idx = grid.unravel(flat);
      const int i = idx[a];
      if (!wrap && i == count - 1) return;  // boundary face: natural closure
      Eigen::VectorXd uf = grid.point(idx);
      uf(a) = grid.domain.lo(a) + (i + 1) * h;  // face between centers i, i+1
      auto jdx = idx;
      jdx[a] = (i + 1) % count;
      faces[flat] = {grid.ravel(jdx), scale * scaled_inverse_metric_col(chart, uf, a)(a)};
    });
    for (long flat = 0; flat < total; ++flat) {
      if (faces[flat].neighbor < 0) continue;
      const long j = faces[flat].neighbor;
      const double w = faces[flat].weight;
      trips.emplace_back(flat, flat, w);
      trips.emplace_back(j, j, w);
      trips.emplace_back(flat, j, -w);
      trips.emplace_back(j, flat, -w);
    }
  }

  // Mixed metric terms via the symmetric form D_a^T diag(m) D_b + transpose,
  // centered differences (one-sided at non-periodic edges).  Constants stay
  // in the kernel because every difference stencil sums to zero.
  if (metric_has_mixed_terms(chart, grid)) {
    const auto difference = [&](int axis) {
      Eigen::SparseMatrix<double> D(total, total);
      std::vector<Triplet> dt;
      const int count = grid.shape[axis];
      const double h = grid.steps[axis];
      const bool wrap = grid.domain.periodic[axis];
      for (long flat = 0; flat < total; ++flat) {
        auto idx = grid.unravel(flat);
        const int i = idx[axis];
        auto plus = idx, minus = idx;
        if (wrap) {
          plus[axis] = (i + 1) % count;
          minus[axis] = (i - 1 + count) % count;
          dt.emplace_back(flat, grid.ravel(plus), 0.5 / h);
          dt.emplace_back(flat, grid.ravel(minus), -0.5 / h);
        } else if (i == 0) {
          plus[axis] = 1;
          dt.emplace_back(flat, grid.ravel(plus), 1.0 / h);
          dt.emplace_back(flat, flat, -1.0 / h);
        } else if (i == count - 1) {
          minus[axis] = count - 2;
          dt.emplace_back(flat, flat, 1.0 / h);
          dt.emplace_back(flat, grid.ravel(minus), -1.0 / h);
        } else {
          plus[axis] = i + 1;
          minus[axis] = i - 1;
          dt.emplace_back(flat, grid.ravel(plus), 0.5 / h);
          dt.emplace_back(flat, grid.ravel(minus), -0.5 / h);
        }
      }
      D.setFromTriplets(dt.begin(), dt.end());
      return D;
    };
    std::vector<Eigen::SparseMatrix<double>> diffs;
    for (int a = 0; a < d; ++a) diffs.push_back(difference(a));
    for (int a = 0; a < d; ++a) {
      for (int b = a + 1; b < d; ++b) {
        Eigen::VectorXd mixed(total);
        parallel_for(total, [&](long i) {
          mixed(i) = cellVol * scaled_inverse_metric_col(chart, grid.point(i), b)(a);
        });
        if (mixed.cwiseAbs().maxCoeff() < 1e-14) continue;
        const Eigen::SparseMatrix<double> cross =
            Eigen::SparseMatrix<double>(diffs[a].transpose()) * mixed.asDiagonal() * diffs[b];
        const Eigen::SparseMatrix<double> sym =
            cross + Eigen::SparseMatrix<double>(cross.transpose());
        for (int k = 0; k < sym.outerSize(); ++k)
          for (Eigen::SparseMatrix<double>::InnerIterator it(sym, k); it; ++it)
            trips.emplace_back(it.row(), it.col(), it.value());
      }
    }
  }

  op.stiffness.resize(total, total);
  op.stiffness.setFromTriplets(trips.begin(), trips.end());
  op.stiffness.makeCompressed();
  return op;
}

std::vector<EigenPair> eigs_smallest(const DiscreteOperator& op, const Eigen::VectorXd& potential,
                                     int count, int maxIters, double tol) {
  const long total = op.grid.size();
  Eigen::VectorXd v = potential.size() ? potential : Eigen::VectorXd::Zero(total);
  if (v.size() != total) throw std::domain_error("eigs_smallest: potential size mismatch");

  // Symmetrized operator C = M^{-1/2} K M^{-1/2} + diag(v).
  const Eigen::VectorXd isqrt = op.mass.cwiseSqrt().cwiseInverse();
  Eigen::SparseMatrix<double> C = op.stiffness;
  for (int k = 0; k < C.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(C, k); it; ++it)
      it.valueRef() *= isqrt(it.row()) * isqrt(it.col());
  Eigen::SparseMatrix<double> diag(total, total);
  {
    std::vector<Triplet> dt;
    dt.reserve(total);
    for (long i = 0; i < total; ++i) dt.emplace_back(i, i, v(i));
    diag.setFromTriplets(dt.begin(), dt.end());
  }
  C += diag;

  // Shift strictly below the spectrum: the Dirichlet part is >= -rounding, so
  // min(v) minus a margin is safe, and the margin keeps the iteration
  // contraction strong.
  const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
  const double sigma = v.minCoeff() - 0.1 * scale;
  Eigen::SparseMatrix<double> identity(total, total);
  identity.setIdentity();
  const Eigen::SparseMatrix<double> shifted = C - sigma * identity;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(shifted);
  if (solver.info() != Eigen::Success)
    throw NumericError("eigs_smallest: factorization of the shifted operator failed");

  // Subspace iteration with Rayleigh-Ritz extraction; the guard columns keep
  // clustered eigenvalues (degenerate sphere/torus modes) converging at the
  // gap to the first eigenvalue outside the block.
  const int guard = std::max(2, count / 2);
  const int block = std::min<long>(count + guard, total);
  Eigen::MatrixXd basis(total, block);
  basis.col(0) = op.mass.cwiseSqrt();  // scaled image of the constant function
  GaussianStream rng(0xE16E57A7ull, make_stream(0x5E, 0, 0));
  for (int k = 1; k < block; ++k)
    for (long i = 0; i < total; ++i) basis(i, k) = rng.gaussian();
  {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
    basis = qr.householderQ() * Eigen::MatrixXd::Identity(total, block);
  }

  // Attainable residuals are limited by rounding at the operator's scale, so
  // the convergence threshold carries a floating-point floor besides the
  // relative tolerance (fine grids drive ||C|| to 1e4 and beyond).
  const double fpFloor = 100.0 * std::numeric_limits<double>::epsilon() *
                         std::max(1.0, C.diagonal().cwiseAbs().maxCoeff());
  const auto threshold = [&](double value) {
    return tol * std::max(1.0, std::abs(value)) + fpFloor;
  };

  Eigen::VectorXd ritzValues = Eigen::VectorXd::Zero(block);
  Eigen::VectorXd residuals = Eigen::VectorXd::Constant(block, 1e300);
  for (int it = 0; it < maxIters; ++it) {
    Eigen::MatrixXd image(total, block);
    for (int k = 0; k < block; ++k) image.col(k) = solver.solve(basis.col(k));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(image);
    basis = qr.householderQ() * Eigen::MatrixXd::Identity(total, block);

    const Eigen::MatrixXd Cb = C * basis;
    const Eigen::MatrixXd small = basis.transpose() * Cb;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(0.5 * (small + small.transpose()));
    basis = basis * ritz.eigenvectors();
    ritzValues = ritz.eigenvalues();

    const Eigen::MatrixXd CbRot = Cb * ritz.eigenvectors();
    bool done = true;
    for (int k = 0; k < count; ++k) {
      residuals(k) = (CbRot.col(k) - ritzValues(k) * basis.col(k)).norm();
      if (residuals(k) > threshold(ritzValues(k))) done = false;
    }
    if (done) break;
  }

  std::vector<EigenPair> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    EigenPair pair;
    pair.value = ritzValues(k);
    pair.residual = residuals(k);
    pair.converged = pair.residual <= threshold(pair.value);
    pair.function = isqrt.cwiseProduct(basis.col(k));
    out.push_back(std::move(pair));
  }
  return out;
}

namespace {

bool same_grid(const ParamGrid& a, const ParamGrid& b) {
  if (a.shape != b.shape || a.dim() != b.dim()) return false;
  for (int d = 0; d < a.dim(); ++d)
    if (a.domain.lo(d) != b.domain.lo(d) || a.domain.hi(d) != b.domain.hi(d)) return false;
  return true;
}

}  // namespace

EigenPair schrodinger_lambda_min(const ImmersionChart& chart, const PotentialField& h,
                                 const ParamGrid& grid) {
  const DiscreteOperator op = laplacian_matrix(chart, grid);
  Eigen::VectorXd v(grid.size());
  const bool matching = same_grid(h.grid, grid);
  for (long i = 0; i < grid.size(); ++i)
    v(i) = -2.0 * (matching ? h.values(i) : h(grid.point(i)));
  return eigs_smallest(op, v, 1).front();
}

PositivityVerdict positivity_verdict(const ImmersionChart& chart, const PotentialField& V,
                                     const ParamGrid& grid) {
  PotentialField h = V;
  h.values = -0.5 * V.values;  // Delta + V  ==  Delta - 2h
  PositivityVerdict verdict;
  verdict.detail = schrodinger_lambda_min(chart, h, grid);
  verdict.lambdaMin = verdict.detail.value;
  verdict.tolerance = 1e-6 * std::max(1.0, V.values.cwiseAbs().maxCoeff());
  verdict.positive = verdict.detail.converged && verdict.lambdaMin > verdict.tolerance;
  return verdict;
}

}  // namespace curvflow
