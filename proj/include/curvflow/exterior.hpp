#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace curvflow {

/// Strictly increasing q-tuple of indices into {0,...,n-1}.  Identifies the
/// wedge basis element e_I = e_{i_1} ^ ... ^ e_{i_q} of Lambda^q R^n.
using MultiIndex = std::vector<int>;

inline std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// All increasing q-tuples in {0,...,n-1}, lexicographic order.
inline std::vector<MultiIndex> basis_indices(int q, int n) {
  if (q < 0 || q > n) throw std::domain_error("basis_indices: need 0 <= q <= n");
  std::vector<MultiIndex> out;
  out.reserve(static_cast<std::size_t>(binomial(n, q)));
  MultiIndex cur(q);
  for (int i = 0; i < q; ++i) cur[i] = i;
  while (true) {
    out.push_back(cur);
    if (q == 0) break;
    int t = q - 1;
    while (t >= 0 && cur[t] == n - q + t) --t;
    if (t < 0) break;
    ++cur[t];
    for (int s = t + 1; s < q; ++s) cur[s] = cur[s - 1] + 1;
  }
  return out;
}

/// Position of an increasing tuple in the lexicographic enumeration.
inline int multi_index_rank(const MultiIndex& idx, int n) {
  const int q = static_cast<int>(idx.size());
  std::int64_t rank = 0;
  int prev = -1;
  for (int t = 0; t < q; ++t) {
    for (int j = prev + 1; j < idx[t]; ++j) rank += binomial(n - 1 - j, q - 1 - t);
    prev = idx[t];
  }
  return static_cast<int>(rank);
}

/// Element of Lambda^q R^n in coordinates over the lexicographic wedge basis.
template <typename Scalar = double>
struct MultiVector {
  int q = 0;
  int n = 0;
  Eigen::Vector<Scalar, Eigen::Dynamic> coords;

  Scalar norm() const { return coords.norm(); }
};

/// Wedge product of the columns of V, as coordinates over basis_indices(q, n).
template <typename Derived>
MultiVector<typename Derived::Scalar> wedge(const Eigen::MatrixBase<Derived>& V) {
  using Scalar = typename Derived::Scalar;
  const int n = static_cast<int>(V.rows());
  const int q = static_cast<int>(V.cols());
  if (q < 0 || q > n) throw std::domain_error("wedge: need 0 <= q <= n");
  const auto basis = basis_indices(q, n);
  MultiVector<Scalar> out;
  out.q = q;
  out.n = n;
  out.coords.resize(static_cast<Eigen::Index>(basis.size()));
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> minor(q, q);
  for (std::size_t r = 0; r < basis.size(); ++r) {
    for (int a = 0; a < q; ++a) minor.row(a) = V.row(basis[r][a]);
    out.coords(static_cast<Eigen::Index>(r)) = q == 0 ? Scalar(1) : minor.determinant();
  }
  return out;
}

/// Wedge of a list of equal-length vectors.
template <typename Scalar>
MultiVector<Scalar> wedge(const std::vector<Eigen::Vector<Scalar, Eigen::Dynamic>>& vs) {
  if (vs.empty()) throw std::domain_error("wedge: empty vector list");
  const Eigen::Index n = vs[0].size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> V(n, static_cast<Eigen::Index>(vs.size()));
  for (std::size_t j = 0; j < vs.size(); ++j) {
    if (vs[j].size() != n) throw std::domain_error("wedge: mismatched vector lengths");
    V.col(static_cast<Eigen::Index>(j)) = vs[j];
  }
  return wedge(V);
}

/// q-th compound matrix: Lambda^q(A) acting on wedge coordinates, so that
/// Lambda^q(A) wedge(v_1,...,v_q) = wedge(A v_1, ..., A v_q)  (Cauchy-Binet).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
lambda_power(const Eigen::MatrixBase<Derived>& A, int q) {
  using Scalar = typename Derived::Scalar;
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n) throw std::domain_error("lambda_power: square matrix required");
  if (q < 0 || q > n) throw std::domain_error("lambda_power: need 0 <= q <= n");
  const auto basis = basis_indices(q, n);
  const Eigen::Index C = static_cast<Eigen::Index>(basis.size());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(C, C);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> minor(q, q);
  for (Eigen::Index col = 0; col < C; ++col) {
    for (Eigen::Index row = 0; row < C; ++row) {
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b) minor(a, b) = A(basis[row][a], basis[col][b]);
      out(row, col) = q == 0 ? Scalar(1) : minor.determinant();
    }
  }
  return out;
}

/// Derivation extension d Lambda^q(B): the unique derivation on Lambda^q R^n
/// with d Lambda^1 = B, i.e. acting on decomposables by substituting B into
/// one slot at a time.  d Lambda^0(B) = 0 on the line Lambda^0 = R.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
derivation_extend(const Eigen::MatrixBase<Derived>& B, int q) {
  using Scalar = typename Derived::Scalar;
  const int n = static_cast<int>(B.rows());
  if (B.cols() != n) throw std::domain_error("derivation_extend: square matrix required");
  if (q < 0 || q > n) throw std::domain_error("derivation_extend: need 0 <= q <= n");
  const auto basis = basis_indices(q, n);
  const Eigen::Index C = static_cast<Eigen::Index>(basis.size());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(C, C);
  // Column I: image of e_I.  Substituting B e_{i_t} into slot t produces
  // sum_k B(k, i_t) e_{i_1} ^ ... ^ e_k ^ ... ^ e_{i_q}; terms with k already
  // present vanish, others reorder with a sign.
  MultiIndex sub;
  for (Eigen::Index col = 0; col < C; ++col) {
    const MultiIndex& I = basis[col];
    for (int t = 0; t < q; ++t) {
      const int i = I[t];
      for (int k = 0; k < n; ++k) {
        const Scalar c = B(k, i);
        if (c == Scalar(0)) continue;
        if (k == i) {
          out(col, col) += c;
          continue;
        }
        bool present = false;
        for (int s = 0; s < q; ++s)
          if (s != t && I[s] == k) { present = true; break; }
        if (present) continue;
        sub = I;
        sub[t] = k;
        // Bubble the replaced entry into place, tracking the sign.
        int sign = 1;
        int pos = t;
        while (pos > 0 && sub[pos] < sub[pos - 1]) {
          std::swap(sub[pos], sub[pos - 1]);
          --pos;
          sign = -sign;
        }
        while (pos + 1 < q && sub[pos] > sub[pos + 1]) {
          std::swap(sub[pos], sub[pos + 1]);
          ++pos;
          sign = -sign;
        }
        out(multi_index_rank(sub, n), col) += Scalar(sign) * c;
      }
    }
  }
  return out;
}

/// Second-order part of the derivation extension:
///   delta2 Lambda^q(B) = d Lambda^q(B)^2 - d Lambda^q(B^2),
/// the "two distinct slots" operator.  Vanishes identically for q = 1.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
delta2(const Eigen::MatrixBase<Derived>& B, int q) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d1 = derivation_extend(B, q);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d2 =
      derivation_extend((B * B).eval(), q);
  return (d1 * d1 - d2).eval();
}

}  // namespace curvflow
