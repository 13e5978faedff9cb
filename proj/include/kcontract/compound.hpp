#pragma once

#include <Eigen/Dense>
#include <Eigen/LU>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "kcontract/errors.hpp"

namespace kcontract {

// k-multiplicative and k-additive compound matrices. Lexicographic ordering
// of the k-subsets is the one canonical ordering everywhere; indices are
// 0-based in code (the 1-based tuples of the usual definition shifted down).

inline std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

struct CombinationIndex {
  int n = 0;
  int k = 0;
  std::vector<std::vector<int>> combos;  // strictly increasing tuples, lexicographic
};

// Compound sizes blow up combinatorially; refuse anything past desk scale.
inline void check_compound_dims(int n, int k) {
  if (k < 1 || k > n) throw DimensionError("compound order k=" + std::to_string(k) +
                                           " outside [1," + std::to_string(n) + "]");
  if (n > 20) throw DimensionError("dimension " + std::to_string(n) +
                                   " exceeds the supported maximum of 20");
  if (binomial(n, k) > 200000)
    throw DimensionError("binomial(" + std::to_string(n) + "," + std::to_string(k) +
                         ") exceeds the 200000 compound-size cap");
}

inline CombinationIndex lex_combinations(int n, int k) {
  check_compound_dims(n, k);
  CombinationIndex ci;
  ci.n = n;
  ci.k = k;
  std::vector<int> cur(k);
  for (int i = 0; i < k; ++i) cur[i] = i;
  for (;;) {
    ci.combos.push_back(cur);
    int t = k - 1;
    while (t >= 0 && cur[t] == n - k + t) --t;
    if (t < 0) break;
    ++cur[t];
    for (int j = t + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return ci;
}

namespace detail {

// Determinant of a k x k submatrix: cofactor expansion up to 3x3, partial-pivot
// LU beyond.
inline double minor_det(const Eigen::MatrixXd& A, const std::vector<int>& rows,
                        const std::vector<int>& cols) {
  const int k = static_cast<int>(rows.size());
  switch (k) {
    case 1:
      return A(rows[0], cols[0]);
    case 2:
      return A(rows[0], cols[0]) * A(rows[1], cols[1]) -
             A(rows[0], cols[1]) * A(rows[1], cols[0]);
    case 3: {
      const double a = A(rows[0], cols[0]), b = A(rows[0], cols[1]), c = A(rows[0], cols[2]);
      const double d = A(rows[1], cols[0]), e = A(rows[1], cols[1]), f = A(rows[1], cols[2]);
      const double g = A(rows[2], cols[0]), h = A(rows[2], cols[1]), i = A(rows[2], cols[2]);
      return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    }
    default: {
      Eigen::MatrixXd sub(k, k);
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) sub(r, c) = A(rows[r], cols[c]);
      return Eigen::PartialPivLU<Eigen::MatrixXd>(sub).determinant();
    }
  }
}

inline std::uint32_t combo_mask(const std::vector<int>& combo) {
  std::uint32_t m = 0;
  for (int i : combo) m |= 1u << i;
  return m;
}

}  // namespace detail

// A^(k): all k-minors of A, rows and columns ordered lexicographically.
template <typename Derived>
Eigen::MatrixXd mult_compound(const Eigen::MatrixBase<Derived>& A_in, int k) {
  const Eigen::MatrixXd A = A_in;
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(A.cols());
  check_compound_dims(std::min(n, m), k);
  check_compound_dims(std::max(n, m), k);
  const CombinationIndex rows = lex_combinations(n, k);
  const CombinationIndex cols = lex_combinations(m, k);
  Eigen::MatrixXd out(rows.combos.size(), cols.combos.size());
  for (std::size_t i = 0; i < rows.combos.size(); ++i)
    for (std::size_t j = 0; j < cols.combos.size(); ++j)
      out(i, j) = detail::minor_det(A, rows.combos[i], cols.combos[j]);
  return out;
}

// A^[k]: the first-order coefficient of (I + eps*A)^(k). Computed by the
// entrywise rule: entry (alpha,alpha) is the sum of a_ii over i in alpha;
// entry (alpha,beta) with alpha and beta sharing k-1 elements is
// (-1)^(p+q) * a_ij, where i = alpha\beta, j = beta\alpha and p,q are the
// positions of i,j inside their sorted tuples; all other entries are 0.
// The eps-expansion definition is enforced against this rule by tests.
template <typename Derived>
Eigen::MatrixXd add_compound(const Eigen::MatrixBase<Derived>& A_in, int k) {
  const Eigen::MatrixXd A = A_in;
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n) throw DimensionError("additive compound needs a square matrix");
  check_compound_dims(n, k);
  const CombinationIndex ci = lex_combinations(n, k);
  const auto r = static_cast<Eigen::Index>(ci.combos.size());

  std::unordered_map<std::uint32_t, int> index_of;
  index_of.reserve(ci.combos.size() * 2);
  for (std::size_t i = 0; i < ci.combos.size(); ++i)
    index_of.emplace(detail::combo_mask(ci.combos[i]), static_cast<int>(i));

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(r, r);
  std::vector<int> beta(k);
  for (std::size_t a = 0; a < ci.combos.size(); ++a) {
    const std::vector<int>& alpha = ci.combos[a];
    const std::uint32_t amask = detail::combo_mask(alpha);
    double diag = 0;
    for (int i : alpha) diag += A(i, i);
    B(a, a) = diag;

    for (int t = 0; t < k; ++t) {
      const int i = alpha[t];
      for (int j = 0; j < n; ++j) {
        if (amask & (1u << j)) continue;
        // beta = alpha with i replaced by j, re-sorted
        beta = alpha;
        beta[t] = j;
        int q = t;
        while (q + 1 < k && beta[q] > beta[q + 1]) { std::swap(beta[q], beta[q + 1]); ++q; }
        while (q > 0 && beta[q] < beta[q - 1]) { std::swap(beta[q], beta[q - 1]); --q; }
        const int b = index_of.at(detail::combo_mask(beta));
        const int sign = ((t + q) % 2 == 0) ? 1 : -1;
        B(a, b) = sign * A(i, j);
      }
    }
  }
  return B;
}

// Volume of the parallelotope spanned by the columns of V: |V^(k)|_2 with
// k = cols(V). Degenerate spans give 0. stableNorm keeps tiny and huge
// volumes representable (the minors get squared inside a plain norm).
template <typename Derived>
double parallelotope_volume(const Eigen::MatrixBase<Derived>& V_in) {
  const Eigen::MatrixXd V = V_in;
  const int k = static_cast<int>(V.cols());
  const Eigen::VectorXd vk = mult_compound(V, k);
  return vk.stableNorm();
}

// (T A T^-1)^[k] computed on the compound side: T^(k) A^[k] (T^(k))^-1.
template <typename DT, typename DA>
Eigen::MatrixXd compound_similarity(const Eigen::MatrixBase<DT>& T_in,
                                    const Eigen::MatrixBase<DA>& A_in, int k) {
  const Eigen::MatrixXd T = T_in;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(T);
  if (!lu.isInvertible())
    throw SingularMatrixError("compound_similarity: T is singular to working precision");
  const Eigen::MatrixXd Tk = mult_compound(T, k);
  const Eigen::MatrixXd M = Tk * add_compound(A_in, k);
  // M * Tk^-1 via a transposed solve
  return Eigen::PartialPivLU<Eigen::MatrixXd>(Tk.transpose()).solve(M.transpose()).transpose();
}

}  // namespace kcontract
