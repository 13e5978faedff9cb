// Test-only oracles, deliberately independent of the library implementation
// paths they check: Laplace determinants for minors, characteristic
// polynomials for symmetric spectra, scaling-and-squaring exponentials for
// the ODE and volume flows, and central finite differences for every
// symbolic derivative.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <vector>

#include "kcontract/expr.hpp"
#include "kcontract/rng.hpp"

namespace oracle {

// Determinant by recursive Laplace expansion along the first row.
inline double laplace_det(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  if (n == 1) return A(0, 0);
  double det = 0;
  for (int j = 0; j < n; ++j) {
    Eigen::MatrixXd sub(n - 1, n - 1);
    for (int r = 1; r < n; ++r) {
      int cc = 0;
      for (int c = 0; c < n; ++c)
        if (c != j) sub(r - 1, cc++) = A(r, c);
    }
    det += ((j % 2) ? -1.0 : 1.0) * A(0, j) * laplace_det(sub);
  }
  return det;
}

inline double minor_det(const Eigen::MatrixXd& A, const std::vector<int>& rows,
                        const std::vector<int>& cols) {
  Eigen::MatrixXd sub(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) sub(r, c) = A(rows[r], cols[c]);
  return laplace_det(sub);
}

// Characteristic polynomial coefficients via Faddeev-LeVerrier:
// p(x) = x^n + c[1] x^(n-1) + ... + c[n].
inline std::vector<double> charpoly(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  std::vector<double> c(n + 1, 0.0);
  c[0] = 1.0;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k <= n; ++k) {
    M = A * M + c[k - 1] * Eigen::MatrixXd::Identity(n, n);
    c[k] = -(A * M).trace() / k;
  }
  return c;
}

// Roots of the characteristic polynomial through the companion matrix and a
// general (non-selfadjoint) eigensolver; real parts sorted descending.
inline Eigen::VectorXd charpoly_roots_desc(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  const std::vector<double> c = charpoly(A);
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) comp(i, n - 1) = -c[n - i];
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp);
  Eigen::VectorXd roots = es.eigenvalues().real();
  std::sort(roots.data(), roots.data() + roots.size(), std::greater<double>());
  return roots;
}

// exp(A) by scaling and squaring with a truncated Taylor series.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  while (norm / std::pow(2.0, s) > 0.5) ++s;
  const Eigen::MatrixXd As = A / std::pow(2.0, s);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * As / k;
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-20) break;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

// Central finite difference of a scalar expression in one variable.
inline double central_diff(const kcontract::Expr& e, kcontract::Env env, kcontract::VarRef v,
                           double h = 1e-5) {
  auto shift = [&](double delta) {
    kcontract::Env s = env;
    switch (v.block) {
      case kcontract::VarBlock::X: s.x(v.index - 1) += delta; break;
      case kcontract::VarBlock::U: s.u(v.index - 1) += delta; break;
      case kcontract::VarBlock::Y: s.y(v.index - 1) += delta; break;
      case kcontract::VarBlock::S: s.s = *s.s + delta; break;
    }
    return kcontract::eval(e, s);
  };
  return (shift(h) - shift(-h)) / (2 * h);
}

// Central finite-difference Jacobian of a vector field.
template <typename F>
Eigen::MatrixXd fd_jacobian(const F& field, const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = field(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (field(xp) - field(xm)) / (2 * h);
  }
  return J;
}

// Greedy nearest matching of two complex multisets; returns the largest
// pairing distance (fine for the well-separated spectra used in tests).
inline double multiset_distance(std::vector<std::complex<double>> a,
                                std::vector<std::complex<double>> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0;
  for (const auto& av : a) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = std::abs(av - b[j]);
      if (d < best) { best = d; best_j = j; }
    }
    worst = std::max(worst, best);
    b.erase(b.begin() + best_j);
  }
  return worst;
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, kcontract::SplitMix64& rng,
                                     double scale = 1.0) {
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = rng.uniform(-scale, scale);
  return M;
}

inline Eigen::MatrixXd random_symmetric(int n, kcontract::SplitMix64& rng, double scale = 1.0) {
  const Eigen::MatrixXd M = random_matrix(n, n, rng, scale);
  return 0.5 * (M + M.transpose());
}

}  // namespace oracle
