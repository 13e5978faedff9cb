#pragma once

#include <Eigen/Dense>
#include <algorithm>

#include "kcontract/errors.hpp"

namespace kcontract {

// Symmetric eigenvalue and singular-value helpers. Eigenvalue lists follow
// the descending convention lambda_1 >= lambda_2 >= ... >= lambda_n.

// Full spectrum of a symmetric matrix, descending. The input must be
// symmetric up to 1e-9 relative; it is symmetrized before the solve.
template <typename Derived>
Eigen::VectorXd sym_eigs_desc(const Eigen::MatrixBase<Derived>& S_in) {
  const Eigen::MatrixXd S = S_in;
  if (S.rows() != S.cols()) throw DimensionError("sym_eigs_desc: matrix not square");
  const double scale = S.cwiseAbs().maxCoeff();
  const double skew = (S - S.transpose()).cwiseAbs().maxCoeff();
  if (skew > 1e-9 * std::max(scale, 1e-300))
    throw DimensionError("sym_eigs_desc: matrix not symmetric within tolerance");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()),
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("symmetric eigensolver failed");
  return es.eigenvalues().reverse();
}

// Sum of the k largest eigenvalues of a symmetric matrix.
template <typename Derived>
double top_k_eig_sum(const Eigen::MatrixBase<Derived>& S, int k) {
  const Eigen::VectorXd lam = sym_eigs_desc(S);
  if (k < 1 || k > lam.size()) throw DimensionError("top_k_eig_sum: k outside [1,n]");
  return lam.head(k).sum();
}

// Singular values, descending, from the eigenvalues of the smaller Gram
// matrix; tiny negative eigenvalues are clipped to zero.
template <typename Derived>
Eigen::VectorXd singular_values_desc(const Eigen::MatrixBase<Derived>& A_in) {
  const Eigen::MatrixXd A = A_in;
  const Eigen::MatrixXd G = A.rows() <= A.cols()
                                ? Eigen::MatrixXd(A * A.transpose())
                                : Eigen::MatrixXd(A.transpose() * A);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("Gram eigensolver failed");
  Eigen::VectorXd sv = es.eigenvalues().reverse();
  for (Eigen::Index i = 0; i < sv.size(); ++i) sv(i) = sv(i) > 0 ? std::sqrt(sv(i)) : 0.0;
  return sv;
}

template <typename Derived>
double spectral_norm(const Eigen::MatrixBase<Derived>& A) {
  Eigen::VectorXd sv = singular_values_desc(A);
  return sv.size() ? sv(0) : 0.0;
}

// L2 matrix measure of the k-additive compound of A. By the spectral mapping
// of additive compounds, mu_2(A^[k]) equals the sum of the k largest
// eigenvalues of the symmetric part of A, so the compound never has to be
// formed.
template <typename Derived>
double mu2_add_compound(const Eigen::MatrixBase<Derived>& A_in, int k) {
  const Eigen::MatrixXd A = A_in;
  return top_k_eig_sum(0.5 * (A + A.transpose()), k);
}

template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& S, double tol) {
  if (tol < 0) throw DimensionError("is_psd: tolerance must be nonnegative");
  const Eigen::VectorXd lam = sym_eigs_desc(S);
  return lam(lam.size() - 1) >= -tol;
}

}  // namespace kcontract
