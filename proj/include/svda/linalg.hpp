#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "svda/errors.hpp"

namespace svda {

/// Sparse Cholesky factorization P G P^T = L L^T of an SPD Gram matrix.
/// Factored once and shared read-only across solves.
class SpdFactorization {
 public:
  explicit SpdFactorization(const Eigen::SparseMatrix<double>& G) {
    llt_.compute(G);
    if (llt_.info() != Eigen::Success) {
      throw Error(ErrorKind::SingularGram, "Gram matrix is not symmetric positive definite");
    }
    lower_ = llt_.matrixL();
  }

  [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }

  /// Maps X to L^T P X, so that x^T G y equals the Euclidean product of the images.
  [[nodiscard]] Eigen::MatrixXd whiten(const Eigen::MatrixXd& X) const {
    return lower_.transpose() * (llt_.permutationP() * X);
  }

  /// Inverse of whiten.
  [[nodiscard]] Eigen::MatrixXd unwhiten(const Eigen::MatrixXd& Y) const {
    Eigen::MatrixXd tmp = lower_.transpose().triangularView<Eigen::Upper>().solve(Y);
    return llt_.permutationPinv() * tmp;
  }

 private:
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
  Eigen::SparseMatrix<double> lower_;
};

inline double g_inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                      const Eigen::SparseMatrix<double>& G) {
  return u.dot(G * v);
}

inline double g_norm(const Eigen::VectorXd& u, const Eigen::SparseMatrix<double>& G) {
  return std::sqrt(std::max(0.0, u.dot(G * u)));
}

}  // namespace svda
