#include "svda/reduction.hpp"

#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "svda/errors.hpp"
#include "svda/linalg.hpp"

namespace svda::rom {

BackgroundSpace pod(const std::vector<fem::NodalField>& snapshots, const fem::SparseMatrix& G,
                    int N) {
  const int n = static_cast<int>(snapshots.size());
  if (N < 1 || N > n) {
    throw Error(ErrorKind::RankDeficient, "POD needs 1 <= N <= snapshot count (N = " +
                                              std::to_string(N) + ", snapshots = " +
                                              std::to_string(n) + ")");
  }
  Eigen::MatrixXd X(G.rows(), n);
  for (int j = 0; j < n; ++j) {
    if (snapshots[static_cast<std::size_t>(j)].size() != G.rows()) {
      throw Error(ErrorKind::DimensionMismatch, "snapshot length does not match the Gram matrix");
    }
    X.col(j) = snapshots[static_cast<std::size_t>(j)];
  }

  // The snapshot Gram X^T G X equals Y^T Y with Y = L^T P X. Its eigenpairs are
  // taken from the SVD of Y, which resolves the small eigenvalues far better
  // than an eigensolve of the squared matrix.
  const SpdFactorization factor(G);
  const Eigen::MatrixXd Y = factor.whiten(X);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(Y, Eigen::ComputeThinU);
  const Eigen::VectorXd sv = svd.singularValues();

  BackgroundSpace space;
  space.spectrum = Eigen::VectorXd::Zero(n);
  space.spectrum.head(sv.size()) = sv.array().square().matrix();
  if (!(space.spectrum[0] > 0.0)) throw Error(ErrorKind::RankDeficient, "all snapshots vanish");
  // Singular values of the whitened snapshots carry full relative accuracy
  // down to roughly machine precision times the largest one.
  if (sv[N - 1] <= 1e-12 * sv[0]) {
    throw Error(ErrorKind::RankDeficient,
                "POD singular value " + std::to_string(N) + " is negligible; the snapshots do not span " +
                    std::to_string(N) + " dimensions");
  }
  space.eigenvalues = space.spectrum.head(N);
  space.discarded_energy = space.spectrum.tail(n - N).sum();

  space.basis = factor.unwhiten(svd.matrixU().leftCols(N));
  for (int i = 0; i < N; ++i) {
    auto col = space.basis.col(i);
    const double cutoff = 1e-12 * col.cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < col.size(); ++r) {
      if (std::abs(col[r]) > cutoff) {
        if (col[r] < 0.0) col = -col;
        break;
      }
    }
  }
  return space;
}

Eigen::VectorXd projection_coefficients(const fem::NodalField& field, const Eigen::MatrixXd& basis,
                                        const fem::SparseMatrix& G) {
  if (field.size() != basis.rows() || field.size() != G.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "projection operands have different lengths");
  }
  const Eigen::MatrixXd Gb = G * basis;
  const Eigen::MatrixXd gram = basis.transpose() * Gb;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  const double scale = gram.diagonal().cwiseAbs().maxCoeff();
  if (llt.info() != Eigen::Success ||
      llt.matrixL().toDenseMatrix().diagonal().array().square().minCoeff() <= 1e-14 * scale) {
    throw Error(ErrorKind::SingularProjectionGram, "projection basis is linearly dependent in G");
  }
  return llt.solve(Gb.transpose() * field);
}

fem::NodalField project(const fem::NodalField& field, const Eigen::MatrixXd& basis,
                        const fem::SparseMatrix& G) {
  return basis * projection_coefficients(field, basis, G);
}

double projection_error(const fem::NodalField& field, const Eigen::MatrixXd& basis,
                        const fem::SparseMatrix& G) {
  return g_norm(field - project(field, basis, G), G);
}

}  // namespace svda::rom
