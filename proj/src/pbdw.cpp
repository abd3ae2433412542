#include "svda/pbdw.hpp"

#include <string>

#include <Eigen/SVD>

#include "svda/errors.hpp"

namespace svda::pbdw {

namespace {

constexpr double kBetaFloor = 1e-12;
constexpr double kRcondFloor = 1e-15;

}  // namespace

double stability_constant(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& background_gram) {
  const Eigen::LLT<Eigen::MatrixXd> llt_a(A);
  if (llt_a.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularGram, "observable Gram matrix A is not positive definite");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt_z(background_gram);
  if (llt_z.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularProjectionGram, "background basis is linearly dependent");
  }
  // C = L_A^{-1} B L_Z^{-T}
  Eigen::MatrixXd C = llt_a.matrixL().solve(B);
  C = llt_z.matrixL().solve(C.transpose()).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
  double beta = svd.singularValues().size() == B.cols() ? svd.singularValues().minCoeff() : 0.0;
  if (!(beta > kBetaFloor)) {
    throw Error(ErrorKind::StabilityViolation,
                "beta_{N,M} = " + std::to_string(beta) +
                    "; the background space has a direction invisible to the sensors");
  }
  if (beta > 1.0 && beta < 1.0 + 1e-10) beta = 1.0;
  return beta;
}

double stability_constant(const PBDWSystem& system) {
  return stability_constant(system.A, system.B, system.background_gram);
}

PBDWSystem assemble_system(const Eigen::MatrixXd& background, const Eigen::MatrixXd& representers,
                           const fem::SparseMatrix& G) {
  const Eigen::Index N = background.cols();
  const Eigen::Index M = representers.cols();
  if (background.rows() != G.rows() || representers.rows() != G.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "bases and Gram matrix have different sizes");
  }
  if (N < 1 || M < 1) throw Error(ErrorKind::DimensionMismatch, "empty background or sensor set");
  if (N > M) {
    throw Error(ErrorKind::StabilityViolation,
                "N = " + std::to_string(N) + " exceeds M = " + std::to_string(M) +
                    "; not enough sensors for the background space");
  }

  PBDWSystem sys;
  sys.background = background;
  sys.representers = representers;
  const Eigen::MatrixXd Gq = G * representers;
  const Eigen::MatrixXd A = representers.transpose() * Gq;
  sys.A = 0.5 * (A + A.transpose());
  sys.B = Gq.transpose() * background;
  const Eigen::MatrixXd Zg = background.transpose() * (G * background);
  sys.background_gram = 0.5 * (Zg + Zg.transpose());
  sys.beta = stability_constant(sys.A, sys.B, sys.background_gram);

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(M + N, M + N);
  kkt.topLeftCorner(M, M) = sys.A;
  kkt.topRightCorner(M, N) = sys.B;
  kkt.bottomLeftCorner(N, M) = sys.B.transpose();
  sys.kkt.compute(kkt);
  sys.kkt_rcond = sys.kkt.rcond();
  return sys;
}

PBDWSystem assemble_system(const rom::BackgroundSpace& background,
                           const obs::ObservableSpace& observable, const fem::SparseMatrix& G) {
  return assemble_system(background.basis, observable.representers, G);
}

Estimate solve_saddle(const PBDWSystem& system, const Eigen::VectorXd& obs) {
  const int M = system.M();
  const int N = system.N();
  if (obs.size() != M) {
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(M) + " observations");
  }
  if (!(system.kkt_rcond > kRcondFloor)) {
    throw Error(ErrorKind::SingularKKT, "saddle-point matrix is numerically singular");
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(M + N);
  rhs.head(M) = obs;
  const Eigen::VectorXd sol = system.kkt.solve(rhs);
  Estimate est;
  est.eta_coeffs = sol.head(M);
  est.z_coeffs = sol.tail(N);
  est.field = assemble_estimate(est.z_coeffs, est.eta_coeffs, system.background,
                                system.representers);
  return est;
}

fem::NodalField assemble_estimate(const Eigen::VectorXd& z_coeffs,
                                  const Eigen::VectorXd& eta_coeffs,
                                  const Eigen::MatrixXd& background,
                                  const Eigen::MatrixXd& representers) {
  if (z_coeffs.size() != background.cols() || eta_coeffs.size() != representers.cols() ||
      background.rows() != representers.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "estimate coefficients do not match the bases");
  }
  return background * z_coeffs + representers * eta_coeffs;
}

}  // namespace svda::pbdw
