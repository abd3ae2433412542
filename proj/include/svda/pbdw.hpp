#pragma once

// Limited-observations PBDW: the saddle-point system
//
//   [ A   B ] [eta]   [obs]
//   [ B^T 0 ] [ z ] = [ 0 ]
//
// with A = ((q_m', q_m)), B = ((zeta_n, q_m)), and the inf-sup constant beta_{N,M}.

#include <Eigen/Dense>

#include "svda/fem.hpp"
#include "svda/observation.hpp"
#include "svda/reduction.hpp"

namespace svda::pbdw {

struct PBDWSystem {
  Eigen::MatrixXd A;               // M x M
  Eigen::MatrixXd B;               // M x N
  Eigen::MatrixXd background;      // zeta_1..zeta_N as nodal columns
  Eigen::MatrixXd representers;    // q_1..q_M as nodal columns
  Eigen::MatrixXd background_gram; // (zeta_n', zeta_n); identity for POD bases
  Eigen::PartialPivLU<Eigen::MatrixXd> kkt;
  double kkt_rcond = 0.0;
  double beta = 0.0;

  [[nodiscard]] int M() const { return static_cast<int>(A.rows()); }
  [[nodiscard]] int N() const { return static_cast<int>(B.cols()); }
};

struct Estimate {
  Eigen::VectorXd z_coeffs;
  Eigen::VectorXd eta_coeffs;
  fem::NodalField field;
};

/// beta = min singular value of L_A^{-1} B L_Z^{-T}, where A = L_A L_A^T and
/// L_Z L_Z^T is the Gram matrix of the background basis.
/// Throws StabilityViolation when beta <= 1e-12.
double stability_constant(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& background_gram);
double stability_constant(const PBDWSystem& system);

/// Builds A, B and the KKT factorization from nodal bases. N > M is rejected.
PBDWSystem assemble_system(const Eigen::MatrixXd& background, const Eigen::MatrixXd& representers,
                           const fem::SparseMatrix& G);
PBDWSystem assemble_system(const rom::BackgroundSpace& background,
                           const obs::ObservableSpace& observable, const fem::SparseMatrix& G);

/// Solves the KKT system with right-hand side (obs, 0) and assembles the state.
Estimate solve_saddle(const PBDWSystem& system, const Eigen::VectorXd& obs);

/// u = Z z + U eta.
fem::NodalField assemble_estimate(const Eigen::VectorXd& z_coeffs,
                                  const Eigen::VectorXd& eta_coeffs,
                                  const Eigen::MatrixXd& background,
                                  const Eigen::MatrixXd& representers);

}  // namespace svda::pbdw
