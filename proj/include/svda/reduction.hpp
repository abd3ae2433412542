#pragma once

// POD background spaces and G-orthogonal projections.

#include <vector>

#include <Eigen/Dense>

#include "svda/fem.hpp"

namespace svda::rom {

struct BackgroundSpace {
  Eigen::MatrixXd basis;            // nodes x N, G-orthonormal columns
  Eigen::VectorXd eigenvalues;      // retained, descending
  Eigen::VectorXd spectrum;         // every snapshot-Gram eigenvalue, descending
  double discarded_energy = 0.0;    // sum of the eigenvalues that were not retained

  [[nodiscard]] int size() const { return static_cast<int>(basis.cols()); }
};

/// Method of snapshots in the G inner product. The first N modes are
/// returned with the first significant nodal value made positive.
BackgroundSpace pod(const std::vector<fem::NodalField>& snapshots, const fem::SparseMatrix& G,
                    int N);

/// Coefficients c of the G-orthogonal projection onto span(basis), from the
/// normal system (basis^T G basis) c = basis^T G field.
Eigen::VectorXd projection_coefficients(const fem::NodalField& field, const Eigen::MatrixXd& basis,
                                        const fem::SparseMatrix& G);

fem::NodalField project(const fem::NodalField& field, const Eigen::MatrixXd& basis,
                        const fem::SparseMatrix& G);

/// ||field - project(field)||_G, i.e. eps_bk^N when basis spans Z_N.
double projection_error(const fem::NodalField& field, const Eigen::MatrixXd& basis,
                        const fem::SparseMatrix& G);

}  // namespace svda::rom
