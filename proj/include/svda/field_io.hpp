#pragma once

// Field snapshots on disk: a column CSV (node, x, y, value) for inspection
// and a little-endian binary form for trajectories and bases.
//
// Binary layout: "SVDA", u32 version, u64 node count, u64 K, then K+1
// records of node-count f64 values.

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "svda/fem.hpp"

namespace svda::io {

void write_field_csv(std::ostream& os, const fem::Mesh& mesh, const fem::NodalField& field);
fem::NodalField read_field_csv(std::istream& is);

/// Records are stored in order; K = records - 1.
void write_fields_binary(std::ostream& os, const std::vector<fem::NodalField>& records);
std::vector<fem::NodalField> read_fields_binary(std::istream& is);

/// Columns of `basis` become records.
void write_basis_binary(std::ostream& os, const Eigen::MatrixXd& basis);
Eigen::MatrixXd read_basis_binary(std::istream& is);

}  // namespace svda::io
