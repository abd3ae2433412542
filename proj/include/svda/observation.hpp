#pragma once

// Patch-average sensors, their Riesz representers in the H1 inner product and
// observation extraction from trajectories.

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "svda/fem.hpp"

namespace svda::obs {

/// Intersection of a sensor rectangle with one mesh triangle.
struct Overlap {
  int triangle = 0;
  double area = 0.0;
  fem::Vec2 centroid;
};

struct Patch {
  fem::Vec2 center;
  double halfwidth = 0.0;
  std::vector<Overlap> overlaps;

  [[nodiscard]] double area() const { return 4.0 * halfwidth * halfwidth; }
  [[nodiscard]] double covered_area() const;
};

/// Square sensor [cx-h, cx+h] x [cy-h, cy+h]; overlaps come from exact
/// rectangle/triangle clipping.
Patch make_patch(const fem::Mesh& mesh, const fem::Vec2& center, double halfwidth);

inline constexpr double kDefaultHalfwidth = 0.05;
inline constexpr double kDefaultMargin = 0.2;

/// side_count^2 patches with centers on a uniform lattice over
/// [-2+margin, 2-margin]^2, ordered row by row from the bottom-left.
std::vector<Patch> build_patch_grid(int side_count, double halfwidth, const fem::Mesh& mesh,
                                    double margin = kDefaultMargin);

/// Mean of the P1 field over the patch rectangle.
double observe(const fem::Mesh& mesh, const fem::NodalField& field, const Patch& patch);

/// b_i = l(phi_i); l(v) = b^T v for every FE field v.
Eigen::VectorXd functional_vector(const fem::Mesh& mesh, const Patch& patch);

fem::NodalField riesz_representer(const Patch& patch, const fem::SparseMatrix& G,
                                  const fem::Mesh& mesh);

struct ObservableSpace {
  Eigen::MatrixXd representers;  // nodes x M, column m is q_m
  Eigen::MatrixXd functionals;   // nodes x M, column m is b_m
  Eigen::MatrixXd gram_A;        // (q_m', q_m)
  std::vector<Patch> patches;

  [[nodiscard]] int size() const { return static_cast<int>(patches.size()); }
  /// All M observations of one field.
  [[nodiscard]] Eigen::VectorXd observe(const fem::NodalField& field) const {
    return functionals.transpose() * field;
  }
};

/// Computes every representer against one factorization of G.
ObservableSpace build_observable_space(std::vector<Patch> patches, const fem::SparseMatrix& G,
                                       const fem::Mesh& mesh);

/// Row k holds the M observations of snapshot k.
struct ObservationSeries {
  Eigen::MatrixXd values;
  fem::TimeGrid grid;

  [[nodiscard]] int rows() const { return static_cast<int>(values.rows()); }
  [[nodiscard]] int sensors() const { return static_cast<int>(values.cols()); }
};

ObservationSeries observe_trajectory(const fem::Trajectory& traj, const ObservableSpace& space,
                                     const fem::TimeGrid& grid);

/// CSV with header "k,t,l_1,...,l_M".
void write_observation_csv(std::ostream& os, const ObservationSeries& series);
/// The grid is rebuilt from the t column; k_off is set to 1 and left to the caller.
ObservationSeries read_observation_csv(std::istream& is);

}  // namespace svda::obs
