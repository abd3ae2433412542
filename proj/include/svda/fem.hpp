#pragma once

// P1 finite elements on the square plate (-2,2)^2 and backward-Euler time
// stepping of the heat equation with Stefan-Boltzmann radiation on the boundary.

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace svda::fem {

using Vec2 = Eigen::Vector2d;
using NodalField = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

inline constexpr double kDomainMin = -2.0;
inline constexpr double kDomainMax = 2.0;
inline constexpr double kDomainArea = 16.0;

enum class Side { Bottom, Right, Top, Left };

struct BoundaryEdge {
  std::array<int, 2> nodes;
  Side side;
};

/// Uniform nx-by-ny grid of (-2,2)^2; each cell is split into two
/// counter-clockwise triangles along its (i,j)-(i+1,j+1) diagonal.
struct Mesh {
  int nx = 0;
  int ny = 0;
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;

  [[nodiscard]] int node_count() const { return static_cast<int>(nodes.size()); }
  [[nodiscard]] int triangle_count() const { return static_cast<int>(triangles.size()); }
  [[nodiscard]] int node_index(int i, int j) const { return j * (nx + 1) + i; }
  [[nodiscard]] std::array<Vec2, 3> triangle_vertices(int t) const;
  /// Signed area; positive for every triangle produced by build_mesh.
  [[nodiscard]] double triangle_area(int t) const;
  [[nodiscard]] Vec2 triangle_centroid(int t) const;
};

Mesh build_mesh(int nx, int ny);

enum class DiffusivityKind { Uniform, Bimaterial };

/// Piecewise-constant diffusivity, one value per triangle.
struct DiffusivityField {
  DiffusivityKind kind = DiffusivityKind::Uniform;
  double mu = 1.0;
  std::vector<double> values;
};

/// D = mu everywhere.
DiffusivityField uniform_diffusivity(const Mesh& mesh, double mu);
/// D = 1 on triangles inside (-1,1)^2 and mu outside.
DiffusivityField bimaterial_diffusivity(const Mesh& mesh, double mu);

struct RadiationBC {
  double sigma = 5.67e-8;
  double epsilon = 3e-3;
  double u_r = 303.15;
};

struct TimeGrid {
  double T = 0.0;
  int K = 0;
  int k_off = 1;

  [[nodiscard]] double tau() const { return T / K; }
  [[nodiscard]] double time(int k) const { return T * static_cast<double>(k) / K; }
};

/// Validates tau*K = T, K >= 1 and 1 <= k_off <= K.
TimeGrid make_time_grid(double T, int K, int k_off);

/// Snapshots u^0..u^K on one mesh.
struct Trajectory {
  std::vector<NodalField> fields;

  [[nodiscard]] std::size_t size() const { return fields.size(); }
  [[nodiscard]] const NodalField& operator[](std::size_t k) const { return fields[k]; }
};

Eigen::Matrix3d local_mass(const std::array<Vec2, 3>& v);
Eigen::Matrix3d local_stiffness(const std::array<Vec2, 3>& v, double diffusivity);

SparseMatrix assemble_mass(const Mesh& mesh);
SparseMatrix assemble_stiffness(const Mesh& mesh, const DiffusivityField& D);
/// Full H1 inner product: mass + unit-diffusivity stiffness.
SparseMatrix h1_gram(const Mesh& mesh);

struct NewtonOptions {
  int max_iterations = 25;
  double tolerance = 1e-10;
};

struct StepResult {
  NodalField u;
  int iterations = 0;
  double residual = 0.0;
};

/// Holds the assembled operators of one heat model so that many steps can
/// share them.
class HeatStepper {
 public:
  HeatStepper(const Mesh& mesh, const DiffusivityField& D, const RadiationBC& bc,
              NewtonOptions options = {});

  /// One backward-Euler step: M (u - u_prev)/tau + K u + r(u) = 0, solved by Newton.
  [[nodiscard]] StepResult step(const NodalField& u_prev, double tau) const;

  /// Algebraic residual of the step equation at u.
  [[nodiscard]] Eigen::VectorXd residual(const NodalField& u, const NodalField& u_prev,
                                         double tau) const;

  /// Boundary radiation vector r_i = sigma*eps * int_{dOmega} (u^4 - u_r^4) phi_i.
  [[nodiscard]] Eigen::VectorXd radiation(const NodalField& u) const;

  [[nodiscard]] const SparseMatrix& mass() const { return mass_; }
  [[nodiscard]] const SparseMatrix& stiffness() const { return stiffness_; }

 private:
  [[nodiscard]] SparseMatrix radiation_jacobian(const NodalField& u) const;

  std::vector<BoundaryEdge> edges_;
  std::vector<Vec2> nodes_;
  RadiationBC bc_;
  NewtonOptions options_;
  SparseMatrix mass_;
  SparseMatrix stiffness_;
};

StepResult step_implicit_euler(const Mesh& mesh, const NodalField& u_prev, double tau,
                               const DiffusivityField& D, const RadiationBC& bc,
                               NewtonOptions options = {});

Trajectory solve_trajectory(const Mesh& mesh, const NodalField& u0, const TimeGrid& grid,
                            const DiffusivityField& D, const RadiationBC& bc,
                            NewtonOptions options = {});

/// Nodal interpolant of f(x, y).
template <class F>
NodalField interpolate(const Mesh& mesh, F&& f) {
  NodalField u(mesh.node_count());
  for (int i = 0; i < mesh.node_count(); ++i) u[i] = f(mesh.nodes[i].x(), mesh.nodes[i].y());
  return u;
}

}  // namespace svda::fem
