#include "svda/fem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svda/errors.hpp"

namespace svda::fem {

std::array<Vec2, 3> Mesh::triangle_vertices(int t) const {
  const auto& tri = triangles[static_cast<std::size_t>(t)];
  return {nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]};
}

double Mesh::triangle_area(int t) const {
  const auto v = triangle_vertices(t);
  const Vec2 a = v[1] - v[0];
  const Vec2 b = v[2] - v[0];
  return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

Vec2 Mesh::triangle_centroid(int t) const {
  const auto v = triangle_vertices(t);
  return (v[0] + v[1] + v[2]) / 3.0;
}

Mesh build_mesh(int nx, int ny) {
  if (nx < 1 || ny < 1) {
    throw Error(ErrorKind::Config, "mesh needs at least one cell per axis");
  }
  Mesh mesh;
  mesh.nx = nx;
  mesh.ny = ny;
  const double width = kDomainMax - kDomainMin;
  mesh.nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // Endpoints are set exactly so boundary nodes sit on +-2.
      const double x = (i == nx) ? kDomainMax : kDomainMin + width * i / nx;
      const double y = (j == ny) ? kDomainMax : kDomainMin + width * j / ny;
      mesh.nodes.emplace_back(x, y);
    }
  }

  mesh.triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int n00 = mesh.node_index(i, j);
      const int n10 = mesh.node_index(i + 1, j);
      const int n11 = mesh.node_index(i + 1, j + 1);
      const int n01 = mesh.node_index(i, j + 1);
      mesh.triangles.push_back({n00, n10, n11});
      mesh.triangles.push_back({n00, n11, n01});
    }
  }

  for (int i = 0; i < nx; ++i) {
    mesh.boundary_edges.push_back({{mesh.node_index(i, 0), mesh.node_index(i + 1, 0)}, Side::Bottom});
  }
  for (int j = 0; j < ny; ++j) {
    mesh.boundary_edges.push_back({{mesh.node_index(nx, j), mesh.node_index(nx, j + 1)}, Side::Right});
  }
  for (int i = nx; i > 0; --i) {
    mesh.boundary_edges.push_back({{mesh.node_index(i, ny), mesh.node_index(i - 1, ny)}, Side::Top});
  }
  for (int j = ny; j > 0; --j) {
    mesh.boundary_edges.push_back({{mesh.node_index(0, j), mesh.node_index(0, j - 1)}, Side::Left});
  }
  return mesh;
}

DiffusivityField uniform_diffusivity(const Mesh& mesh, double mu) {
  if (!(mu > 0.0)) throw Error(ErrorKind::Config, "diffusivity must be positive");
  DiffusivityField D;
  D.kind = DiffusivityKind::Uniform;
  D.mu = mu;
  D.values.assign(static_cast<std::size_t>(mesh.triangle_count()), mu);
  return D;
}

DiffusivityField bimaterial_diffusivity(const Mesh& mesh, double mu) {
  if (!(mu > 0.0)) throw Error(ErrorKind::Config, "diffusivity must be positive");
  DiffusivityField D;
  D.kind = DiffusivityKind::Bimaterial;
  D.mu = mu;
  D.values.resize(static_cast<std::size_t>(mesh.triangle_count()));
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const Vec2 c = mesh.triangle_centroid(t);
    const bool inner = std::abs(c.x()) < 1.0 && std::abs(c.y()) < 1.0;
    D.values[static_cast<std::size_t>(t)] = inner ? 1.0 : mu;
  }
  return D;
}

TimeGrid make_time_grid(double T, int K, int k_off) {
  if (!(T > 0.0) || K < 1) throw Error(ErrorKind::Config, "time grid needs T > 0 and K >= 1");
  if (k_off < 1 || k_off > K) {
    throw Error(ErrorKind::Config, "k_off must satisfy 1 <= k_off <= K (got " +
                                       std::to_string(k_off) + ")");
  }
  return TimeGrid{T, K, k_off};
}

Eigen::Matrix3d local_mass(const std::array<Vec2, 3>& v) {
  const Vec2 a = v[1] - v[0];
  const Vec2 b = v[2] - v[0];
  const double area = 0.5 * std::abs(a.x() * b.y() - a.y() * b.x());
  Eigen::Matrix3d m;
  m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  return m * (area / 12.0);
}

Eigen::Matrix3d local_stiffness(const std::array<Vec2, 3>& v, double diffusivity) {
  const double det = (v[1] - v[0]).x() * (v[2] - v[0]).y() - (v[1] - v[0]).y() * (v[2] - v[0]).x();
  const double area = 0.5 * std::abs(det);
  // grad(phi_i) = rot90(opposite edge) / (2 * signed area)
  Eigen::Matrix<double, 2, 3> grad;
  for (int i = 0; i < 3; ++i) {
    const Vec2& p = v[static_cast<std::size_t>((i + 1) % 3)];
    const Vec2& q = v[static_cast<std::size_t>((i + 2) % 3)];
    grad(0, i) = (p.y() - q.y()) / det;
    grad(1, i) = (q.x() - p.x()) / det;
  }
  return diffusivity * area * (grad.transpose() * grad);
}

namespace {

template <class LocalFn>
SparseMatrix assemble(const Mesh& mesh, LocalFn&& local) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(9 * mesh.triangle_count()));
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const Eigen::Matrix3d ke = local(t, mesh.triangle_vertices(t));
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) triplets.emplace_back(tri[a], tri[b], ke(a, b));
    }
  }
  SparseMatrix m(mesh.node_count(), mesh.node_count());
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

// Two-point Gauss rule on [0,1].
constexpr double kGaussLo = 0.21132486540518711775;
constexpr double kGaussHi = 0.78867513459481288225;

}  // namespace

SparseMatrix assemble_mass(const Mesh& mesh) {
  return assemble(mesh, [](int, const std::array<Vec2, 3>& v) { return local_mass(v); });
}

SparseMatrix assemble_stiffness(const Mesh& mesh, const DiffusivityField& D) {
  if (D.values.size() != static_cast<std::size_t>(mesh.triangle_count())) {
    throw Error(ErrorKind::DimensionMismatch, "diffusivity field does not match the mesh");
  }
  return assemble(mesh, [&](int t, const std::array<Vec2, 3>& v) {
    return local_stiffness(v, D.values[static_cast<std::size_t>(t)]);
  });
}

SparseMatrix h1_gram(const Mesh& mesh) {
  return assemble(mesh, [](int, const std::array<Vec2, 3>& v) {
    return Eigen::Matrix3d(local_mass(v) + local_stiffness(v, 1.0));
  });
}

HeatStepper::HeatStepper(const Mesh& mesh, const DiffusivityField& D, const RadiationBC& bc,
                         NewtonOptions options)
    : edges_(mesh.boundary_edges),
      nodes_(mesh.nodes),
      bc_(bc),
      options_(options),
      mass_(assemble_mass(mesh)),
      stiffness_(assemble_stiffness(mesh, D)) {
  if (!(bc.sigma > 0.0) || !(bc.epsilon > 0.0) || !(bc.u_r > 0.0)) {
    throw Error(ErrorKind::Config, "radiation parameters must be positive");
  }
}

Eigen::VectorXd HeatStepper::radiation(const NodalField& u) const {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(u.size());
  const double coeff = bc_.sigma * bc_.epsilon;
  const double ur4 = std::pow(bc_.u_r, 4);
  for (const auto& e : edges_) {
    const int a = e.nodes[0];
    const int b = e.nodes[1];
    const double half_len = 0.5 * (nodes_[b] - nodes_[a]).norm();
    for (const double s : {kGaussLo, kGaussHi}) {
      const double uq = (1.0 - s) * u[a] + s * u[b];
      const double flux = coeff * (uq * uq * uq * uq - ur4) * half_len;
      r[a] += flux * (1.0 - s);
      r[b] += flux * s;
    }
  }
  return r;
}

SparseMatrix HeatStepper::radiation_jacobian(const NodalField& u) const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * edges_.size());
  const double coeff = bc_.sigma * bc_.epsilon;
  for (const auto& e : edges_) {
    const int a = e.nodes[0];
    const int b = e.nodes[1];
    const double half_len = 0.5 * (nodes_[b] - nodes_[a]).norm();
    double jaa = 0.0, jab = 0.0, jbb = 0.0;
    for (const double s : {kGaussLo, kGaussHi}) {
      const double uq = (1.0 - s) * u[a] + s * u[b];
      const double d = 4.0 * coeff * uq * uq * uq * half_len;
      jaa += d * (1.0 - s) * (1.0 - s);
      jab += d * (1.0 - s) * s;
      jbb += d * s * s;
    }
    triplets.emplace_back(a, a, jaa);
    triplets.emplace_back(a, b, jab);
    triplets.emplace_back(b, a, jab);
    triplets.emplace_back(b, b, jbb);
  }
  SparseMatrix j(u.size(), u.size());
  j.setFromTriplets(triplets.begin(), triplets.end());
  return j;
}

Eigen::VectorXd HeatStepper::residual(const NodalField& u, const NodalField& u_prev,
                                      double tau) const {
  return mass_ * (u - u_prev) / tau + stiffness_ * u + radiation(u);
}

StepResult HeatStepper::step(const NodalField& u_prev, double tau) const {
  if (u_prev.size() != mass_.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "field length does not match the mesh");
  }
  if (!(tau > 0.0)) throw Error(ErrorKind::Config, "time step must be positive");
  if (u_prev.minCoeff() <= 0.0) {
    throw Error(ErrorKind::NonPhysical, "previous state has non-positive temperature");
  }

  const double n = static_cast<double>(u_prev.size());
  const double tol = options_.tolerance * std::max(1.0, u_prev.lpNorm<Eigen::Infinity>());
  const SparseMatrix linear = SparseMatrix(mass_ / tau) + stiffness_;

  StepResult result;
  result.u = u_prev;
  Eigen::VectorXd res = residual(result.u, u_prev, tau);
  result.residual = res.norm() / n;
  if (result.residual < tol) return result;

  Eigen::SimplicialLDLT<SparseMatrix> solver;
  bool analyzed = false;
  while (result.iterations < options_.max_iterations) {
    const SparseMatrix jac = linear + radiation_jacobian(result.u);
    if (!analyzed) {
      solver.analyzePattern(jac);
      analyzed = true;
    }
    solver.factorize(jac);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorKind::NonConvergence, "Newton Jacobian factorization failed");
    }
    result.u -= solver.solve(res);
    ++result.iterations;
    if (!(result.u.minCoeff() > 0.0) || !result.u.allFinite()) {
      throw Error(ErrorKind::NonPhysical, "Newton iterate has non-positive temperature");
    }
    res = residual(result.u, u_prev, tau);
    result.residual = res.norm() / n;
    if (result.residual < tol) return result;
  }
  throw Error(ErrorKind::NonConvergence,
              "Newton did not converge in " + std::to_string(options_.max_iterations) +
                  " iterations (residual " + std::to_string(result.residual) + ")");
}

StepResult step_implicit_euler(const Mesh& mesh, const NodalField& u_prev, double tau,
                               const DiffusivityField& D, const RadiationBC& bc,
                               NewtonOptions options) {
  return HeatStepper(mesh, D, bc, options).step(u_prev, tau);
}

Trajectory solve_trajectory(const Mesh& mesh, const NodalField& u0, const TimeGrid& grid,
                            const DiffusivityField& D, const RadiationBC& bc,
                            NewtonOptions options) {
  if (u0.size() != mesh.node_count()) {
    throw Error(ErrorKind::DimensionMismatch, "initial field does not match the mesh");
  }
  if (!(u0.minCoeff() > 0.0)) {
    throw Error(ErrorKind::NonPhysical, "initial condition must be strictly positive");
  }
  const HeatStepper stepper(mesh, D, bc, options);
  Trajectory traj;
  traj.fields.reserve(static_cast<std::size_t>(grid.K) + 1);
  traj.fields.push_back(u0);
  const double tau = grid.tau();
  for (int k = 1; k <= grid.K; ++k) {
    try {
      traj.fields.push_back(stepper.step(traj.fields.back(), tau).u);
    } catch (const Error& e) {
      throw e.tagged("time step " + std::to_string(k));
    }
  }
  return traj;
}

}  // namespace svda::fem
