#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "svda/errors.hpp"
#include "svda/fem.hpp"
#include "svda/field_io.hpp"

namespace svda::fem {
namespace {

double quad(const SparseMatrix& A, const NodalField& u) { return u.dot(A * u); }

TEST(Mesh, CountsAndOrientation) {
  const Mesh mesh = build_mesh(4, 3);
  EXPECT_EQ(mesh.node_count(), 5 * 4);
  EXPECT_EQ(mesh.triangle_count(), 2 * 4 * 3);
  EXPECT_EQ(mesh.boundary_edges.size(), 2u * (4 + 3));
  double area = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    EXPECT_GT(mesh.triangle_area(t), 0.0);
    area += mesh.triangle_area(t);
  }
  EXPECT_NEAR(area, kDomainArea, 1e-13);
  EXPECT_EQ(mesh.nodes[static_cast<std::size_t>(mesh.node_index(4, 3))], Vec2(2.0, 2.0));
  EXPECT_EQ(mesh.nodes[0], Vec2(-2.0, -2.0));
  EXPECT_THROW(build_mesh(0, 3), Error);
}

TEST(Mesh, BoundaryEdgesLieOnTheBoundary) {
  const Mesh mesh = build_mesh(5, 5);
  double perimeter = 0.0;
  for (const auto& e : mesh.boundary_edges) {
    const Vec2 a = mesh.nodes[static_cast<std::size_t>(e.nodes[0])];
    const Vec2 b = mesh.nodes[static_cast<std::size_t>(e.nodes[1])];
    perimeter += (b - a).norm();
    switch (e.side) {
      case Side::Bottom: EXPECT_TRUE(a.y() == -2.0 && b.y() == -2.0); break;
      case Side::Right: EXPECT_TRUE(a.x() == 2.0 && b.x() == 2.0); break;
      case Side::Top: EXPECT_TRUE(a.y() == 2.0 && b.y() == 2.0); break;
      case Side::Left: EXPECT_TRUE(a.x() == -2.0 && b.x() == -2.0); break;
    }
  }
  EXPECT_NEAR(perimeter, 16.0, 1e-13);
}

TEST(LocalMatrices, MassAndStiffnessIdentities) {
  const std::array<Vec2, 3> v{Vec2(0.1, 0.2), Vec2(0.9, 0.3), Vec2(0.4, 1.1)};
  const double area = 0.5 * ((v[1] - v[0]).x() * (v[2] - v[0]).y() - (v[1] - v[0]).y() * (v[2] - v[0]).x());
  EXPECT_NEAR(local_mass(v).sum(), area, 1e-15);
  const Eigen::Matrix3d K = local_stiffness(v, 2.5);
  EXPECT_LE((K * Eigen::Vector3d::Ones()).norm(), 1e-14);
  EXPECT_LE((K - K.transpose()).norm(), 1e-15);
  // u = 3x - y has |grad u|^2 = 10.
  const Eigen::Vector3d u(3 * v[0].x() - v[0].y(), 3 * v[1].x() - v[1].y(), 3 * v[2].x() - v[2].y());
  EXPECT_NEAR(u.dot(K * u), 2.5 * 10.0 * area, 1e-13);
}

TEST(Assembly, IntegratesPolynomialsExactly) {
  const Mesh mesh = build_mesh(6, 6);
  const SparseMatrix M = assemble_mass(mesh);
  const NodalField one = NodalField::Ones(mesh.node_count());
  const NodalField x = interpolate(mesh, [](double px, double) { return px; });
  EXPECT_NEAR(quad(M, one), 16.0, 1e-12);
  // int x^2 over (-2,2)^2 = 64/3; P1 times P1 is integrated exactly.
  EXPECT_NEAR(quad(M, x), 64.0 / 3.0, 1e-12);
  const SparseMatrix K = assemble_stiffness(mesh, uniform_diffusivity(mesh, 15.0));
  EXPECT_NEAR(quad(K, x), 15.0 * 16.0, 1e-10);
  EXPECT_LE((K * one).norm(), 1e-11);
}

TEST(Assembly, BimaterialStiffness) {
  const Mesh mesh = build_mesh(8, 8);
  const auto D = bimaterial_diffusivity(mesh, 15.0);
  const NodalField x = interpolate(mesh, [](double px, double) { return px; });
  // Inner square (area 4) has D = 1, the frame (area 12) has D = 15.
  EXPECT_NEAR(quad(assemble_stiffness(mesh, D), x), 4.0 + 12.0 * 15.0, 1e-10);
  int inner = 0;
  for (const double d : D.values) inner += d == 1.0;
  EXPECT_EQ(inner, 2 * 4 * 4);
  EXPECT_THROW(uniform_diffusivity(mesh, 0.0), Error);
}

TEST(Assembly, GramIsMassPlusUnitStiffness) {
  const Mesh mesh = build_mesh(5, 4);
  const SparseMatrix G = h1_gram(mesh);
  const SparseMatrix ref = assemble_mass(mesh) + assemble_stiffness(mesh, uniform_diffusivity(mesh, 1.0));
  EXPECT_LE(Eigen::MatrixXd(G - ref).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(assemble_stiffness(mesh, uniform_diffusivity(build_mesh(2, 2), 1.0)), Error);
}

TEST(TimeGrid, Validation) {
  const TimeGrid g = make_time_grid(2.5, 200, 50);
  EXPECT_DOUBLE_EQ(g.tau(), 1.25e-2);
  EXPECT_DOUBLE_EQ(g.time(200), 2.5);
  EXPECT_THROW(make_time_grid(0.0, 10, 1), Error);
  EXPECT_THROW(make_time_grid(1.0, 10, 11), Error);
  EXPECT_THROW(make_time_grid(1.0, 10, 0), Error);
}

TEST(Radiation, VanishesAtAmbientAndIntegratesConstants) {
  const Mesh mesh = build_mesh(6, 6);
  const RadiationBC bc;
  const HeatStepper stepper(mesh, uniform_diffusivity(mesh, 1.0), bc);
  EXPECT_LE(stepper.radiation(NodalField::Constant(mesh.node_count(), bc.u_r)).cwiseAbs().maxCoeff(), 1e-12);
  const double u = 350.0;
  const double total = stepper.radiation(NodalField::Constant(mesh.node_count(), u)).sum();
  const double expected = bc.sigma * bc.epsilon * (std::pow(u, 4) - std::pow(bc.u_r, 4)) * 16.0;
  EXPECT_NEAR(total, expected, 1e-12 * std::abs(expected));
}

TEST(Radiation, EdgeQuadratureMatchesFineReference) {
  // The integrand is a degree-5 polynomial along the bottom edge, beyond the
  // two-point rule's exactness, but its variation is tiny next to u^4.
  const Mesh mesh = build_mesh(4, 4);
  const RadiationBC bc;
  const HeatStepper stepper(mesh, uniform_diffusivity(mesh, 1.0), bc);
  const NodalField u = interpolate(mesh, [](double x, double) { return 300.0 + 5.0 * x; });
  const Eigen::VectorXd r = stepper.radiation(u);
  // Node (0,0) at (-2,-2) touches the bottom edge to (-1,-2) and the left edge to (-2,-1).
  auto edge_integral = [&](auto u_of_s) {
    const int n = 2000;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double t = static_cast<double>(i) / n;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      s += w * (std::pow(u_of_s(t), 4) - std::pow(bc.u_r, 4)) * (1.0 - t);
    }
    return s / (3.0 * n);
  };
  const double bottom = edge_integral([](double t) { return 300.0 + 5.0 * (-2.0 + t); });
  const double left = edge_integral([](double) { return 300.0 - 10.0; });
  const double expected = bc.sigma * bc.epsilon * (bottom + left);
  EXPECT_NEAR(r[0], expected, 1e-6 * std::abs(expected));
}

TEST(HeatStep, AmbientStateIsStationary) {
  const Mesh mesh = build_mesh(6, 6);
  const RadiationBC bc;
  const NodalField u = NodalField::Constant(mesh.node_count(), bc.u_r);
  const StepResult r = step_implicit_euler(mesh, u, 0.1, bimaterial_diffusivity(mesh, 15.0), bc);
  EXPECT_LE((r.u - u).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(HeatStep, ResidualVanishesAndEnergyBalances) {
  const Mesh mesh = build_mesh(8, 8);
  RadiationBC bc;
  bc.epsilon = 0.5;  // strong radiation so Newton has work to do
  const auto D = bimaterial_diffusivity(mesh, 15.0);
  const HeatStepper stepper(mesh, D, bc);
  const NodalField u0 = interpolate(mesh, [](double x, double y) { return 400.0 + 20.0 * x * y; });
  const double tau = 0.5;
  const StepResult r = stepper.step(u0, tau);
  EXPECT_GE(r.iterations, 2);
  const Eigen::VectorXd res = stepper.residual(r.u, u0, tau);
  EXPECT_LE(res.norm() / static_cast<double>(res.size()), 1e-10 * 440.0);
  // 1^T K u = 0, so heat content changes only through the boundary.
  const NodalField one = NodalField::Ones(mesh.node_count());
  const double storage = one.dot(stepper.mass() * (r.u - u0)) / tau;
  EXPECT_NEAR(storage, -stepper.radiation(r.u).sum(), 1e-8 * std::abs(storage));
}

TEST(HeatStep, NewtonConvergesFastAndReportsFailure) {
  const Mesh mesh = build_mesh(6, 6);
  RadiationBC bc;
  bc.epsilon = 1.0;
  const auto D = uniform_diffusivity(mesh, 1.0);
  const NodalField u0 = NodalField::Constant(mesh.node_count(), 600.0);
  const StepResult r = step_implicit_euler(mesh, u0, 1.0, D, bc);
  EXPECT_LE(r.iterations, 8);
  EXPECT_LE(r.residual, NewtonOptions{}.tolerance * 600.0 * 10.0);
  try {
    step_implicit_euler(mesh, u0, 1.0, D, bc, NewtonOptions{1, 1e-300});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonConvergence);
  }
}

TEST(HeatStep, NonPhysicalInitialState) {
  const Mesh mesh = build_mesh(3, 3);
  const TimeGrid g = make_time_grid(1.0, 2, 1);
  try {
    solve_trajectory(mesh, NodalField::Constant(mesh.node_count(), -1.0), g,
                     uniform_diffusivity(mesh, 1.0), RadiationBC{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPhysical);
  }
}

TEST(Trajectory, WarmsMonotonicallyTowardAmbientAndStaysSymmetric) {
  const Mesh mesh = build_mesh(16, 16);
  const TimeGrid g = make_time_grid(2.5, 40, 10);
  const RadiationBC bc;
  const Trajectory tr = solve_trajectory(mesh, NodalField::Constant(mesh.node_count(), 293.15), g,
                                         bimaterial_diffusivity(mesh, 15.0), bc);
  ASSERT_EQ(tr.size(), 41u);
  for (std::size_t k = 1; k < tr.size(); ++k) {
    EXPECT_GE(tr[k].minCoeff(), tr[k - 1].minCoeff());
    EXPECT_LE(tr[k].maxCoeff(), bc.u_r);
  }
  EXPECT_GT(tr[40].mean() - 293.15, 0.1);
  // The problem is invariant under x -> -x and x <-> y, and so is the mesh.
  const NodalField& u = tr[40];
  for (int j = 0; j <= 16; ++j) {
    for (int i = 0; i <= 16; ++i) {
      EXPECT_NEAR(u[mesh.node_index(i, j)], u[mesh.node_index(16 - i, 16 - j)], 1e-9);
      EXPECT_NEAR(u[mesh.node_index(i, j)], u[mesh.node_index(j, i)], 1e-9);
    }
  }
}

TEST(Trajectory, BimaterialDepartsFromUniformOverTime) {
  // Under these constants the plate warms by well under a kelvin, so the two
  // materials differ only slightly; the gap must still be resolved and grow.
  const Mesh mesh = build_mesh(32, 32);
  const TimeGrid g = make_time_grid(2.5, 200, 50);
  const NodalField u0 = NodalField::Constant(mesh.node_count(), 293.15);
  const Trajectory bi = solve_trajectory(mesh, u0, g, bimaterial_diffusivity(mesh, 15.0), RadiationBC{});
  const Trajectory uni = solve_trajectory(mesh, u0, g, uniform_diffusivity(mesh, 15.0), RadiationBC{});
  const SparseMatrix M = assemble_mass(mesh);
  auto rel = [&](std::size_t k) { return std::sqrt(quad(M, bi[k] - uni[k]) / quad(M, bi[k])); };
  EXPECT_GT(rel(200), 1e-6);
  EXPECT_GT(rel(200), rel(50));
  EXPECT_LT(rel(200), 1e-3);
}

TEST(FieldIo, CsvAndBinaryRoundTrip) {
  const Mesh mesh = build_mesh(3, 2);
  const NodalField u = interpolate(mesh, [](double x, double y) { return std::exp(x) / 3.0 + y; });
  std::stringstream csv;
  io::write_field_csv(csv, mesh, u);
  EXPECT_EQ(csv.str().substr(0, 15), "node,x,y,value\n");
  EXPECT_EQ(io::read_field_csv(csv), u);

  std::stringstream bin;
  io::write_fields_binary(bin, {u, 2.0 * u, -u});
  const std::string bytes = bin.str();
  EXPECT_EQ(bytes.substr(0, 4), "SVDA");
  EXPECT_EQ(bytes.size(), 4u + 4u + 8u + 8u + 3u * 12u * 8u);
  const auto back = io::read_fields_binary(bin);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1], 2.0 * u);

  std::stringstream bad("NOPE");
  EXPECT_THROW(io::read_fields_binary(bad), Error);
}

}  // namespace
}  // namespace svda::fem
