#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "svda/errors.hpp"
#include "svda/fem.hpp"
#include "svda/field_io.hpp"
#include "svda/reduction.hpp"

namespace svda::rom {
namespace {

struct Fixture {
  fem::Mesh mesh = fem::build_mesh(10, 10);
  fem::SparseMatrix G = fem::h1_gram(mesh);

  [[nodiscard]] std::vector<fem::NodalField> generators() const {
    return {fem::interpolate(mesh, [](double x, double y) { return 1.0 + 0.1 * x * y; }),
            fem::interpolate(mesh, [](double x, double y) { return std::cos(x) * std::sin(0.7 * y); }),
            fem::interpolate(mesh, [](double x, double y) { return x * x - y; })};
  }

  // Snapshots in span{g_0, g_1, g_2} with smoothly varying weights.
  [[nodiscard]] std::vector<fem::NodalField> snapshots(int count) const {
    const auto g = generators();
    std::vector<fem::NodalField> out;
    for (int k = 0; k < count; ++k) {
      const double t = static_cast<double>(k) / count;
      out.push_back(g[0] + std::sin(3.0 * t) * g[1] + t * t * g[2]);
    }
    return out;
  }

  // Snapshots that are not confined to a low-dimensional span.
  [[nodiscard]] std::vector<fem::NodalField> rich_snapshots(int count) const {
    std::vector<fem::NodalField> out;
    for (int k = 0; k < count; ++k) {
      const double a = 0.3 + 0.05 * k;
      out.push_back(fem::interpolate(mesh, [a](double x, double y) { return std::exp(-a * (x * x + 0.5 * y * y)) + a * x; }));
    }
    return out;
  }
};

double g_dot(const fem::NodalField& a, const fem::NodalField& b, const fem::SparseMatrix& G) {
  return a.dot(G * b);
}

TEST(Pod, BasisIsGOrthonormal) {
  const Fixture f;
  const BackgroundSpace s = pod(f.rich_snapshots(12), f.G, 5);
  ASSERT_EQ(s.size(), 5);
  const Eigen::MatrixXd gram = s.basis.transpose() * (f.G * s.basis);
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
  for (int i = 1; i < 5; ++i) EXPECT_GE(s.eigenvalues[i - 1], s.eigenvalues[i]);
}

TEST(Pod, SpectrumMatchesDenseSnapshotGram) {
  const Fixture f;
  const auto snaps = f.rich_snapshots(10);
  Eigen::MatrixXd C(10, 10);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) C(i, j) = g_dot(snaps[static_cast<std::size_t>(i)], snaps[static_cast<std::size_t>(j)], f.G);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
  const Eigen::VectorXd ref = eig.eigenvalues().reverse();
  const BackgroundSpace s = pod(snaps, f.G, 3);
  ASSERT_EQ(s.spectrum.size(), 10);
  // The dense eigensolve is only accurate to eps * lambda_max in absolute terms.
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(s.spectrum[i], ref[i], 1e-11 * ref[0]) << i;
  EXPECT_NEAR(s.discarded_energy, s.spectrum.tail(7).sum(), 1e-15 * s.spectrum[0]);
}

TEST(Pod, ProjectionErrorEqualsDiscardedEnergy) {
  const Fixture f;
  const auto snaps = f.rich_snapshots(12);
  for (int N : {1, 2, 4}) {
    const BackgroundSpace s = pod(snaps, f.G, N);
    double residual = 0.0;
    for (const auto& u : snaps) residual += std::pow(projection_error(u, s.basis, f.G), 2);
    EXPECT_NEAR(residual, s.discarded_energy, 1e-9 * s.spectrum[0]) << N;
  }
}

TEST(Pod, RecoversAnExactSpan) {
  const Fixture f;
  const auto snaps = f.snapshots(30);
  const BackgroundSpace s = pod(snaps, f.G, 3);
  for (const auto& g : f.generators()) {
    EXPECT_LE(projection_error(g, s.basis, f.G), 1e-10 * std::sqrt(g_dot(g, g, f.G)));
  }
  try {
    pod(snaps, f.G, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RankDeficient);
  }
}

TEST(Pod, ArgumentValidationAndSign) {
  const Fixture f;
  const auto snaps = f.rich_snapshots(4);
  EXPECT_THROW(pod(snaps, f.G, 0), Error);
  EXPECT_THROW(pod(snaps, f.G, 5), Error);
  EXPECT_THROW(pod({fem::NodalField::Ones(3)}, f.G, 1), Error);
  EXPECT_THROW(pod({fem::NodalField::Zero(f.mesh.node_count())}, f.G, 1), Error);
  const BackgroundSpace s = pod(snaps, f.G, 3);
  for (int i = 0; i < 3; ++i) {
    const auto col = s.basis.col(i);
    Eigen::Index r = 0;
    while (std::abs(col[r]) <= 1e-12 * col.cwiseAbs().maxCoeff()) ++r;
    EXPECT_GT(col[r], 0.0);
  }
}

TEST(Projection, IdempotentAndOrthogonal) {
  const Fixture f;
  const BackgroundSpace s = pod(f.rich_snapshots(8), f.G, 3);
  const fem::NodalField u = fem::interpolate(f.mesh, [](double x, double y) { return std::tanh(x - y) + 2.0; });
  const fem::NodalField p = project(u, s.basis, f.G);
  EXPECT_LE((project(p, s.basis, f.G) - p).norm(), 1e-12 * p.norm());
  const Eigen::VectorXd ortho = s.basis.transpose() * (f.G * (u - p));
  EXPECT_LE(ortho.cwiseAbs().maxCoeff(), 1e-12 * std::sqrt(g_dot(u, u, f.G)));
  // Pythagoras.
  const double e = projection_error(u, s.basis, f.G);
  EXPECT_NEAR(e * e + g_dot(p, p, f.G), g_dot(u, u, f.G), 1e-11 * g_dot(u, u, f.G));
}

TEST(Projection, NonOrthogonalBasisMatchesLeastSquares) {
  const Fixture f;
  const auto g = f.generators();
  Eigen::MatrixXd basis(f.mesh.node_count(), 2);
  basis << g[0], g[2];
  const fem::NodalField u = g[1] + 0.5 * g[2];
  // Reference from the normal equations written out longhand.
  Eigen::Matrix2d gram;
  gram << g_dot(g[0], g[0], f.G), g_dot(g[0], g[2], f.G), g_dot(g[2], g[0], f.G), g_dot(g[2], g[2], f.G);
  const Eigen::Vector2d rhs(g_dot(g[0], u, f.G), g_dot(g[2], u, f.G));
  const Eigen::Vector2d ref = gram.inverse() * rhs;
  const Eigen::VectorXd c = projection_coefficients(u, basis, f.G);
  EXPECT_LE((c - ref).cwiseAbs().maxCoeff(), 1e-12 * ref.cwiseAbs().maxCoeff());
}

TEST(Projection, DependentBasisIsRejected) {
  const Fixture f;
  const auto g = f.generators();
  Eigen::MatrixXd basis(f.mesh.node_count(), 3);
  basis << g[0], g[1], 2.0 * g[0] - g[1];
  try {
    project(g[2], basis, f.G);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularProjectionGram);
  }
  EXPECT_THROW(project(fem::NodalField::Ones(4), basis, f.G), Error);
}

TEST(BasisIo, BinaryRoundTrip) {
  const Fixture f;
  const BackgroundSpace s = pod(f.rich_snapshots(6), f.G, 4);
  std::stringstream ss;
  io::write_basis_binary(ss, s.basis);
  EXPECT_EQ(io::read_basis_binary(ss), s.basis);
}

}  // namespace
}  // namespace svda::rom
