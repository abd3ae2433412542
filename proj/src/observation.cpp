#include "svda/observation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "svda/csv.hpp"
#include "svda/errors.hpp"
#include "svda/linalg.hpp"

namespace svda::obs {

namespace {

using Polygon = std::vector<fem::Vec2>;

// Keeps the part of the polygon where sign * (p[axis] - bound) <= 0.
Polygon clip_half_plane(const Polygon& poly, int axis, double bound, double sign) {
  Polygon out;
  if (poly.empty()) return out;
  auto inside = [&](const fem::Vec2& p) { return sign * (p[axis] - bound) <= 0.0; };
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const fem::Vec2& cur = poly[i];
    const fem::Vec2& next = poly[(i + 1) % poly.size()];
    const bool cur_in = inside(cur);
    const bool next_in = inside(next);
    if (cur_in) out.push_back(cur);
    if (cur_in != next_in) {
      const double s = (bound - cur[axis]) / (next[axis] - cur[axis]);
      fem::Vec2 p = cur + s * (next - cur);
      p[axis] = bound;
      out.push_back(p);
    }
  }
  return out;
}

// Area and centroid by the shoelace formula.
std::pair<double, fem::Vec2> area_centroid(const Polygon& poly) {
  double twice_area = 0.0;
  fem::Vec2 acc = fem::Vec2::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const fem::Vec2& a = poly[i];
    const fem::Vec2& b = poly[(i + 1) % poly.size()];
    const double cross = a.x() * b.y() - b.x() * a.y();
    twice_area += cross;
    acc += (a + b) * cross;
  }
  if (std::abs(twice_area) < 1e-300) return {0.0, fem::Vec2::Zero()};
  return {0.5 * twice_area, acc / (3.0 * twice_area)};
}

// Barycentric coordinates of p in triangle t.
Eigen::Vector3d barycentric(const fem::Mesh& mesh, int t, const fem::Vec2& p) {
  const auto v = mesh.triangle_vertices(t);
  const double det = (v[1] - v[0]).x() * (v[2] - v[0]).y() - (v[1] - v[0]).y() * (v[2] - v[0]).x();
  const fem::Vec2 d = p - v[0];
  const double l1 = (d.x() * (v[2] - v[0]).y() - d.y() * (v[2] - v[0]).x()) / det;
  const double l2 = ((v[1] - v[0]).x() * d.y() - (v[1] - v[0]).y() * d.x()) / det;
  return {1.0 - l1 - l2, l1, l2};
}

}  // namespace

double Patch::covered_area() const {
  double sum = 0.0;
  for (const auto& o : overlaps) sum += o.area;
  return sum;
}

Patch make_patch(const fem::Mesh& mesh, const fem::Vec2& center, double halfwidth) {
  if (!(halfwidth > 0.0)) throw Error(ErrorKind::Config, "patch halfwidth must be positive");
  constexpr double slack = 1e-12;
  const fem::Vec2 lo = center.array() - halfwidth;
  const fem::Vec2 hi = center.array() + halfwidth;
  if (lo.minCoeff() < fem::kDomainMin - slack || hi.maxCoeff() > fem::kDomainMax + slack) {
    throw Error(ErrorKind::PatchOutsideDomain,
                "patch at (" + std::to_string(center.x()) + ", " + std::to_string(center.y()) +
                    ") with halfwidth " + std::to_string(halfwidth) + " leaves the plate");
  }

  Patch patch;
  patch.center = center;
  patch.halfwidth = halfwidth;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    Polygon poly;
    for (const auto& v : mesh.triangle_vertices(t)) poly.push_back(v);
    const auto [bmin_x, bmax_x] = std::minmax({poly[0].x(), poly[1].x(), poly[2].x()});
    const auto [bmin_y, bmax_y] = std::minmax({poly[0].y(), poly[1].y(), poly[2].y()});
    if (bmax_x <= lo.x() || bmin_x >= hi.x() || bmax_y <= lo.y() || bmin_y >= hi.y()) continue;
    poly = clip_half_plane(poly, 0, lo.x(), -1.0);
    poly = clip_half_plane(poly, 0, hi.x(), 1.0);
    poly = clip_half_plane(poly, 1, lo.y(), -1.0);
    poly = clip_half_plane(poly, 1, hi.y(), 1.0);
    if (poly.size() < 3) continue;
    const auto [area, centroid] = area_centroid(poly);
    if (area <= 0.0) continue;
    patch.overlaps.push_back({t, area, centroid});
  }
  return patch;
}

std::vector<Patch> build_patch_grid(int side_count, double halfwidth, const fem::Mesh& mesh,
                                    double margin) {
  if (side_count < 1) throw Error(ErrorKind::Config, "sensor side count must be positive");
  const double lo = fem::kDomainMin + margin;
  const double hi = fem::kDomainMax - margin;
  std::vector<Patch> patches;
  patches.reserve(static_cast<std::size_t>(side_count * side_count));
  auto coord = [&](int i) {
    if (side_count == 1) return 0.5 * (lo + hi);
    return lo + (hi - lo) * static_cast<double>(i) / (side_count - 1);
  };
  for (int j = 0; j < side_count; ++j) {
    for (int i = 0; i < side_count; ++i) {
      patches.push_back(make_patch(mesh, fem::Vec2(coord(i), coord(j)), halfwidth));
    }
  }
  return patches;
}

double observe(const fem::Mesh& mesh, const fem::NodalField& field, const Patch& patch) {
  double integral = 0.0;
  for (const auto& o : patch.overlaps) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(o.triangle)];
    const Eigen::Vector3d lam = barycentric(mesh, o.triangle, o.centroid);
    // A linear function integrates to area * value at the centroid.
    integral += o.area * (lam[0] * field[tri[0]] + lam[1] * field[tri[1]] + lam[2] * field[tri[2]]);
  }
  return integral / patch.area();
}

Eigen::VectorXd functional_vector(const fem::Mesh& mesh, const Patch& patch) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.node_count());
  const double inv_area = 1.0 / patch.area();
  for (const auto& o : patch.overlaps) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(o.triangle)];
    const Eigen::Vector3d lam = barycentric(mesh, o.triangle, o.centroid);
    for (int a = 0; a < 3; ++a) b[tri[a]] += o.area * lam[a] * inv_area;
  }
  return b;
}

fem::NodalField riesz_representer(const Patch& patch, const fem::SparseMatrix& G,
                                  const fem::Mesh& mesh) {
  const SpdFactorization factor(G);
  return factor.solve(functional_vector(mesh, patch));
}

ObservableSpace build_observable_space(std::vector<Patch> patches, const fem::SparseMatrix& G,
                                       const fem::Mesh& mesh) {
  const int M = static_cast<int>(patches.size());
  if (M == 0) throw Error(ErrorKind::Config, "observable space needs at least one sensor");
  ObservableSpace space;
  space.functionals.resize(mesh.node_count(), M);
  for (int m = 0; m < M; ++m) {
    space.functionals.col(m) = functional_vector(mesh, patches[static_cast<std::size_t>(m)]);
  }
  const SpdFactorization factor(G);
  space.representers = factor.solve(space.functionals);
  // A_{m m'} = (q_m', q_m)_G = l_m(q_m')
  const Eigen::MatrixXd A = space.functionals.transpose() * space.representers;
  space.gram_A = 0.5 * (A + A.transpose());
  space.patches = std::move(patches);
  return space;
}

ObservationSeries observe_trajectory(const fem::Trajectory& traj, const ObservableSpace& space,
                                     const fem::TimeGrid& grid) {
  ObservationSeries series;
  series.grid = grid;
  series.values.resize(static_cast<Eigen::Index>(traj.size()), space.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (traj[k].size() != space.functionals.rows()) {
      throw Error(ErrorKind::DimensionMismatch, "trajectory and sensors live on different meshes");
    }
    series.values.row(static_cast<Eigen::Index>(k)) = space.observe(traj[k]).transpose();
  }
  return series;
}

void write_observation_csv(std::ostream& os, const ObservationSeries& series) {
  os << "k,t";
  for (int m = 1; m <= series.sensors(); ++m) os << ",l_" << m;
  os << '\n';
  for (int k = 0; k < series.rows(); ++k) {
    os << k << ',' << csv::format(series.grid.time(k));
    for (int m = 0; m < series.sensors(); ++m) os << ',' << csv::format(series.values(k, m));
    os << '\n';
  }
}

ObservationSeries read_observation_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::Io, "observation CSV is empty");
  const auto header = csv::split(line);
  if (header.size() < 3 || csv::trim(header[0]) != "k" || csv::trim(header[1]) != "t") {
    throw Error(ErrorKind::Io, "observation CSV header must start with k,t,l_1");
  }
  const std::size_t M = header.size() - 2;
  std::vector<std::vector<double>> rows;
  std::vector<double> times;
  while (std::getline(is, line)) {
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::Io, "observation CSV row " + std::to_string(rows.size() + 1) +
                                     " has the wrong number of columns");
    }
    times.push_back(csv::parse_double(cells[1]));
    std::vector<double> row(M);
    for (std::size_t m = 0; m < M; ++m) row[m] = csv::parse_double(cells[m + 2]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::Io, "observation CSV has no data rows");

  ObservationSeries series;
  series.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(M));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t m = 0; m < M; ++m) {
      series.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) = rows[k][m];
    }
  }
  const int K = static_cast<int>(rows.size()) - 1;
  series.grid = fem::TimeGrid{K > 0 ? times.back() : 0.0, K, 1};
  return series;
}

}  // namespace svda::obs
