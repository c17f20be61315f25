#pragma once

#include <doctest.h>

#include <Eigen/Geometry>

#include <random>

#include "fdm/shapes.hpp"
#include "fdm/subspace.hpp"

namespace fdm::test {

struct Scene {
  TetMesh mesh;
  MaterialParams mat;
  std::vector<Index> pins;
  SystemOperators ops;
};

inline std::vector<Index> vertices_below(const TetMesh& mesh, int axis, double value) {
  std::vector<Index> out;
  for (Index v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.vertex(v)(axis) <= value + 1e-12) out.push_back(v);
  return out;
}

/// Box of cells (nx, ny, nz) spanning [0, hi], pinned on z = 0.
inline Scene pinned_bar(int nx, int ny, int nz, const Vec3& hi, MaterialParams mat = {}) {
  TetMesh mesh = box_mesh(nx, ny, nz, Vec3::Zero(), hi);
  auto pins = vertices_below(mesh, 2, 0.0);
  SystemOperators ops = SystemOperators::build(mesh, mat, pins);
  return Scene{std::move(mesh), mat, std::move(pins), std::move(ops)};
}

/// The 3 x 3 x 11 vertex bar (297 coordinates) used across tests.
inline Scene small_bar() { return pinned_bar(2, 2, 10, Vec3(0.1, 0.1, 1.0)); }

inline Mat dense(const SpMat& a) { return Mat(a); }

inline Vec random_vector(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline Mat random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Mat a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = normal(rng);
  return a;
}

inline double m_norm(const Vec& u, const Vec& mass) { return std::sqrt(u.dot(mass.cwiseProduct(u))); }

/// Vertex nearest to a point.
inline Index nearest_vertex(const TetMesh& mesh, const Vec3& p) {
  Index best = 0;
  for (Index v = 1; v < mesh.num_vertices(); ++v)
    if ((mesh.vertex(v) - p).squaredNorm() < (mesh.vertex(best) - p).squaredNorm()) best = v;
  return best;
}

/// Six rigid fields (3 translations, 3 infinitesimal rotations) as columns.
inline Mat rigid_fields(const TetMesh& mesh) {
  Mat r = Mat::Zero(mesh.dofs(), 6);
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const Vec3 x = mesh.vertex(v);
    for (int d = 0; d < 3; ++d) r(3 * v + d, d) = 1.0;
    for (int a = 0; a < 3; ++a) {
      Vec3 axis = Vec3::Zero();
      axis(a) = 1.0;
      r.block<3, 1>(3 * v, 3 + a) = axis.cross(x);
    }
  }
  return r;
}

}  // namespace fdm::test
