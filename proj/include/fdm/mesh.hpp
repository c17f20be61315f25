#pragma once

#include <filesystem>
#include <string_view>

#include "fdm/common.hpp"

namespace fdm {

using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using TetIndices = Eigen::Matrix<int, Eigen::Dynamic, 4, Eigen::RowMajor>;
using TriIndices = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Raised for structurally invalid meshes. `offending` lists the element or
/// vertex indices that triggered the failure.
class MeshError : public InputError {
 public:
  MeshError(const std::string& what, std::vector<Index> offending = {})
      : InputError(what), offending_(std::move(offending)) {}
  const std::vector<Index>& offending() const { return offending_; }

 private:
  std::vector<Index> offending_;
};

/// Validated tetrahedral mesh. Construction checks index ranges, positive
/// orientation of every element, that every vertex is used, and that the
/// boundary is a closed orientable 2-manifold.
class TetMesh {
 public:
  static TetMesh create(Positions vertices, TetIndices tets);

  const Positions& vertices() const { return vertices_; }
  const TetIndices& tets() const { return tets_; }
  /// Boundary triangles, outward oriented.
  const TriIndices& surface() const { return surface_; }
  /// Sorted unique vertex ids on the boundary.
  const std::vector<Index>& surface_vertices() const { return surface_vertices_; }

  Index num_vertices() const { return vertices_.rows(); }
  Index num_tets() const { return tets_.rows(); }
  Index dofs() const { return 3 * vertices_.rows(); }

  Vec3 vertex(Index i) const { return vertices_.row(i).transpose(); }
  double tet_volume(Index t) const;
  double total_volume() const;
  bool is_surface_vertex(Index v) const { return on_surface_[static_cast<std::size_t>(v)]; }

 private:
  TetMesh() = default;

  Positions vertices_;
  TetIndices tets_;
  TriIndices surface_;
  std::vector<Index> surface_vertices_;
  std::vector<bool> on_surface_;
};

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

enum class MeshFormat { tetgen, gmsh };

MeshFormat parse_mesh_format(std::string_view name);

/// Loads a TetGen `.node`/`.ele` pair (path may name either file or the
/// shared stem) or an ASCII v2 Gmsh `.msh` file with 4-node tetrahedra.
TetMesh load_mesh(const std::filesystem::path& path, MeshFormat format);

void write_tetgen(const TetMesh& mesh, const std::filesystem::path& stem);

/// Per-vertex barycentric surface area and area-weighted unit normal.
/// Interior vertices get zero area and a zero normal.
struct SurfaceMeasures {
  Vec areas;
  Positions normals;
};
SurfaceMeasures surface_measures(const TetMesh& mesh);

}  // namespace fdm
