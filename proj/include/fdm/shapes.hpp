#pragma once

#include "fdm/mesh.hpp"

namespace fdm {

/// Axis-aligned box of nx*ny*nz cells, each split into five tetrahedra with
/// alternating orientation so neighbouring cells share face diagonals.
TetMesh box_mesh(int nx, int ny, int nz, const Vec3& lo, const Vec3& hi);

/// Occupancy grid of cubical cells with edge length `spacing`, origin at
/// `origin`. Cell (i, j, k) lives at occupied[i + nx * (j + ny * k)].
struct VoxelGrid {
  int nx = 0;
  int ny = 0;
  int nz = 0;
  double spacing = 1.0;
  Vec3 origin = Vec3::Zero();
  std::vector<bool> occupied;

  VoxelGrid(int nx_, int ny_, int nz_, double spacing_, const Vec3& origin_ = Vec3::Zero());
  void fill(int i0, int j0, int k0, int i1, int j1, int k1);  // half-open ranges
  bool at(int i, int j, int k) const;
};

TetMesh voxel_mesh(const VoxelGrid& grid);

/// Desk-scale stand-ins for the scenes used in experiments: a torso with head,
/// two arms and two legs, and a body with two thin wings.
/// The bear is 4 m wide and 3.25 m tall (0.25 m cells at resolution 1); its
/// feet sit on y = 0 and the left arm tip on x = 0.
TetMesh bear_proxy_mesh(int resolution = 1);
TetMesh bat_proxy_mesh();

}  // namespace fdm
