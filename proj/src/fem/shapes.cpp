#include "fdm/shapes.hpp"

#include <array>

namespace fdm {

namespace {

// Corner c of a unit cell has offsets (c & 1, (c >> 1) & 1, (c >> 2) & 1).
constexpr std::array<std::array<int, 4>, 5> kEvenSplit{{{1, 2, 4, 7}, {0, 1, 2, 4}, {3, 1, 7, 2}, {5, 1, 4, 7}, {6, 2, 7, 4}}};
constexpr std::array<std::array<int, 4>, 5> kOddSplit{{{0, 3, 5, 6}, {1, 0, 5, 3}, {2, 0, 3, 6}, {4, 0, 6, 5}, {7, 3, 6, 5}}};

}  // namespace

VoxelGrid::VoxelGrid(int nx_, int ny_, int nz_, double spacing_, const Vec3& origin_)
    : nx(nx_), ny(ny_), nz(nz_), spacing(spacing_), origin(origin_),
      occupied(static_cast<std::size_t>(nx_) * ny_ * nz_, false) {
  if (nx <= 0 || ny <= 0 || nz <= 0 || !(spacing > 0.0)) throw InputError("voxel grid needs positive dimensions");
}

void VoxelGrid::fill(int i0, int j0, int k0, int i1, int j1, int k1) {
  for (int k = std::max(0, k0); k < std::min(nz, k1); ++k)
    for (int j = std::max(0, j0); j < std::min(ny, j1); ++j)
      for (int i = std::max(0, i0); i < std::min(nx, i1); ++i)
        occupied[static_cast<std::size_t>(i + nx * (j + ny * k))] = true;
}

bool VoxelGrid::at(int i, int j, int k) const {
  return occupied[static_cast<std::size_t>(i + nx * (j + ny * k))];
}

TetMesh voxel_mesh(const VoxelGrid& grid) {
  const auto lattice = [&](int i, int j, int k) {
    return static_cast<Index>(i + (grid.nx + 1) * (j + (grid.ny + 1) * k));
  };
  const Index lattice_size = static_cast<Index>(grid.nx + 1) * (grid.ny + 1) * (grid.nz + 1);
  std::vector<Index> remap(static_cast<std::size_t>(lattice_size), -1);
  std::vector<std::array<Index, 4>> raw;

  for (int k = 0; k < grid.nz; ++k) {
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        if (!grid.at(i, j, k)) continue;
        std::array<Index, 8> corner{};
        for (int c = 0; c < 8; ++c) corner[c] = lattice(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
        const auto& split = ((i + j + k) % 2 == 0) ? kEvenSplit : kOddSplit;
        for (const auto& tet : split) raw.push_back({corner[tet[0]], corner[tet[1]], corner[tet[2]], corner[tet[3]]});
      }
    }
  }
  if (raw.empty()) throw InputError("voxel grid is empty");

  Index next = 0;
  for (const auto& tet : raw)
    for (Index v : tet)
      if (remap[static_cast<std::size_t>(v)] < 0) remap[static_cast<std::size_t>(v)] = next++;
  // Renumber in lattice order so vertex ids are stable and spatially sorted.
  next = 0;
  for (auto& r : remap)
    if (r >= 0) r = next++;

  Positions vertices(next, 3);
  for (int k = 0; k <= grid.nz; ++k)
    for (int j = 0; j <= grid.ny; ++j)
      for (int i = 0; i <= grid.nx; ++i) {
        const Index r = remap[static_cast<std::size_t>(lattice(i, j, k))];
        if (r >= 0) vertices.row(r) = (grid.origin + grid.spacing * Vec3(i, j, k)).transpose();
      }

  TetIndices tets(static_cast<Index>(raw.size()), 4);
  for (std::size_t t = 0; t < raw.size(); ++t) {
    std::array<int, 4> ids{};
    for (int c = 0; c < 4; ++c) ids[c] = static_cast<int>(remap[static_cast<std::size_t>(raw[t][c])]);
    const double vol = signed_tet_volume(vertices.row(ids[0]).transpose(), vertices.row(ids[1]).transpose(),
                                         vertices.row(ids[2]).transpose(), vertices.row(ids[3]).transpose());
    if (vol < 0.0) std::swap(ids[2], ids[3]);
    tets.row(static_cast<Index>(t)) << ids[0], ids[1], ids[2], ids[3];
  }
  return TetMesh::create(std::move(vertices), std::move(tets));
}

TetMesh box_mesh(int nx, int ny, int nz, const Vec3& lo, const Vec3& hi) {
  if (nx <= 0 || ny <= 0 || nz <= 0) throw InputError("box_mesh needs positive cell counts");
  if (!((hi - lo).array() > 0.0).all()) throw InputError("box_mesh needs hi > lo");
  VoxelGrid grid(nx, ny, nz, 1.0);
  grid.fill(0, 0, 0, nx, ny, nz);
  TetMesh unit = voxel_mesh(grid);
  Positions v = unit.vertices();
  const Vec3 scale((hi - lo).x() / nx, (hi - lo).y() / ny, (hi - lo).z() / nz);
  for (Index i = 0; i < v.rows(); ++i) v.row(i) = (lo + scale.cwiseProduct(v.row(i).transpose())).transpose();
  return TetMesh::create(std::move(v), unit.tets());
}

TetMesh bear_proxy_mesh(int resolution) {
  const int r = std::max(1, resolution);
  // Cell layout at r = 1, x shifted by 4 so the left arm starts at 0; y is up.
  VoxelGrid grid(16 * r, 13 * r, 4 * r, 0.25 / r);
  grid.fill(5 * r, 0, 1 * r, 7 * r, 3 * r, 3 * r);         // left leg
  grid.fill(9 * r, 0, 1 * r, 11 * r, 3 * r, 3 * r);        // right leg
  grid.fill(4 * r, 3 * r, 0, 12 * r, 9 * r, 4 * r);        // torso
  grid.fill(6 * r, 9 * r, 0, 10 * r, 13 * r, 4 * r);       // head
  grid.fill(0, 6 * r, 1 * r, 4 * r, 8 * r, 3 * r);         // left arm
  grid.fill(12 * r, 6 * r, 1 * r, 16 * r, 8 * r, 3 * r);   // right arm
  return voxel_mesh(grid);
}

TetMesh bat_proxy_mesh() {
  // Body spans x in [8, 12) cells; wings are one cell thick on either side.
  VoxelGrid grid(20, 2, 6, 0.05);
  grid.fill(8, 0, 0, 12, 2, 6);    // body
  grid.fill(0, 0, 1, 8, 1, 5);     // left wing
  grid.fill(12, 0, 1, 20, 1, 5);   // right wing
  return voxel_mesh(grid);
}

}  // namespace fdm
