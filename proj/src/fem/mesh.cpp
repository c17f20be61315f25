#include "fdm/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <map>
#include <unordered_map>

namespace fdm {

namespace {

// Outward faces of a positively oriented tet (a, b, c, d).
constexpr std::array<std::array<int, 3>, 4> kTetFaces{{{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}}};

using FaceKey = std::array<int, 3>;

FaceKey sorted_key(std::array<int, 3> f) {
  std::sort(f.begin(), f.end());
  return f;
}

struct FaceKeyHash {
  std::size_t operator()(const FaceKey& k) const noexcept {
    std::size_t h = static_cast<std::size_t>(k[0]);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::size_t>(k[1]);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::size_t>(k[2]);
    return h;
  }
};

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

TriIndices extract_surface(const TetIndices& tets) {
  std::unordered_map<FaceKey, int, FaceKeyHash> counts;
  counts.reserve(static_cast<std::size_t>(tets.rows()) * 4);
  for (Index t = 0; t < tets.rows(); ++t) {
    for (const auto& f : kTetFaces) {
      ++counts[sorted_key({tets(t, f[0]), tets(t, f[1]), tets(t, f[2])})];
    }
  }
  std::vector<Index> overshared;
  std::vector<std::array<int, 3>> boundary;
  for (Index t = 0; t < tets.rows(); ++t) {
    for (const auto& f : kTetFaces) {
      const std::array<int, 3> face{tets(t, f[0]), tets(t, f[1]), tets(t, f[2])};
      const int c = counts[sorted_key(face)];
      if (c == 1) boundary.push_back(face);
      if (c > 2) overshared.push_back(t);
    }
  }
  if (!overshared.empty()) {
    overshared.erase(std::unique(overshared.begin(), overshared.end()), overshared.end());
    throw MeshError("non-manifold mesh: a face is shared by more than two tetrahedra", overshared);
  }
  TriIndices out(static_cast<Index>(boundary.size()), 3);
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    for (int k = 0; k < 3; ++k) out(static_cast<Index>(i), k) = boundary[i][static_cast<std::size_t>(k)];
  }
  return out;
}

void check_closed_manifold(const TriIndices& surface, Index num_vertices) {
  // Every directed edge must appear exactly once and be matched by its reverse.
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(static_cast<std::size_t>(surface.rows()) * 3);
  for (Index f = 0; f < surface.rows(); ++f) {
    for (int k = 0; k < 3; ++k) ++directed[edge_key(surface(f, k), surface(f, (k + 1) % 3))];
  }
  std::vector<Index> bad;
  for (Index f = 0; f < surface.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = surface(f, k);
      const int b = surface(f, (k + 1) % 3);
      const auto rev = directed.find(edge_key(b, a));
      if (directed[edge_key(a, b)] != 1 || rev == directed.end() || rev->second != 1) {
        bad.push_back(f);
        break;
      }
    }
  }
  if (!bad.empty()) throw MeshError("non-manifold surface: boundary edges are not paired", bad);

  // Vertex links must be single cycles (rules out surfaces pinched at a vertex).
  std::vector<std::vector<std::pair<int, int>>> link(static_cast<std::size_t>(num_vertices));
  for (Index f = 0; f < surface.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      link[static_cast<std::size_t>(surface(f, k))].emplace_back(surface(f, (k + 1) % 3),
                                                                  surface(f, (k + 2) % 3));
    }
  }
  std::vector<Index> pinched;
  for (std::size_t v = 0; v < link.size(); ++v) {
    const auto& edges = link[v];
    if (edges.empty()) continue;
    std::map<int, int> next;
    for (const auto& [a, b] : edges) next[a] = b;
    std::size_t steps = 0;
    int cur = edges.front().first;
    do {
      cur = next.at(cur);
      ++steps;
    } while (cur != edges.front().first && steps <= edges.size());
    if (steps != edges.size()) pinched.push_back(static_cast<Index>(v));
  }
  if (!pinched.empty()) throw MeshError("non-manifold surface: pinched vertices", pinched);
}

}  // namespace

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

TetMesh TetMesh::create(Positions vertices, TetIndices tets) {
  const Index n = vertices.rows();
  if (n == 0 || tets.rows() == 0) throw MeshError("mesh has no vertices or no tetrahedra");
  if (!vertices.allFinite()) throw MeshError("mesh has non-finite vertex coordinates");

  std::vector<Index> out_of_range;
  for (Index t = 0; t < tets.rows(); ++t) {
    for (int k = 0; k < 4; ++k) {
      if (tets(t, k) < 0 || tets(t, k) >= n) {
        out_of_range.push_back(t);
        break;
      }
    }
  }
  if (!out_of_range.empty()) {
    throw MeshError("tetrahedron vertex index out of range (vertex count " + std::to_string(n) + ")",
                    out_of_range);
  }

  std::vector<Index> inverted;
  for (Index t = 0; t < tets.rows(); ++t) {
    const double v = signed_tet_volume(vertices.row(tets(t, 0)).transpose(), vertices.row(tets(t, 1)).transpose(),
                                       vertices.row(tets(t, 2)).transpose(), vertices.row(tets(t, 3)).transpose());
    if (!(v > 0.0)) inverted.push_back(t);
  }
  if (!inverted.empty()) throw MeshError("inverted or degenerate tetrahedra", inverted);

  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (Index t = 0; t < tets.rows(); ++t) {
    for (int k = 0; k < 4; ++k) used[static_cast<std::size_t>(tets(t, k))] = true;
  }
  std::vector<Index> unused;
  for (Index v = 0; v < n; ++v) {
    if (!used[static_cast<std::size_t>(v)]) unused.push_back(v);
  }
  if (!unused.empty()) throw MeshError("vertices not referenced by any tetrahedron", unused);

  TetMesh mesh;
  mesh.surface_ = extract_surface(tets);
  check_closed_manifold(mesh.surface_, n);
  mesh.on_surface_.assign(static_cast<std::size_t>(n), false);
  for (Index f = 0; f < mesh.surface_.rows(); ++f) {
    for (int k = 0; k < 3; ++k) mesh.on_surface_[static_cast<std::size_t>(mesh.surface_(f, k))] = true;
  }
  for (Index v = 0; v < n; ++v) {
    if (mesh.on_surface_[static_cast<std::size_t>(v)]) mesh.surface_vertices_.push_back(v);
  }
  mesh.vertices_ = std::move(vertices);
  mesh.tets_ = std::move(tets);
  return mesh;
}

double TetMesh::tet_volume(Index t) const {
  return signed_tet_volume(vertex(tets_(t, 0)), vertex(tets_(t, 1)), vertex(tets_(t, 2)), vertex(tets_(t, 3)));
}

double TetMesh::total_volume() const {
  double total = 0.0;
  for (Index t = 0; t < num_tets(); ++t) total += tet_volume(t);
  return total;
}

SurfaceMeasures surface_measures(const TetMesh& mesh) {
  SurfaceMeasures out{Vec::Zero(mesh.num_vertices()), Positions::Zero(mesh.num_vertices(), 3)};
  const auto& tris = mesh.surface();
  for (Index f = 0; f < tris.rows(); ++f) {
    const Vec3 a = mesh.vertex(tris(f, 0));
    const Vec3 b = mesh.vertex(tris(f, 1));
    const Vec3 c = mesh.vertex(tris(f, 2));
    const Vec3 area_normal = 0.5 * (b - a).cross(c - a);
    const double area = area_normal.norm();
    for (int k = 0; k < 3; ++k) {
      out.areas(tris(f, k)) += area / 3.0;
      out.normals.row(tris(f, k)) += area_normal.transpose();
    }
  }
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const double len = out.normals.row(v).norm();
    if (len > 0.0) out.normals.row(v) /= len;
  }
  return out;
}

}  // namespace fdm
