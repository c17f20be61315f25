#include <array>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "fdm/mesh.hpp"

namespace fdm {

namespace {

namespace fs = std::filesystem;

// Reads the next line that is neither blank nor a '#' comment.
bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

std::ifstream open_or_throw(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file: " + path.string());
  return in;
}

[[noreturn]] void parse_fail(const fs::path& path, const std::string& what) {
  throw InputError("parse error in " + path.string() + ": " + what);
}

TetMesh load_tetgen(const fs::path& path) {
  fs::path stem = path;
  if (stem.extension() == ".node" || stem.extension() == ".ele") stem.replace_extension();
  const fs::path node_path = fs::path(stem.string() + ".node");
  const fs::path ele_path = fs::path(stem.string() + ".ele");

  std::ifstream node_in = open_or_throw(node_path);
  std::string line;
  if (!next_data_line(node_in, line)) parse_fail(node_path, "missing header");
  long count = 0;
  int dim = 0;
  int attrs = 0;
  int markers = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> count >> dim)) parse_fail(node_path, "bad header");
    hs >> attrs >> markers;
  }
  if (dim != 3 || count <= 0) parse_fail(node_path, "expected 3D points");

  Positions vertices(count, 3);
  long base = -1;
  for (long i = 0; i < count; ++i) {
    if (!next_data_line(node_in, line)) parse_fail(node_path, "truncated point list");
    std::istringstream ls(line);
    long id = 0;
    double x = 0, y = 0, z = 0;
    if (!(ls >> id >> x >> y >> z)) parse_fail(node_path, "bad point line: " + line);
    if (base < 0) base = id;
    if (id - base != i) parse_fail(node_path, "point ids must be consecutive");
    vertices.row(i) << x, y, z;
  }

  std::ifstream ele_in = open_or_throw(ele_path);
  if (!next_data_line(ele_in, line)) parse_fail(ele_path, "missing header");
  long tet_count = 0;
  int per_tet = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> tet_count >> per_tet)) parse_fail(ele_path, "bad header");
  }
  if (per_tet != 4) parse_fail(ele_path, "only 4-node tetrahedra are supported");
  TetIndices tets(tet_count, 4);
  for (long t = 0; t < tet_count; ++t) {
    if (!next_data_line(ele_in, line)) parse_fail(ele_path, "truncated element list");
    std::istringstream ls(line);
    long id = 0;
    long v[4];
    if (!(ls >> id >> v[0] >> v[1] >> v[2] >> v[3])) parse_fail(ele_path, "bad element line: " + line);
    for (int k = 0; k < 4; ++k) tets(t, k) = static_cast<int>(v[k] - base);
  }
  return TetMesh::create(std::move(vertices), std::move(tets));
}

TetMesh load_gmsh(const fs::path& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  std::map<long, Index> node_index;
  std::vector<Vec3> points;
  std::vector<std::array<long, 4>> raw_tets;
  bool saw_format = false;

  while (std::getline(in, line)) {
    if (line.rfind("$MeshFormat", 0) == 0) {
      std::getline(in, line);
      std::istringstream fs_(line);
      double version = 0;
      int file_type = -1;
      fs_ >> version >> file_type;
      if (version < 2.0 || version >= 3.0) parse_fail(path, "only MSH ASCII v2 is supported");
      if (file_type != 0) parse_fail(path, "binary MSH is not supported");
      saw_format = true;
    } else if (line.rfind("$Nodes", 0) == 0) {
      std::getline(in, line);
      const long count = std::stol(line);
      for (long i = 0; i < count; ++i) {
        if (!std::getline(in, line)) parse_fail(path, "truncated $Nodes");
        std::istringstream ls(line);
        long id = 0;
        double x = 0, y = 0, z = 0;
        if (!(ls >> id >> x >> y >> z)) parse_fail(path, "bad node line: " + line);
        node_index[id] = static_cast<Index>(points.size());
        points.emplace_back(x, y, z);
      }
    } else if (line.rfind("$Elements", 0) == 0) {
      std::getline(in, line);
      const long count = std::stol(line);
      for (long i = 0; i < count; ++i) {
        if (!std::getline(in, line)) parse_fail(path, "truncated $Elements");
        std::istringstream ls(line);
        long id = 0;
        int type = 0;
        int ntags = 0;
        if (!(ls >> id >> type >> ntags)) parse_fail(path, "bad element line: " + line);
        for (int k = 0; k < ntags; ++k) {
          long tag = 0;
          ls >> tag;
        }
        // Points, lines, triangles and quads carry boundary tags; skip them.
        if (type == 15 || type == 1 || type == 2 || type == 3 || type == 8 || type == 9) continue;
        if (type != 4) parse_fail(path, "unsupported element type " + std::to_string(type) + " (tet elements only)");
        std::array<long, 4> v{};
        if (!(ls >> v[0] >> v[1] >> v[2] >> v[3])) parse_fail(path, "bad tet line: " + line);
        raw_tets.push_back(v);
      }
    }
  }
  if (!saw_format) parse_fail(path, "missing $MeshFormat");

  Positions vertices(static_cast<Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) vertices.row(static_cast<Index>(i)) = points[i].transpose();
  TetIndices tets(static_cast<Index>(raw_tets.size()), 4);
  for (std::size_t t = 0; t < raw_tets.size(); ++t) {
    for (int k = 0; k < 4; ++k) {
      const auto it = node_index.find(raw_tets[t][static_cast<std::size_t>(k)]);
      tets(static_cast<Index>(t), k) = it == node_index.end() ? -1 : static_cast<int>(it->second);
    }
  }
  return TetMesh::create(std::move(vertices), std::move(tets));
}

}  // namespace

MeshFormat parse_mesh_format(std::string_view name) {
  if (name == "tetgen" || name == "node" || name == "ele") return MeshFormat::tetgen;
  if (name == "gmsh" || name == "msh") return MeshFormat::gmsh;
  throw InputError("unknown mesh format: " + std::string(name));
}

TetMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  switch (format) {
    case MeshFormat::tetgen:
      return load_tetgen(path);
    case MeshFormat::gmsh:
      return load_gmsh(path);
  }
  throw InputError("unknown mesh format");
}

void write_tetgen(const TetMesh& mesh, const std::filesystem::path& stem) {
  std::ofstream node(stem.string() + ".node");
  std::ofstream ele(stem.string() + ".ele");
  if (!node || !ele) throw InputError("cannot write mesh at " + stem.string());
  node << std::setprecision(17);
  node << mesh.num_vertices() << " 3 0 0\n";
  for (Index i = 0; i < mesh.num_vertices(); ++i) {
    node << i << ' ' << mesh.vertices()(i, 0) << ' ' << mesh.vertices()(i, 1) << ' ' << mesh.vertices()(i, 2) << '\n';
  }
  ele << mesh.num_tets() << " 4 0\n";
  for (Index t = 0; t < mesh.num_tets(); ++t) {
    ele << t;
    for (int k = 0; k < 4; ++k) ele << ' ' << mesh.tets()(t, k);
    ele << '\n';
  }
}

}  // namespace fdm
