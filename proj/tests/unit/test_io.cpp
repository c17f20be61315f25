#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "fdm/config.hpp"
#include "fdm/container.hpp"
#include "helpers.hpp"

using namespace fdm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = FDM_TEST_DATA;

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("fdm_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool same_bits(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

json base_config() {
  return json::parse(R"({
    "schema_version": 1,
    "mesh": {"generator": "box", "cells": [1, 1, 2], "lo": [0, 0, 0], "hi": [0.1, 0.1, 0.2]},
    "pins": {"boxes": [{"lo": [-1, -1, -0.001], "hi": [1, 1, 0.001]}]},
    "prior": {"type": "lma"}
  })");
}

}  // namespace

TEST_CASE("container round trip is bit-exact, special values included") {
  Container c;
  c.metadata["kind"] = "test";
  c.metadata["note"] = "spaces and = signs";
  Mat a = test::random_matrix(7, 3, 1);
  a(0, 0) = -0.0;
  a(1, 0) = std::numeric_limits<double>::denorm_min();
  a(2, 0) = std::numeric_limits<double>::infinity();
  a(3, 0) = std::numeric_limits<double>::quiet_NaN();
  a(4, 0) = std::numeric_limits<double>::max();
  c.arrays.emplace_back("a", a);
  c.arrays.emplace_back("empty", Mat(0, 4));
  c.arrays.emplace_back("row", Mat::Constant(1, 5, 1.0 / 3.0));
  const std::string bytes = encode_container(c);
  CHECK(bytes.compare(0, 8, "FDMCNTR1") == 0);
  const Container back = decode_container(bytes);
  CHECK(back.metadata.at("kind") == "test");
  CHECK(back.meta("note") == "spaces and = signs");
  REQUIRE(back.arrays.size() == 3);
  CHECK(same_bits(back.array("a"), a));
  CHECK(back.array("empty").rows() == 0);
  CHECK(back.array("empty").cols() == 4);
  CHECK(same_bits(back.array("row"), c.arrays[2].second));
  CHECK(encode_container(back) == bytes);
  CHECK_THROWS_AS(back.array("missing"), InputError);
  CHECK_THROWS_AS(back.meta("missing"), InputError);
}

TEST_CASE("container rejects corrupt input") {
  Container c;
  c.arrays.emplace_back("a", Mat::Ones(3, 3));
  const std::string bytes = encode_container(c);
  CHECK_THROWS_AS(decode_container("nope"), InputError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_container(bad_magic), InputError);
  CHECK_THROWS_AS(decode_container(bytes.substr(0, bytes.size() - 8)), InputError);
  CHECK_THROWS_AS(decode_container(bytes + "extra"), InputError);
  CHECK_THROWS_AS(read_container(temp_dir("missing") / "none.fdm"), InputError);
}

TEST_CASE("subspace save and load round trip") {
  auto bar = test::small_bar();
  const Index tip = test::nearest_vertex(bar.mesh, Vec3(0.1, 0.1, 1.0));
  Vec f = Vec::Zero(bar.mesh.dofs());
  f(3 * tip) = 1.0;
  const Subspace s = build_diagonal(bar.ops, ForcePrior(f, DiagonalCovariance{bar.ops.mass()}, "tip+lma"), 4);
  const fs::path p = temp_dir("subspace") / "s.fdm";
  save_subspace(p, s);
  const Subspace back = load_subspace(p);
  CHECK(same_bits(back.basis, s.basis));
  CHECK(same_bits(back.eigenvalues, s.eigenvalues));
  CHECK(same_bits(back.mean, s.mean));
  CHECK(back.prior_label == "tip+lma");
  CHECK(back.path == BuildPath::diagonal);
  save_subspace(p.parent_path() / "t.fdm", back);
  std::ifstream a(p, std::ios::binary), b(p.parent_path() / "t.fdm", std::ios::binary);
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
  for (BuildPath path : {BuildPath::diagonal, BuildPath::lowrank, BuildPath::greens, BuildPath::lma_reference,
                         BuildPath::skinning, BuildPath::dense_oracle, BuildPath::pca})
    CHECK(parse_build_path(to_string(path)) == path);
}

TEST_CASE("config: fixtures parse and build scenes") {
  const SceneConfig bar = load_config(kData / "bar.json");
  CHECK(bar.subspace.modes == 10);
  CHECK(bar.simulation.steps == 30);
  CHECK(bar.simulation.gravity.y() == -9.81);
  CHECK(bar.simulation.record_positions);
  const Scene scene = load_scene(bar);
  CHECK(scene.mesh.num_vertices() == 99);
  CHECK(scene.pins.size() == 9);
  CHECK(test::nearest_vertex(scene.mesh, Vec3(0.1, 0.1, 1.0)) == 98);

  const SceneConfig handles = load_config(kData / "handles.json");
  REQUIRE(handles.simulation.schedule);
  CHECK(handles.simulation.schedule->steps == 40);
  CHECK(handles.simulation.schedule->events.size() == 5);
  CHECK(handles.prior->type == PriorType::handle);

  const SceneConfig mix = load_config(kData / "mixture.json");
  REQUIRE(mix.mixture);
  CHECK(component_specs(mix).size() == 3);
  CHECK(component_weights(mix) == std::vector<double>{0.5, 0.25, 0.25});
  CHECK(component_modes(mix, 0) == 6);
  CHECK(component_modes(mix, 1) == 3);
  const Scene ms = load_scene(mix);
  for (const auto& spec : component_specs(mix)) CHECK(make_prior(spec, ms).dofs() == ms.mesh.dofs());

  const SceneConfig file = load_config(kData / "mesh_file.json");
  const Scene fs_scene = load_scene(file);
  CHECK(fs_scene.mesh.num_tets() == 5);
  CHECK(fs_scene.mesh.total_volume() == doctest::Approx(1.0));
  const TetMesh msh = load_mesh(kData / "cube.msh", MeshFormat::gmsh);
  CHECK(msh.tets() == fs_scene.mesh.tets());
  CHECK(msh.vertices() == fs_scene.mesh.vertices());
}

TEST_CASE("config: unknown keys, wrong versions and bad values are rejected") {
  CHECK_THROWS_AS(load_config(kData / "unknown_key.json"), InputError);
  const auto rejects = [](const std::function<void(json&)>& edit) {
    json j = base_config();
    edit(j);
    CHECK_THROWS_AS(parse_config(j, kData), InputError);
  };
  CHECK_NOTHROW(parse_config(base_config(), kData));
  rejects([](json& j) { j["extra"] = 1; });
  rejects([](json& j) { j["mesh"]["colour"] = "red"; });
  rejects([](json& j) { j["schema_version"] = 2; });
  rejects([](json& j) { j.erase("schema_version"); });
  rejects([](json& j) { j["prior"]["type"] = "wind"; });
  rejects([](json& j) { j["material"] = {{"poisson_ratio", 0.5}}; });
  rejects([](json& j) { j["material"] = {{"youngs_modulus", -1}}; });
  rejects([](json& j) { j["subspace"] = {{"modes", 0}}; });
  rejects([](json& j) { j["subspace"] = {{"path", "magic"}}; });
  rejects([](json& j) { j["simulation"] = {{"timestep", 0}}; });
  rejects([](json& j) { j["simulation"] = {{"damping", {{"mass", 1}, {"viscous", 2}}}}; });
  rejects([](json& j) { j["mesh"] = {{"path", "missing.node"}}; });
  rejects([](json& j) { j["mixture"] = {{"components", json::array({{{"prior", {{"type", "lma"}}}}})}}; });
  rejects([](json& j) { j["service"] = {{"bind", "localhost"}}; });
  rejects([](json& j) { j["prior"] = {{"type", "painted"}}; });
  rejects([](json& j) { j["prior"] = {{"type", "handle"}, {"vertices", {{"ids", {1}}, {"nearest", {0, 0, 0}}}}}; });
  rejects([](json& j) { j["simulation"] = {{"schedule", {{"steps", 5}, {"events", {{{"step", 1}, {"type", "move"}, {"vertex", 3}, {"target", {0, 0, 0}}}}}}}}; });
  rejects([](json& j) { j["simulation"] = {{"schedule", {{"steps", 5}, {"events", {{{"step", 1}, {"type", "teleport"}}}}}}}; });
}

TEST_CASE("config: vertex selectors") {
  const TetMesh mesh = box_mesh(2, 2, 2, Vec3::Zero(), Vec3::Ones());
  VertexSelector near;
  near.nearest = Vec3(0.9, 0.9, 0.9);
  CHECK(near.resolve(mesh) == std::vector<Index>{test::nearest_vertex(mesh, Vec3::Ones())});
  VertexSelector box;
  box.box = std::make_pair(Vec3(-0.1, -0.1, -0.1), Vec3(1.1, 1.1, 0.1));
  CHECK(box.resolve(mesh).size() == 9);
  box.box = std::make_pair(Vec3(0.4, 0.4, 0.4), Vec3(0.6, 0.6, 0.6));
  box.surface_only = true;
  CHECK_THROWS_AS(box.resolve(mesh), InputError);  // only the interior centre matches
  VertexSelector ids;
  ids.ids = {1000};
  CHECK_THROWS_AS(ids.resolve(mesh), InputError);
}

TEST_CASE("scalar columns: plain, CSV with header, and errors") {
  const fs::path dir = temp_dir("columns");
  {
    std::ofstream(dir / "plain.txt") << "# weights\n0.5\n1\n0\n";
    std::ofstream(dir / "table.csv") << "vertex,weight\n0,0.25\n1,0.5\n2,1.0\n";
    std::ofstream(dir / "bad.csv") << "vertex,weight\n0,0.25\n1,x\n2,1.0\n";
  }
  CHECK(read_scalar_column(dir / "plain.txt", 3) == Vec3(0.5, 1, 0));
  CHECK(read_scalar_column(dir / "table.csv", 3) == Vec3(0.25, 0.5, 1.0));
  CHECK_THROWS_AS(read_scalar_column(dir / "table.csv", 4), InputError);
  CHECK_THROWS_AS(read_scalar_column(dir / "bad.csv", 3), InputError);
  CHECK_THROWS_AS(read_scalar_column(dir / "none.csv", 3), InputError);
}
