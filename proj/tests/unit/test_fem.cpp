#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>

#include "fdm/mesh.hpp"
#include "helpers.hpp"

using namespace fdm;
namespace fs = std::filesystem;

namespace {

TetMesh regular_tet() {
  Positions v(4, 3);
  v << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
  TetIndices t(1, 4);
  t << 0, 1, 2, 3;
  if (signed_tet_volume(v.row(0).transpose(), v.row(1).transpose(), v.row(2).transpose(), v.row(3).transpose()) < 0)
    t << 0, 2, 1, 3;
  return TetMesh::create(v, t);
}

// Independent element stiffness: Voigt strain-displacement matrix B and
// isotropic constitutive matrix D, K_e = vol B^T D B.
Mat voigt_stiffness(const TetMesh& mesh, const MaterialParams& mat) {
  const double e = mat.youngs_modulus, nu = mat.poisson_ratio;
  const double lambda = e * nu / ((1 + nu) * (1 - 2 * nu)), mu = e / (2 * (1 + nu));
  Eigen::Matrix<double, 6, 6> d = Eigen::Matrix<double, 6, 6>::Zero();
  d.topLeftCorner<3, 3>().setConstant(lambda);
  d.topLeftCorner<3, 3>().diagonal().array() += 2 * mu;
  d.bottomRightCorner<3, 3>().diagonal().setConstant(mu);
  Mat k = Mat::Zero(mesh.dofs(), mesh.dofs());
  for (Index t = 0; t < mesh.num_tets(); ++t) {
    Eigen::Matrix4d p;
    for (int a = 0; a < 4; ++a) p.row(a) << 1.0, mesh.vertex(mesh.tets()(t, a)).transpose();
    const Eigen::Matrix4d c = p.inverse();  // column a: coefficients of shape function a
    const double vol = std::abs(p.determinant()) / 6.0;
    Eigen::Matrix<double, 6, 12> b = Eigen::Matrix<double, 6, 12>::Zero();
    for (int a = 0; a < 4; ++a) {
      const double gx = c(1, a), gy = c(2, a), gz = c(3, a);
      b(0, 3 * a) = gx;
      b(1, 3 * a + 1) = gy;
      b(2, 3 * a + 2) = gz;
      b(3, 3 * a) = gy;
      b(3, 3 * a + 1) = gx;
      b(4, 3 * a + 1) = gz;
      b(4, 3 * a + 2) = gy;
      b(5, 3 * a) = gz;
      b(5, 3 * a + 2) = gx;
    }
    const Eigen::Matrix<double, 12, 12> ke = vol * b.transpose() * d * b;
    for (int a = 0; a < 4; ++a)
      for (int bb = 0; bb < 4; ++bb)
        k.block<3, 3>(3 * mesh.tets()(t, a), 3 * mesh.tets()(t, bb)) += ke.block<3, 3>(3 * a, 3 * bb);
  }
  return k;
}

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("fdm_test_fem_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("single tet has four outward surface triangles") {
  const TetMesh mesh = regular_tet();
  REQUIRE(mesh.surface().rows() == 4);
  const Vec3 centroid = mesh.vertices().colwise().mean().transpose();
  for (Index f = 0; f < 4; ++f) {
    const Vec3 a = mesh.vertex(mesh.surface()(f, 0)), b = mesh.vertex(mesh.surface()(f, 1)),
               c = mesh.vertex(mesh.surface()(f, 2));
    CHECK((b - a).cross(c - a).dot((a + b + c) / 3.0 - centroid) > 0.0);
  }
  CHECK(mesh.surface_vertices().size() == 4);
}

TEST_CASE("2x2x2 cube grid gives 40 tets and a closed surface") {
  const TetMesh mesh = box_mesh(2, 2, 2, Vec3::Zero(), Vec3::Ones());
  CHECK(mesh.num_tets() == 40);
  CHECK(mesh.num_vertices() == 27);
  std::map<std::pair<int, int>, int> directed;
  for (Index f = 0; f < mesh.surface().rows(); ++f)
    for (int e = 0; e < 3; ++e) ++directed[{mesh.surface()(f, e), mesh.surface()(f, (e + 1) % 3)}];
  for (const auto& [edge, count] : directed) {
    CHECK(count == 1);
    CHECK(directed.count({edge.second, edge.first}) == 1);  // closed and consistently oriented
  }
  CHECK(mesh.surface().rows() == 6 * 8);
  CHECK(mesh.total_volume() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tet referencing a missing vertex is rejected") {
  const fs::path dir = temp_dir("range");
  {
    std::ofstream node(dir / "m.node");
    node << "10 3 0 0\n";
    for (int i = 0; i < 10; ++i) node << i << " " << (i & 1) << " " << ((i >> 1) & 1) << " " << ((i >> 2) & 1) << "\n";
    std::ofstream ele(dir / "m.ele");
    ele << "1 4 0\n0 0 1 2 99\n";
  }
  CHECK_THROWS_AS(load_mesh(dir / "m.node", MeshFormat::tetgen), MeshError);
  Positions v = Positions::Zero(10, 3);
  TetIndices t(1, 4);
  t << 0, 1, 2, 99;
  CHECK_THROWS_AS(TetMesh::create(v, t), MeshError);
}

TEST_CASE("inverted elements are reported with their indices") {
  const TetMesh good = box_mesh(1, 1, 1, Vec3::Zero(), Vec3::Ones());
  TetIndices t = good.tets();
  std::swap(t(2, 1), t(2, 2));
  try {
    TetMesh::create(good.vertices(), t);
    FAIL("expected a MeshError");
  } catch (const MeshError& e) {
    REQUIRE(e.offending().size() == 1);
    CHECK(e.offending()[0] == 2);
  }
}

TEST_CASE("tetgen and gmsh readers agree with the generator") {
  const fs::path dir = temp_dir("io");
  const TetMesh mesh = box_mesh(2, 1, 3, Vec3(-1, 0, 0), Vec3(1, 0.5, 2));
  write_tetgen(mesh, dir / "box");
  for (const fs::path p : {dir / "box", dir / "box.node", dir / "box.ele"}) {
    const TetMesh back = load_mesh(p, MeshFormat::tetgen);
    CHECK(back.vertices() == mesh.vertices());
    CHECK(back.tets() == mesh.tets());
  }
  {
    std::ofstream msh(dir / "box.msh");
    msh << std::setprecision(17) << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n" << mesh.num_vertices() << "\n";
    for (Index v = 0; v < mesh.num_vertices(); ++v)
      msh << v + 1 << " " << mesh.vertex(v).x() << " " << mesh.vertex(v).y() << " " << mesh.vertex(v).z() << "\n";
    msh << "$EndNodes\n$Elements\n" << mesh.num_tets() + 1 << "\n";
    msh << "1 2 2 0 1 1 2 3\n";  // a boundary triangle, skipped
    for (Index t = 0; t < mesh.num_tets(); ++t)
      msh << t + 2 << " 4 2 0 1 " << mesh.tets()(t, 0) + 1 << " " << mesh.tets()(t, 1) + 1 << " " << mesh.tets()(t, 2) + 1
          << " " << mesh.tets()(t, 3) + 1 << "\n";
    msh << "$EndElements\n";
  }
  const TetMesh back = load_mesh(dir / "box.msh", MeshFormat::gmsh);
  CHECK(back.vertices() == mesh.vertices());
  CHECK(back.tets() == mesh.tets());
  {
    std::ofstream bad(dir / "bad.msh");
    bad << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n1\n1 0 0 nope\n";
  }
  CHECK_THROWS_AS(load_mesh(dir / "bad.msh", MeshFormat::gmsh), InputError);
  CHECK_THROWS_AS(load_mesh(dir / "missing.msh", MeshFormat::gmsh), InputError);
}

TEST_CASE("lumped mass examples") {
  MaterialParams unit;
  unit.density = 1.0;
  const TetMesh tet = regular_tet();
  const Vec m = assemble_mass(tet, unit);
  for (Index i = 0; i < m.size(); ++i) CHECK(m(i) == doctest::Approx(tet.total_volume() / 4).epsilon(1e-14));

  Positions v(5, 3);
  v << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1;
  TetIndices t(2, 4);
  t << 0, 1, 2, 3, 1, 2, 3, 4;
  if (signed_tet_volume(v.row(1).transpose(), v.row(2).transpose(), v.row(3).transpose(), v.row(4).transpose()) < 0)
    t.row(1) << 1, 3, 2, 4;
  const TetMesh pair = TetMesh::create(v, t);
  const Vec mp = assemble_mass(pair, unit);
  const double v1 = pair.tet_volume(0), v2 = pair.tet_volume(1);
  CHECK(mp(0) == doctest::Approx(v1 / 4));
  for (Index s : {1, 2, 3}) CHECK(mp(3 * s) == doctest::Approx((v1 + v2) / 4).epsilon(1e-14));
  CHECK(mp(12) == doctest::Approx(v2 / 4));

  MaterialParams water;
  const TetMesh cube = box_mesh(3, 2, 2, Vec3::Zero(), Vec3(0.3, 0.2, 0.25));
  const Vec mc = assemble_mass(cube, water);
  CHECK(mc.sum() / 3 == doctest::Approx(1000 * 0.3 * 0.2 * 0.25).epsilon(1e-12));
}

TEST_CASE("heterogeneous density conserves total mass") {
  const TetMesh mesh = box_mesh(2, 2, 4, Vec3::Zero(), Vec3(1, 1, 2));
  MaterialParams mat;
  double expected = 0.0;
  for (Index t = 0; t < mesh.num_tets(); ++t) {
    mat.density_per_element.push_back(500.0 + 10.0 * static_cast<double>(t));
    expected += mat.density_per_element.back() * mesh.tet_volume(t);
  }
  CHECK(assemble_mass(mesh, mat).sum() / 3 == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("stiffness matches the Voigt-form oracle, is symmetric and kills rigid motion") {
  const TetMesh mesh = box_mesh(2, 2, 2, Vec3::Zero(), Vec3(0.5, 0.4, 0.6));
  MaterialParams mat;
  mat.poisson_ratio = 0.35;
  const Mat k = test::dense(assemble_stiffness(mesh, mat));
  const Mat oracle = voigt_stiffness(mesh, mat);
  const double scale = k.cwiseAbs().maxCoeff();
  CHECK((k - oracle).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  const Mat r = test::rigid_fields(mesh);
  CHECK((k * r).cwiseAbs().maxCoeff() <= 1e-9 * scale);
}

TEST_CASE("free single tet has exactly six rigid null modes; the shift makes it definite") {
  const TetMesh tet = regular_tet();
  MaterialParams mat;
  const Mat h0 = test::dense(assemble_hessian(tet, mat, {}, 0.0));
  Eigen::SelfAdjointEigenSolver<Mat> eig(h0);
  const double top = eig.eigenvalues().maxCoeff();
  int zero = 0;
  for (Index i = 0; i < 12; ++i) zero += std::abs(eig.eigenvalues()(i)) <= 1e-10 * top;
  CHECK(zero == 6);
  const Mat h1 = test::dense(assemble_hessian(tet, mat, {}, 1e-3));
  CHECK(Eigen::LLT<Mat>(h1).info() == Eigen::Success);
  const SystemOperators ops = SystemOperators::build(tet, mat, {});
  CHECK(ops.regularization() == doctest::Approx(default_regularization(assemble_stiffness(tet, mat), ops.mass())));
}

TEST_CASE("cantilever tip deflection matches a dense solve") {
  auto bar = test::pinned_bar(2, 2, 8, Vec3(0.1, 0.1, 0.8));
  const TetMesh& mesh = bar.mesh;
  const Index tip = test::nearest_vertex(mesh, Vec3(0.1, 0.1, 0.8));
  Vec f = Vec::Zero(mesh.dofs());
  f(3 * tip + 1) = -1.0;
  const Vec u = bar.ops.solve(f);

  // Dense oracle: delete pinned rows and columns.
  const Mat k = voigt_stiffness(mesh, bar.mat);
  std::vector<Index> free;
  for (Index i = 0; i < mesh.dofs(); ++i)
    if (bar.ops.free_mask()(i) > 0) free.push_back(i);
  const Index nf = static_cast<Index>(free.size());
  Mat kf(nf, nf);
  Vec ff(nf);
  for (Index i = 0; i < nf; ++i) {
    ff(i) = f(free[i]);
    for (Index j = 0; j < nf; ++j) kf(i, j) = k(free[i], free[j]);
  }
  const Vec uf = kf.ldlt().solve(ff);
  Index tip_row = 0;
  while (free[tip_row] != 3 * tip + 1) ++tip_row;
  CHECK(std::abs(u(3 * tip + 1) - uf(tip_row)) <= 1e-10 * std::abs(uf(tip_row)));
  for (Index p : bar.pins) CHECK(u.segment<3>(3 * p).isZero(0.0));
}

TEST_CASE("element jacobians reproduce affine deformation gradients") {
  const TetMesh mesh = box_mesh(2, 1, 2, Vec3::Zero(), Vec3(1, 0.5, 1));
  const auto jac = element_jacobians(mesh);
  REQUIRE(static_cast<Index>(jac.size()) == mesh.num_tets());
  Vec trans(mesh.dofs());
  Vec affine(mesh.dofs());
  Mat3 a = Mat3::Identity();
  a(0, 0) = 2.0;
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    trans.segment<3>(3 * v) = Vec3(0.3, -1.2, 4.0);
    affine.segment<3>(3 * v) = (a - Mat3::Identity()) * mesh.vertex(v);
  }
  for (Index t = 0; t < mesh.num_tets(); ++t) {
    CHECK((deformation_gradient(mesh, jac[t], t, trans) - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((deformation_gradient(mesh, jac[t], t, affine) - a).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK((deformation_gradient(mesh, jac[0], 0, Vec::Zero(mesh.dofs())) - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("deformation gradient matches edge-matrix differences for a random displacement") {
  const TetMesh mesh = box_mesh(2, 2, 1, Vec3::Zero(), Vec3(1, 1, 0.5));
  const auto jac = element_jacobians(mesh);
  const Vec u = 1e-3 * test::random_vector(mesh.dofs(), 7);
  for (Index t = 0; t < mesh.num_tets(); ++t) {
    Mat3 rest, deformed;
    for (int k = 1; k < 4; ++k) {
      const Index a = mesh.tets()(t, 0), b = mesh.tets()(t, k);
      rest.col(k - 1) = mesh.vertex(b) - mesh.vertex(a);
      deformed.col(k - 1) = rest.col(k - 1) + u.segment<3>(3 * b) - u.segment<3>(3 * a);
    }
    const Mat3 expected = deformed * rest.inverse();
    CHECK((deformation_gradient(mesh, jac[t], t, u) - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("material validation") {
  const TetMesh tet = regular_tet();
  MaterialParams bad;
  bad.poisson_ratio = 0.5;
  CHECK_THROWS_AS(assemble_mass(tet, bad), InputError);
  bad.poisson_ratio = 0.3;
  bad.youngs_modulus = -1;
  CHECK_THROWS_AS(assemble_stiffness(tet, bad), InputError);
  bad.youngs_modulus = 1;
  bad.density_per_element = {1.0, 2.0};
  CHECK_THROWS_AS(assemble_mass(tet, bad), InputError);
}

TEST_CASE("surface measures: unit normals, flat-face normals and total area") {
  const TetMesh mesh = box_mesh(3, 2, 2, Vec3::Zero(), Vec3(0.6, 0.4, 0.5));
  const SurfaceMeasures s = surface_measures(mesh);
  double area = 0.0;
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    area += s.areas(v);
    if (mesh.is_surface_vertex(v)) {
      CHECK(s.normals.row(v).norm() == doctest::Approx(1.0).epsilon(1e-12));
    } else {
      CHECK(s.areas(v) == 0.0);
    }
  }
  CHECK(area == doctest::Approx(2 * (0.6 * 0.4 + 0.6 * 0.5 + 0.4 * 0.5)).epsilon(1e-12));
  const Index top = test::nearest_vertex(mesh, Vec3(0.2, 0.2, 0.5));
  CHECK((s.normals.row(top).transpose() - Vec3(0, 0, 1)).norm() <= 1e-12);
  const Index side = test::nearest_vertex(mesh, Vec3(0.0, 0.2, 0.25));
  CHECK((s.normals.row(side).transpose() - Vec3(-1, 0, 0)).norm() <= 1e-12);
}
