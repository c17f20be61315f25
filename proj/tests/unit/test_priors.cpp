#include <Eigen/Eigenvalues>

#include "fdm/priors.hpp"
#include "helpers.hpp"

using namespace fdm;

namespace {

TetMesh reference_tet() {
  Positions v(4, 3);
  v << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  TetIndices t(1, 4);
  t << 0, 1, 2, 3;
  return TetMesh::create(v, t);
}

Mat translations(Index n) {
  Mat t = Mat::Zero(3 * n, 3);
  for (Index v = 0; v < n; ++v)
    for (int d = 0; d < 3; ++d) t(3 * v + d, d) = 1.0;
  return t;
}

}  // namespace

TEST_CASE("LMA prior variances are the lumped masses") {
  const TetMesh tet = reference_tet();
  MaterialParams mat;
  mat.density = 1.0;
  const auto ops = SystemOperators::build(tet, mat, {});
  const ForcePrior p = lma_prior(ops);
  REQUIRE(p.is_diagonal());
  CHECK(p.mean().isZero(0.0));
  for (Index i = 0; i < 12; ++i) CHECK(p.diagonal().variances(i) == doctest::Approx(1.0 / 24).epsilon(1e-15));

  mat.density = 4.0;
  const ForcePrior p4 = lma_prior(SystemOperators::build(tet, mat, {}));
  CHECK((p4.diagonal().variances - 4.0 * p.diagonal().variances).cwiseAbs().maxCoeff() <= 1e-16);
}

TEST_CASE("LMA prior follows heterogeneous density") {
  auto bar = test::small_bar();
  MaterialParams mat;
  for (Index t = 0; t < bar.mesh.num_tets(); ++t) mat.density_per_element.push_back(t % 2 ? 300.0 : 2700.0);
  const auto ops = SystemOperators::build(bar.mesh, mat, bar.pins);
  CHECK(lma_prior(ops).diagonal().variances == assemble_mass(bar.mesh, mat));
}

TEST_CASE("painted prior with unit weights is exactly LMA; zero weights confine support") {
  auto bar = test::small_bar();
  const ForcePrior lma = lma_prior(bar.ops);
  const ForcePrior ones = painted_prior(bar.mesh, bar.ops, Vec::Ones(bar.mesh.num_vertices()));
  CHECK(ones.diagonal().variances == lma.diagonal().variances);
  CHECK(ones.mean() == lma.mean());

  Vec w = Vec::Zero(bar.mesh.num_vertices());
  for (Index v = 0; v < bar.mesh.num_vertices(); ++v)
    if (bar.mesh.vertex(v).z() >= 0.5) w(v) = 0.7;
  const ForcePrior half = painted_prior(bar.mesh, bar.ops, w);
  for (Index v = 0; v < bar.mesh.num_vertices(); ++v)
    for (int d = 0; d < 3; ++d) {
      const double var = half.diagonal().variances(3 * v + d);
      if (w(v) == 0.0) CHECK(var == 0.0);
      else CHECK(var == doctest::Approx(0.7 * bar.ops.mass()(3 * v + d)));
    }
  w(0) = -1.0;
  CHECK_THROWS_AS(painted_prior(bar.mesh, bar.ops, w), InputError);
}

TEST_CASE("radial decay weights") {
  const TetMesh mesh = box_mesh(4, 1, 1, Vec3::Zero(), Vec3(2, 0.5, 0.5));
  const Vec w = radial_decay_weights(mesh, Vec3::Zero(), 0.5, 10.0);
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const double d = mesh.vertex(v).norm();
    const double expected = d <= 0.5 ? 1.0 : std::exp(-10.0 * (d - 0.5) * (d - 0.5));
    CHECK(w(v) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(w(v) <= 1.0);
    CHECK(w(v) > 0.0);
  }
  CHECK_THROWS_AS(radial_decay_weights(mesh, Vec3::Zero(), -1.0), InputError);
}

TEST_CASE("handle prior: one handle gives (alpha m)^2 on its coordinates") {
  auto bar = test::small_bar();
  const Index h = test::nearest_vertex(bar.mesh, Vec3(0.1, 0.1, 1.0));
  HandleSet hs{{h}, 3.0};
  const ForcePrior p = handle_prior(bar.ops, hs);
  CHECK(p.mean().isZero(0.0));
  const Mat sigma = p.dense_covariance();
  const double m = bar.ops.mass()(3 * h);
  for (Index i = 0; i < sigma.rows(); ++i)
    for (Index j = 0; j < sigma.cols(); ++j) {
      const bool diag_on_handle = i == j && i / 3 == h;
      if (diag_on_handle) CHECK(sigma(i, j) == doctest::Approx(9.0 * m * m).epsilon(1e-14));
      else CHECK(sigma(i, j) == 0.0);
    }
}

TEST_CASE("handle prior: two handles match the dense outer product") {
  auto bar = test::small_bar();
  const Index a = test::nearest_vertex(bar.mesh, Vec3(0, 0, 1.0));
  const Index b = test::nearest_vertex(bar.mesh, Vec3(0.1, 0.05, 0.5));
  HandleSet hs{{a, b}, 2.5};
  Mat d = Mat::Zero(bar.mesh.dofs(), 6);
  for (int k = 0; k < 2; ++k) {
    const Index v = hs.vertices[static_cast<std::size_t>(k)];
    for (int c = 0; c < 3; ++c) d(3 * v + c, 3 * k + c) = 2.5 * bar.ops.mass()(3 * v + c);
  }
  const Mat oracle = d * d.transpose();
  const Mat got = handle_prior(bar.ops, hs).dense_covariance();
  CHECK((got - oracle).cwiseAbs().maxCoeff() <= 1e-12 * oracle.cwiseAbs().maxCoeff());
  CHECK(got.block(3 * a, 3 * b, 3, 3).isZero(0.0));

  Actuation act;
  act.mean = Vec::Ones(6);
  const ForcePrior shifted = handle_prior(bar.ops, hs, act);
  CHECK((shifted.mean() - d * Vec::Ones(6)).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK_THROWS_AS(handle_prior(bar.ops, HandleSet{{a, a}, 1.0}), InputError);
  CHECK_THROWS_AS(handle_prior(bar.ops, HandleSet{{a}, 0.0}), InputError);
  CHECK_THROWS_AS(handle_prior(bar.ops, HandleSet{{bar.mesh.num_vertices()}, 1.0}), InputError);
}

TEST_CASE("low-rank prior absorbs the actuation covariance factor") {
  const Mat d = test::random_matrix(12, 3, 5);
  Mat s(3, 3);
  s << 4, 1, 0, 1, 2, 0.5, 0, 0.5, 1;
  Actuation act;
  act.covariance = s;
  act.mean = Vec3(1, -2, 0.5);
  const ForcePrior p = lowrank_prior(d, act, "test");
  const Mat expected = d * s * d.transpose();
  CHECK((p.dense_covariance() - expected).cwiseAbs().maxCoeff() <= 1e-12 * expected.cwiseAbs().maxCoeff());
  CHECK((p.mean() - d * *act.mean).cwiseAbs().maxCoeff() <= 1e-13);

  // Singular PSD actuation covariance is allowed.
  Mat singular = Mat::Zero(3, 3);
  singular(0, 0) = 1.0;
  act.covariance = singular;
  const ForcePrior q = lowrank_prior(d, act, "test");
  const Mat e2 = d.col(0) * d.col(0).transpose();
  CHECK((q.dense_covariance() - e2).cwiseAbs().maxCoeff() <= 1e-12 * e2.cwiseAbs().maxCoeff());

  Mat indefinite = Mat::Identity(3, 3);
  indefinite(2, 2) = -1.0;
  act.covariance = indefinite;
  CHECK_THROWS_AS(lowrank_prior(d, act, "test"), InputError);
  Mat asym = Mat::Identity(3, 3);
  asym(0, 1) = 0.5;
  act.covariance = asym;
  CHECK_THROWS_AS(lowrank_prior(d, act, "test"), InputError);
  act.covariance = Mat::Identity(2, 2);
  CHECK_THROWS_AS(lowrank_prior(d, act, "test"), InputError);
}

TEST_CASE("low-rank samples converge to the covariance") {
  const Mat l = test::random_matrix(15, 5, 11);
  const Vec mu = test::random_vector(15, 12);
  const ForcePrior p(mu, LowRankCovariance{l, Vec::Zero(5), Mat::Identity(5, 5)}, "test");
  std::mt19937_64 rng(99);
  const int n = 100000;
  Vec mean = Vec::Zero(15);
  Mat second = Mat::Zero(15, 15);
  for (int i = 0; i < n; ++i) {
    const Vec f = p.sample(rng);
    mean += f;
    second += (f - mu) * (f - mu).transpose();
  }
  mean /= n;
  second /= n;
  const Mat sigma = l * l.transpose();
  CHECK((second - sigma).norm() / sigma.norm() <= 0.02);
  CHECK((mean - mu).norm() / std::sqrt(sigma.trace()) <= 0.02);
}

TEST_CASE("prior scaling and masking") {
  auto bar = test::small_bar();
  const ForcePrior p = handle_prior(bar.ops, HandleSet{{test::nearest_vertex(bar.mesh, Vec3(0, 0, 0)),
                                                        test::nearest_vertex(bar.mesh, Vec3(0, 0, 1))},
                                                       1.0});
  const ForcePrior s = p.scaled(3.0);
  CHECK((s.dense_covariance() - 9.0 * p.dense_covariance()).cwiseAbs().maxCoeff() <=
        1e-12 * s.dense_covariance().cwiseAbs().maxCoeff());
  const ForcePrior m = p.masked(bar.ops.free_mask());
  const Mat c = m.dense_covariance();
  for (Index pin : bar.pins)
    for (int d = 0; d < 3; ++d) CHECK(c.row(3 * pin + d).isZero(0.0));
  CHECK(m.covariance_trace() < p.covariance_trace());
  CHECK(m.covariance_trace() > 0.0);
}

TEST_CASE("contact prior: single frame, one vertex") {
  const TetMesh mesh = box_mesh(2, 2, 1, Vec3::Zero(), Vec3(1, 1, 0.5));
  const auto ops = SystemOperators::build(mesh, {}, {});
  const Index i = test::nearest_vertex(mesh, Vec3(0.5, 0.5, 0.5));
  Vec w = Vec::Zero(mesh.num_vertices());
  w(i) = 1.0;
  ContactFrame frame = contact_frame_from_normal(Vec3(0, 0, -1), w);
  const Mat d = contact_forces(mesh, ops, ContactPatchSet{{frame}, false});
  REQUIRE(d.cols() == 3);
  Mat3 r;
  r << frame.normal, frame.tangent, frame.bitangent;
  CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
  const Vec3 a(0.3, -1.0, 2.0);
  const Vec f = d * a;
  const double vi = ops.mass()(3 * i);
  CHECK((f.segment<3>(3 * i) - vi * r * a).norm() <= 1e-12 * vi);
  CHECK(f.norm() == doctest::Approx(f.segment<3>(3 * i).norm()));

  ContactFrame zero = contact_frame_from_normal(Vec3(0, 0, 1), Vec::Zero(mesh.num_vertices()));
  CHECK(contact_prior(mesh, ops, ContactPatchSet{{zero}, false}).covariance_trace() == 0.0);

  ContactFrame bad = frame;
  bad.tangent = Vec3(1, 1, 0);
  CHECK_THROWS_AS(contact_forces(mesh, ops, ContactPatchSet{{bad}, false}), InputError);
  Vec interior = Vec::Zero(mesh.num_vertices());
  for (Index v = 0; v < mesh.num_vertices(); ++v)
    if (!mesh.is_surface_vertex(v)) interior(v) = 1.0;
  if (interior.sum() > 0)
    CHECK_THROWS_AS(contact_forces(mesh, ops, ContactPatchSet{{contact_frame_from_normal(Vec3(1, 0, 0), interior)}, false}),
                    InputError);
}

TEST_CASE("contact prior: spherical patches on a slab match a dense construction") {
  const TetMesh mesh = box_mesh(4, 4, 1, Vec3::Zero(), Vec3(1, 1, 0.25));
  const auto ops = SystemOperators::build(mesh, {}, {});
  std::vector<ContactFrame> frames{
      contact_frame_from_normal(Vec3(0, 0, -1), spherical_patch_weights(mesh, Vec3(0.5, 0.5, 0.25), 0.4)),
      contact_frame_from_normal(Vec3(1, 1, 0).normalized(), spherical_patch_weights(mesh, Vec3(0, 0, 0.25), 0.3))};
  for (bool normalize : {false, true}) {
    const ContactPatchSet set{frames, normalize};
    Mat d = Mat::Zero(mesh.dofs(), 6);
    for (int j = 0; j < 2; ++j) {
      Mat3 r;
      r << frames[j].normal, frames[j].tangent, frames[j].bitangent;
      const double total = frames[j].weights.sum();
      for (Index v = 0; v < mesh.num_vertices(); ++v) {
        const double w = normalize ? frames[j].weights(v) / total : frames[j].weights(v);
        d.block<3, 3>(3 * v, 3 * j) = ops.mass()(3 * v) * w * r;
      }
    }
    const Mat oracle = d * d.transpose();
    const Mat got = contact_prior(mesh, ops, set).dense_covariance();
    CHECK((got - oracle).cwiseAbs().maxCoeff() <= 1e-12 * oracle.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("pneumatic prior") {
  const TetMesh mesh = box_mesh(3, 3, 3, Vec3::Zero(), Vec3::Ones());
  const SurfaceMeasures s = surface_measures(mesh);
  const Mat all = pneumatic_forces(mesh, PneumaticPocketSet{{mesh.surface_vertices()}});
  Vec3 net = Vec3::Zero();
  for (Index v = 0; v < mesh.num_vertices(); ++v) net += all.col(0).segment<3>(3 * v);
  // Barycentric areas with averaged normals do not integrate exactly, but the
  // cube is symmetric, so the net force cancels.
  CHECK(net.norm() <= 1e-12);
  for (Index v : mesh.surface_vertices())
    CHECK((all.col(0).segment<3>(3 * v) - s.areas(v) * s.normals.row(v).transpose()).norm() <= 1e-14);

  const Index f0 = 0;
  std::vector<Index> tri{mesh.surface()(f0, 0), mesh.surface()(f0, 1), mesh.surface()(f0, 2)};
  const Mat one = pneumatic_forces(mesh, PneumaticPocketSet{{tri}});
  int support = 0;
  for (Index v = 0; v < mesh.num_vertices(); ++v) support += one.col(0).segment<3>(3 * v).norm() > 0.0;
  CHECK(support == 3);

  std::vector<Index> bottom, top;
  for (Index v : mesh.surface_vertices()) {
    if (mesh.vertex(v).z() == 0.0) bottom.push_back(v);
    if (mesh.vertex(v).z() == 1.0) top.push_back(v);
  }
  const Mat two = pneumatic_forces(mesh, PneumaticPocketSet{{bottom, top}});
  CHECK(two.col(0).dot(two.col(1)) == 0.0);
  Index interior = -1;
  for (Index v = 0; v < mesh.num_vertices(); ++v)
    if (!mesh.is_surface_vertex(v)) interior = v;
  REQUIRE(interior >= 0);
  CHECK_THROWS_AS(pneumatic_forces(mesh, PneumaticPocketSet{{{interior}}}), InputError);
}

TEST_CASE("muscle prior on the reference tet") {
  const TetMesh tet = reference_tet();
  const auto jac = element_jacobians(tet);
  const Mat d = muscle_forces(tet, jac, MuscleFiberSet{{0}, {Vec3(1, 0, 0)}});
  REQUIRE(d.cols() == 1);
  // -v d_c (grad_i . d) with grads (-1,-1,-1), e1, e2, e3 and v = 1/6.
  Vec expected = Vec::Zero(12);
  expected(0) = 1.0 / 6;
  expected(3) = -1.0 / 6;
  CHECK((d.col(0) - expected).cwiseAbs().maxCoeff() <= 1e-15);

  const Mat flipped = muscle_forces(tet, jac, MuscleFiberSet{{0}, {Vec3(-1, 0, 0)}});
  CHECK((flipped - d).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(muscle_forces(tet, jac, MuscleFiberSet{{1}, {Vec3(1, 0, 0)}}), InputError);
  CHECK_THROWS_AS(muscle_forces(tet, jac, MuscleFiberSet{{0}, {Vec3(1, 1, 0)}}), InputError);
}

TEST_CASE("muscle and spring forces annihilate translations") {
  const TetMesh mesh = box_mesh(2, 2, 2, Vec3::Zero(), Vec3(1, 1, 1));
  const auto jac = element_jacobians(mesh);
  MuscleFiberSet fibers;
  for (Index t = 0; t < mesh.num_tets(); t += 3) {
    fibers.elements.push_back(t);
    fibers.directions.push_back(Vec3(1, 2, static_cast<double>(t % 5)).normalized());
  }
  const Mat dm = muscle_forces(mesh, jac, fibers);
  CHECK((dm.transpose() * translations(mesh.num_vertices())).cwiseAbs().maxCoeff() <= 1e-14);
  SpringSet springs;
  for (Index t = 0; t < mesh.num_tets(); t += 2) springs.edges.push_back({mesh.tets()(t, 0), mesh.tets()(t, 3)});
  const Mat ds = spring_forces(mesh, springs);
  CHECK((ds.transpose() * translations(mesh.num_vertices())).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("spring forces: axis edge and finite differences of edge lengths") {
  const TetMesh mesh = box_mesh(2, 2, 2, Vec3::Zero(), Vec3(1, 1, 1));
  const Index a = test::nearest_vertex(mesh, Vec3(0, 0, 0));
  const Index b = test::nearest_vertex(mesh, Vec3(0.5, 0, 0));
  const Mat d = spring_forces(mesh, SpringSet{{{a, b}}, {}});
  Vec expected = Vec::Zero(mesh.dofs());
  expected(3 * a) = -1.0;
  expected(3 * b) = 1.0;
  CHECK((d.col(0) - expected).cwiseAbs().maxCoeff() <= 1e-15);

  const Index c = test::nearest_vertex(mesh, Vec3(1, 0.5, 1));
  const Index e = test::nearest_vertex(mesh, Vec3(0, 1, 0.5));
  const Mat de = spring_forces(mesh, SpringSet{{{c, e}}, {}});
  const double h = 1e-7;
  const auto length = [&](const Vec& u) {
    return (mesh.vertex(e) + u.segment<3>(3 * e) - mesh.vertex(c) - u.segment<3>(3 * c)).norm();
  };
  for (Index i = 0; i < mesh.dofs(); ++i) {
    Vec up = Vec::Zero(mesh.dofs()), dn = Vec::Zero(mesh.dofs());
    up(i) = h;
    dn(i) = -h;
    CHECK(std::abs((length(up) - length(dn)) / (2 * h) - de(i, 0)) <= 1e-6);
  }
  CHECK_THROWS_AS(spring_forces(mesh, SpringSet{{{a, a}}, {}}), InputError);
}
