#include "fdm/priors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>

#include <cmath>
#include <set>

namespace fdm {

ForcePrior::ForcePrior(Vec mean, DiagonalCovariance cov, std::string label)
    : mean_(std::move(mean)), cov_(std::move(cov)), label_(std::move(label)) {
  const auto& var = std::get<DiagonalCovariance>(cov_).variances;
  if (var.size() != mean_.size()) throw InputError("diagonal prior: variance and mean sizes differ");
  if ((var.array() < 0.0).any() || !var.allFinite()) throw InputError("diagonal prior: variances must be finite and >= 0");
}

ForcePrior::ForcePrior(Vec mean, LowRankCovariance cov, std::string label)
    : mean_(std::move(mean)), cov_(std::move(cov)), label_(std::move(label)) {
  const auto& l = std::get<LowRankCovariance>(cov_).factor;
  if (l.rows() != mean_.size()) throw InputError("low-rank prior: factor and mean sizes differ");
  if (!l.allFinite()) throw InputError("low-rank prior: factor must be finite");
}

Vec ForcePrior::apply_covariance(const Vec& x) const {
  if (is_diagonal()) return diagonal().variances.cwiseProduct(x);
  const Mat& l = lowrank().factor;
  return l * (l.transpose() * x);
}

Mat ForcePrior::apply_covariance(const Mat& x) const {
  if (is_diagonal()) return diagonal().variances.asDiagonal() * x;
  const Mat& l = lowrank().factor;
  return l * (l.transpose() * x);
}

Mat ForcePrior::dense_covariance() const {
  if (is_diagonal()) return diagonal().variances.asDiagonal();
  const Mat& l = lowrank().factor;
  return l * l.transpose();
}

double ForcePrior::covariance_trace() const {
  if (is_diagonal()) return diagonal().variances.sum();
  return lowrank().factor.squaredNorm();
}

Vec ForcePrior::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal;
  if (is_diagonal()) {
    Vec xi(dofs());
    for (Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
    return mean_ + diagonal().variances.cwiseSqrt().cwiseProduct(xi);
  }
  const Mat& l = lowrank().factor;
  Vec xi(l.cols());
  for (Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
  return mean_ + l * xi;
}

ForcePrior ForcePrior::scaled(double s) const {
  if (is_diagonal()) return ForcePrior(s * mean_, DiagonalCovariance{s * s * diagonal().variances}, label_);
  const auto& lr = lowrank();
  return ForcePrior(s * mean_,
                    LowRankCovariance{s * lr.factor, s * lr.actuation_mean, s * s * lr.actuation_covariance}, label_);
}

ForcePrior ForcePrior::masked(const Vec& free_mask) const {
  if (free_mask.size() != dofs()) throw InputError("mask size does not match prior");
  if (is_diagonal()) {
    return ForcePrior(mean_.cwiseProduct(free_mask), DiagonalCovariance{diagonal().variances.cwiseProduct(free_mask)},
                      label_);
  }
  auto lr = lowrank();
  lr.factor = free_mask.asDiagonal() * lr.factor;
  return ForcePrior(mean_.cwiseProduct(free_mask), std::move(lr), label_);
}

ForcePrior ForcePrior::relabeled(std::string label) const {
  ForcePrior out = *this;
  out.label_ = std::move(label);
  return out;
}

ForcePrior lowrank_prior(const Mat& forces, const Actuation& actuation, std::string label) {
  const Index r = forces.cols();
  const Vec mu = actuation.mean.value_or(Vec::Zero(r));
  const Mat sigma = actuation.covariance.value_or(Mat::Identity(r, r));
  if (mu.size() != r) throw InputError("actuation mean has size " + std::to_string(mu.size()) + ", expected " + std::to_string(r));
  if (sigma.rows() != r || sigma.cols() != r) throw InputError("actuation covariance must be " + std::to_string(r) + "x" + std::to_string(r));
  if (!sigma.isApprox(sigma.transpose(), 1e-12)) throw InputError("actuation covariance is not symmetric");

  Mat factor;
  if (!actuation.covariance) {
    factor = forces;
  } else {
    // Pivoted LDL^T accepts singular PSD matrices: sigma = P^T L D L^T P.
    Eigen::LDLT<Mat> ldlt(sigma);
    const Vec d = ldlt.vectorD();
    const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || (d.array() < -1e-12 * scale).any())
      throw InputError("actuation covariance is not positive semidefinite");
    Mat l = ldlt.matrixL();
    Mat c = ldlt.transpositionsP().transpose() * l;
    c = c * d.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    factor = forces * c;
  }
  return ForcePrior(forces * mu, LowRankCovariance{std::move(factor), mu, sigma}, std::move(label));
}

ForcePrior lma_prior(const SystemOperators& ops) {
  return ForcePrior(Vec::Zero(ops.dofs()), DiagonalCovariance{ops.mass()}, "lma");
}

ForcePrior painted_prior(const TetMesh& mesh, const SystemOperators& ops, const Vec& weights) {
  if (weights.size() != mesh.num_vertices()) throw InputError("painted weights must have one value per vertex");
  if ((weights.array() < 0.0).any() || !weights.allFinite()) throw InputError("painted weights must be finite and nonnegative");
  Vec var = ops.mass();
  for (Index v = 0; v < mesh.num_vertices(); ++v) var.segment<3>(3 * v) *= weights(v);
  return ForcePrior(Vec::Zero(ops.dofs()), DiagonalCovariance{std::move(var)}, "painted");
}

Vec radial_decay_weights(const TetMesh& mesh, const Vec3& center, double radius, double alpha) {
  if (!(radius >= 0.0) || !(alpha > 0.0)) throw InputError("radial decay needs radius >= 0 and alpha > 0");
  Vec w(mesh.num_vertices());
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const double excess = (mesh.vertex(v) - center).norm() - radius;
    w(v) = excess > 0.0 ? std::exp(-alpha * excess * excess) : 1.0;
  }
  return w;
}

SpMat handle_selection(Index dofs, const std::vector<Index>& vertices) {
  SpMat s(dofs, 3 * static_cast<Index>(vertices.size()));
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t h = 0; h < vertices.size(); ++h)
    for (int c = 0; c < 3; ++c) trip.emplace_back(3 * vertices[h] + c, 3 * static_cast<Index>(h) + c, 1.0);
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

namespace {

void check_vertices(const std::vector<Index>& vertices, Index num_vertices, const char* what) {
  std::set<Index> seen;
  for (Index v : vertices) {
    if (v < 0 || v >= num_vertices) throw InputError(std::string(what) + ": vertex index out of range: " + std::to_string(v));
    if (!seen.insert(v).second) throw InputError(std::string(what) + ": duplicate vertex " + std::to_string(v));
  }
}

}  // namespace

Mat handle_forces(const SystemOperators& ops, const HandleSet& handles) {
  if (!(handles.strength > 0.0)) throw InputError("handle strength must be positive");
  if (handles.vertices.empty()) throw InputError("handle set is empty");
  check_vertices(handles.vertices, ops.dofs() / 3, "handle set");
  Mat d = Mat::Zero(ops.dofs(), 3 * static_cast<Index>(handles.vertices.size()));
  for (std::size_t h = 0; h < handles.vertices.size(); ++h) {
    for (int c = 0; c < 3; ++c) {
      const Index row = 3 * handles.vertices[h] + c;
      d(row, 3 * static_cast<Index>(h) + c) = handles.strength * ops.mass()(row);
    }
  }
  return d;
}

ForcePrior handle_prior(const SystemOperators& ops, const HandleSet& handles, const Actuation& actuation) {
  return lowrank_prior(handle_forces(ops, handles), actuation, "handle");
}

Vec spherical_patch_weights(const TetMesh& mesh, const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw InputError("contact patch radius must be positive");
  Vec w = Vec::Zero(mesh.num_vertices());
  for (Index v : mesh.surface_vertices()) w(v) = std::max(0.0, 1.0 - (mesh.vertex(v) - center).norm() / radius);
  return w;
}

ContactFrame contact_frame_from_normal(const Vec3& normal, Vec weights) {
  const Vec3 n = normal.normalized();
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 t = (helper - helper.dot(n) * n).normalized();
  return ContactFrame{n, t, n.cross(t), std::move(weights)};
}

Mat contact_forces(const TetMesh& mesh, const SystemOperators& ops, const ContactPatchSet& patches) {
  if (patches.frames.empty()) throw InputError("contact patch set is empty");
  Mat d = Mat::Zero(mesh.dofs(), 3 * static_cast<Index>(patches.frames.size()));
  for (std::size_t j = 0; j < patches.frames.size(); ++j) {
    const auto& f = patches.frames[j];
    Mat3 frame;
    frame << f.normal, f.tangent, f.bitangent;
    if (!(frame.transpose() * frame).isApprox(Mat3::Identity(), 1e-10) ||
        ((frame.transpose() * frame) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-10)
      throw InputError("contact frame " + std::to_string(j) + " is not orthonormal");
    if (f.weights.size() != mesh.num_vertices()) throw InputError("contact weights must have one value per vertex");
    if ((f.weights.array() < 0.0).any()) throw InputError("contact weights must be nonnegative");
    double total = 0.0;
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      if (f.weights(v) != 0.0 && !mesh.is_surface_vertex(v))
        throw InputError("contact weights must vanish off the surface (vertex " + std::to_string(v) + ")");
      total += f.weights(v);
    }
    const double norm = (patches.normalize_weights && total > 0.0) ? 1.0 / total : 1.0;
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      if (f.weights(v) == 0.0) continue;
      d.block<3, 3>(3 * v, 3 * static_cast<Index>(j)) = ops.mass()(3 * v) * norm * f.weights(v) * frame;
    }
  }
  return d;
}

ForcePrior contact_prior(const TetMesh& mesh, const SystemOperators& ops, const ContactPatchSet& patches,
                         const Actuation& actuation) {
  return lowrank_prior(contact_forces(mesh, ops, patches), actuation, "contact");
}

Mat pneumatic_forces(const TetMesh& mesh, const PneumaticPocketSet& pockets) {
  if (pockets.pockets.empty()) throw InputError("pneumatic pocket set is empty");
  const SurfaceMeasures sm = surface_measures(mesh);
  Mat d = Mat::Zero(mesh.dofs(), static_cast<Index>(pockets.pockets.size()));
  for (std::size_t j = 0; j < pockets.pockets.size(); ++j) {
    const auto& pocket = pockets.pockets[j];
    if (pocket.empty()) throw InputError("pneumatic pocket " + std::to_string(j) + " is empty");
    check_vertices(pocket, mesh.num_vertices(), "pneumatic pocket");
    for (Index v : pocket) {
      if (!mesh.is_surface_vertex(v)) throw InputError("pneumatic pocket vertex " + std::to_string(v) + " is not on the surface");
      d.block<3, 1>(3 * v, static_cast<Index>(j)) = sm.areas(v) * sm.normals.row(v).transpose();
    }
  }
  return d;
}

ForcePrior pneumatic_prior(const TetMesh& mesh, const PneumaticPocketSet& pockets, const Actuation& actuation) {
  return lowrank_prior(pneumatic_forces(mesh, pockets), actuation, "pneumatic");
}

Mat muscle_forces(const TetMesh& mesh, const std::vector<ElementJacobian>& jacobians, const MuscleFiberSet& fibers) {
  if (fibers.elements.empty()) throw InputError("muscle fiber set is empty");
  if (fibers.directions.size() != fibers.elements.size())
    throw InputError("muscle fibers: one direction per active element is required");
  if (static_cast<Index>(jacobians.size()) != mesh.num_tets()) throw InputError("muscle fibers: jacobians do not match mesh");
  std::set<Index> seen;
  Mat d = Mat::Zero(mesh.dofs(), static_cast<Index>(fibers.elements.size()));
  for (std::size_t j = 0; j < fibers.elements.size(); ++j) {
    const Index t = fibers.elements[j];
    if (t < 0 || t >= mesh.num_tets() || !seen.insert(t).second)
      throw InputError("muscle fiber on invalid or repeated element " + std::to_string(t));
    const Vec3& dir = fibers.directions[j];
    if (std::abs(dir.norm() - 1.0) > 1e-10) throw InputError("muscle fiber direction must be unit length");
    const auto& jac = jacobians[static_cast<std::size_t>(t)];
    // F = I at rest, so dC/dF = v d d^T.
    const Eigen::Matrix<double, 4, 3> per_vertex = -jac.volume() * jac.contract(dir * dir.transpose());
    for (int k = 0; k < 4; ++k) d.block<3, 1>(3 * mesh.tets()(t, k), static_cast<Index>(j)) += per_vertex.row(k).transpose();
  }
  return d;
}

ForcePrior muscle_prior(const TetMesh& mesh, const std::vector<ElementJacobian>& jacobians,
                        const MuscleFiberSet& fibers, const Actuation& actuation) {
  return lowrank_prior(muscle_forces(mesh, jacobians, fibers), actuation, "muscle");
}

Mat spring_forces(const TetMesh& mesh, const SpringSet& springs) {
  if (springs.edges.empty()) throw InputError("spring set is empty");
  if (!springs.rest_lengths.empty() && springs.rest_lengths.size() != springs.edges.size())
    throw InputError("spring set: one rest length per edge is required");
  Mat d = Mat::Zero(mesh.dofs(), static_cast<Index>(springs.edges.size()));
  for (std::size_t j = 0; j < springs.edges.size(); ++j) {
    const auto [a, b] = springs.edges[j];
    if (a < 0 || b < 0 || a >= mesh.num_vertices() || b >= mesh.num_vertices())
      throw InputError("spring endpoint out of range");
    if (a == b) throw InputError("spring endpoints must be distinct");
    if (!springs.rest_lengths.empty() && !(springs.rest_lengths[j] > 0.0))
      throw InputError("spring rest lengths must be positive");
    const Vec3 edge = mesh.vertex(b) - mesh.vertex(a);
    const double len = edge.norm();
    if (!(len > 0.0)) throw InputError("degenerate zero-length spring " + std::to_string(j));
    const Vec3 e = edge / len;
    d.block<3, 1>(3 * a, static_cast<Index>(j)) = -e;
    d.block<3, 1>(3 * b, static_cast<Index>(j)) = e;
  }
  return d;
}

ForcePrior spring_prior(const TetMesh& mesh, const SpringSet& springs, const Actuation& actuation) {
  return lowrank_prior(spring_forces(mesh, springs), actuation, "spring");
}

}  // namespace fdm
