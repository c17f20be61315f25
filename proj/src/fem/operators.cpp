#include "fdm/operators.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

#include "fdm/parallel.hpp"

namespace fdm {

double MaterialParams::youngs(Index tet) const {
  return youngs_per_element.empty() ? youngs_modulus : youngs_per_element[static_cast<std::size_t>(tet)];
}

double MaterialParams::rho(Index tet) const {
  return density_per_element.empty() ? density : density_per_element[static_cast<std::size_t>(tet)];
}

void MaterialParams::validate(Index num_tets) const {
  if (!(poisson_ratio > -1.0 && poisson_ratio < 0.5)) throw InputError("poisson_ratio must lie in (-1, 0.5)");
  if (!youngs_per_element.empty() && static_cast<Index>(youngs_per_element.size()) != num_tets)
    throw InputError("per-element Young's modulus has wrong length");
  if (!density_per_element.empty() && static_cast<Index>(density_per_element.size()) != num_tets)
    throw InputError("per-element density has wrong length");
  for (Index t = 0; t < num_tets; ++t) {
    if (!(youngs(t) > 0.0)) throw InputError("youngs_modulus must be positive");
    if (!(rho(t) > 0.0)) throw InputError("density must be positive");
  }
}

Vec assemble_mass(const TetMesh& mesh, const MaterialParams& mat) {
  mat.validate(mesh.num_tets());
  Vec m = Vec::Zero(mesh.dofs());
  for (Index t = 0; t < mesh.num_tets(); ++t) {
    const double share = 0.25 * mat.rho(t) * mesh.tet_volume(t);
    for (int k = 0; k < 4; ++k) m.segment<3>(3 * mesh.tets()(t, k)).array() += share;
  }
  return m;
}

std::vector<ElementJacobian> element_jacobians(const TetMesh& mesh) {
  std::vector<ElementJacobian> out;
  out.reserve(static_cast<std::size_t>(mesh.num_tets()));
  std::vector<Index> degenerate;
  for (Index t = 0; t < mesh.num_tets(); ++t) {
    const Vec3 x0 = mesh.vertex(mesh.tets()(t, 0));
    Mat3 rest_edges;
    for (int k = 1; k < 4; ++k) rest_edges.col(k - 1) = mesh.vertex(mesh.tets()(t, k)) - x0;
    const double volume = rest_edges.determinant() / 6.0;
    if (!(volume > 0.0)) {
      degenerate.push_back(t);
      continue;
    }
    const Mat3 inv = rest_edges.inverse();
    Eigen::Matrix<double, 4, 3> grads;
    grads.bottomRows<3>() = inv;
    grads.row(0) = -inv.colwise().sum();
    out.emplace_back(grads, volume);
  }
  if (!degenerate.empty()) throw MeshError("degenerate tetrahedra (zero volume)", degenerate);
  return out;
}

Mat3 ElementJacobian::displacement_gradient(const Eigen::Matrix<double, 4, 3>& u) const {
  return u.transpose() * grads_;
}

Eigen::Matrix<double, 4, 3> ElementJacobian::contract(const Mat3& p) const {
  return grads_ * p.transpose();
}

Mat3 deformation_gradient(const TetMesh& mesh, const ElementJacobian& jac, Index t, const Vec& displacement) {
  Eigen::Matrix<double, 4, 3> u;
  for (int k = 0; k < 4; ++k) u.row(k) = displacement.segment<3>(3 * mesh.tets()(t, k)).transpose();
  return Mat3::Identity() + jac.displacement_gradient(u);
}

SpMat assemble_stiffness(const TetMesh& mesh, const MaterialParams& mat) {
  mat.validate(mesh.num_tets());
  const auto jacobians = element_jacobians(mesh);
  const double nu = mat.poisson_ratio;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_tets()) * 144);
  for (Index t = 0; t < mesh.num_tets(); ++t) {
    const double young = mat.youngs(t);
    const double mu = young / (2.0 * (1.0 + nu));
    const double lambda = young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const auto& g = jacobians[static_cast<std::size_t>(t)].shape_gradients();
    const double vol = jacobians[static_cast<std::size_t>(t)].volume();
    // K_(ic)(jd) = vol * (mu (delta_cd g_i.g_j + g_id g_jc) + lambda g_ic g_jd)
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const double gij = g.row(i).dot(g.row(j));
        const Mat3 block = vol * (mu * (gij * Mat3::Identity() + g.row(j).transpose() * g.row(i)) +
                                  lambda * g.row(i).transpose() * g.row(j));
        const Index ri = 3 * mesh.tets()(t, i);
        const Index cj = 3 * mesh.tets()(t, j);
        for (int c = 0; c < 3; ++c)
          for (int d = 0; d < 3; ++d) triplets.emplace_back(ri + c, cj + d, block(c, d));
      }
    }
  }
  SpMat k(mesh.dofs(), mesh.dofs());
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

double default_regularization(const SpMat& stiffness, const Vec& mass) {
  return 1e-4 * stiffness.diagonal().mean() / mass.mean();
}

namespace {

SpMat apply_pins_and_shift(const SpMat& stiffness, const Vec& mass, const Vec& free_mask, double epsilon) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(stiffness.nonZeros() + stiffness.rows()));
  for (Index col = 0; col < stiffness.outerSize(); ++col) {
    for (SpMat::InnerIterator it(stiffness, col); it; ++it) {
      if (free_mask(it.row()) > 0.0 && free_mask(it.col()) > 0.0) triplets.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (Index i = 0; i < stiffness.rows(); ++i) {
    if (free_mask(i) > 0.0) {
      if (epsilon > 0.0) triplets.emplace_back(i, i, epsilon * mass(i));
    } else {
      triplets.emplace_back(i, i, 1.0);
    }
  }
  SpMat h(stiffness.rows(), stiffness.cols());
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

Vec make_free_mask(Index dofs, const std::vector<Index>& pins) {
  Vec mask = Vec::Ones(dofs);
  for (Index v : pins) {
    if (v < 0 || 3 * v + 2 >= dofs) throw InputError("pinned vertex index out of range: " + std::to_string(v));
    mask.segment<3>(3 * v).setZero();
  }
  return mask;
}

}  // namespace

SpMat assemble_hessian(const TetMesh& mesh, const MaterialParams& mat, const std::vector<Index>& pins, double epsilon) {
  if (epsilon < 0.0) throw InputError("regularization must be non-negative");
  const SpMat k = assemble_stiffness(mesh, mat);
  const Vec m = assemble_mass(mesh, mat);
  return apply_pins_and_shift(k, m, make_free_mask(mesh.dofs(), pins), epsilon);
}

SystemOperators SystemOperators::build(const TetMesh& mesh, const MaterialParams& mat, std::vector<Index> pins,
                                       std::optional<double> epsilon) {
  std::sort(pins.begin(), pins.end());
  pins.erase(std::unique(pins.begin(), pins.end()), pins.end());

  SystemOperators ops;
  ops.mass_ = assemble_mass(mesh, mat);
  ops.sqrt_mass_ = ops.mass_.cwiseSqrt();
  ops.free_mask_ = make_free_mask(mesh.dofs(), pins);
  const SpMat k = assemble_stiffness(mesh, mat);
  ops.epsilon_ = epsilon.value_or(pins.empty() ? default_regularization(k, ops.mass_) : 0.0);
  if (ops.epsilon_ < 0.0) throw InputError("regularization must be non-negative");
  if (pins.empty() && ops.epsilon_ == 0.0)
    throw InputError("an unpinned mesh needs a positive regularization epsilon");
  ops.hessian_ = apply_pins_and_shift(k, ops.mass_, ops.free_mask_, ops.epsilon_);
  ops.pins_ = std::move(pins);

  auto factor = std::make_shared<Cholesky>();
  factor->compute(ops.hessian_);
  if (factor->info() != Eigen::Success)
    throw NumericalError("Hessian factorization failed (degenerate elements or regularization too small)");
  ops.factor_ = std::move(factor);
  return ops;
}

Vec SystemOperators::solve(const Vec& rhs) const {
  Vec x = factor_->solve(rhs);
  if (!x.allFinite()) throw NumericalError("sparse solve produced non-finite values");
  return x;
}

Mat SystemOperators::solve(const Mat& rhs) const {
  Mat x = factor_->solve(rhs);
  if (!x.allFinite()) throw NumericalError("sparse solve produced non-finite values");
  return x;
}

Mat SystemOperators::solve_columns(const Mat& rhs) const {
  Mat out(rhs.rows(), rhs.cols());
  parallel_for(rhs.cols(), [&](Index c) { out.col(c) = factor_->solve(rhs.col(c)); });
  if (!out.allFinite()) throw NumericalError("sparse solve produced non-finite values");
  return out;
}

}  // namespace fdm
