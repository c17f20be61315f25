#include "fdm/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <random>

namespace fdm {

namespace {

void check_size(Index dofs, Index max_dofs) {
  if (dofs > max_dofs)
    throw InputError("dense oracle limited to " + std::to_string(max_dofs) + " coordinates, got " + std::to_string(dofs));
}

Mat orthonormal_columns(const Mat& a) {
  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  Index rank = 0;
  while (rank < s.size() && s(rank) > 1e-12 * s(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

Subspace top_of_symmetric(const Mat& a, const Vec& n, Index m, BuildPath path, const std::string& label) {
  if (m < 1 || m > a.rows()) throw InputError("requested mode count out of range");
  Eigen::SelfAdjointEigenSolver<Mat> eig(a);
  if (eig.info() != Eigen::Success) throw NumericalError("dense eigensolve failed");
  const Index dim = a.rows();
  Mat x = eig.eigenvectors().rightCols(m).rowwise().reverse();
  Vec values = eig.eigenvalues().tail(m).reverse();
  canonicalize_basis(x, values, n);
  Subspace sub;
  sub.basis = n.cwiseInverse().asDiagonal() * x;
  sub.eigenvalues = values;
  sub.mean = Vec::Zero(dim);
  sub.prior_label = label;
  sub.path = path;
  return sub;
}

Mat dense_solve_llt(const Mat& h, const Mat& rhs) {
  Eigen::LLT<Mat> llt(h);
  if (llt.info() != Eigen::Success) throw NumericalError("dense Hessian is not positive definite");
  return llt.solve(rhs);
}

}  // namespace

DenseModel DenseModel::build(const SystemOperators& ops, const ForcePrior& prior, Index max_dofs) {
  check_size(ops.dofs(), max_dofs);
  if (prior.dofs() != ops.dofs()) throw InputError("prior size does not match the operators");
  const ForcePrior masked = prior.masked(ops.free_mask());
  DenseModel model;
  model.hessian_ = Mat(ops.hessian());
  model.mass_ = ops.mass();
  model.sigma_f_ = masked.dense_covariance();
  const Mat g = dense_solve_llt(model.hessian_, model.sigma_f_);
  Mat sigma_u = dense_solve_llt(model.hessian_, g.transpose());
  model.sigma_u_ = 0.5 * (sigma_u + sigma_u.transpose());
  model.mu_u_ = dense_solve_llt(model.hessian_, masked.mean());

  const Vec& n = ops.sqrt_mass();
  const Mat scaled = n.asDiagonal() * model.sigma_u_ * n.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat> eig(scaled);
  if (eig.info() != Eigen::Success) throw NumericalError("dense eigensolve failed");
  model.spectrum_ = eig.eigenvalues().reverse();
  model.vectors_ = eig.eigenvectors().rowwise().reverse();
  return model;
}

Subspace dense_optimal_basis(const DenseModel& model, Index m) {
  if (m < 1 || m > model.dofs()) throw InputError("requested mode count out of range");
  const Vec n = model.mass().cwiseSqrt();
  Mat x = model.scaled_eigenvectors().leftCols(m);
  Vec values = model.spectrum().head(m);
  canonicalize_basis(x, values, n);
  Subspace sub;
  sub.basis = n.cwiseInverse().asDiagonal() * x;
  sub.eigenvalues = values;
  sub.mean = model.displacement_mean();
  sub.prior_label = "dense";
  sub.path = BuildPath::dense_oracle;
  return sub;
}

double expected_reconstruction_error(const DenseModel& model, const Mat& basis) {
  const Mat ms = model.mass().asDiagonal() * model.displacement_covariance();
  const Mat mb = model.mass().asDiagonal() * basis;
  return ms.trace() - (mb.transpose() * model.displacement_covariance() * mb).trace();
}

double sampled_reconstruction_error(const SystemOperators& ops, const ForcePrior& prior, const Mat& basis,
                                    Index count, std::uint64_t seed) {
  if (count < 1) throw InputError("sample count must be positive");
  const ForcePrior masked = prior.masked(ops.free_mask());
  std::mt19937_64 rng(seed);
  Mat forces(ops.dofs(), count);
  for (Index s = 0; s < count; ++s) forces.col(s) = masked.sample(rng) - masked.mean();
  const Mat u = ops.solve_columns(forces);
  const Mat mu = ops.mass().asDiagonal() * u;
  const Mat residual = u - basis * (basis.transpose() * mu);
  const Mat mres = ops.mass().asDiagonal() * residual;
  return residual.cwiseProduct(mres).sum() / static_cast<double>(count);
}

Subspace dense_modal_basis(const SystemOperators& ops, Index m, Index max_dofs) {
  check_size(ops.dofs(), max_dofs);
  const Vec nf = ops.free_mask().cwiseProduct(ops.sqrt_mass());
  const Mat a = nf.asDiagonal() * dense_solve_llt(Mat(ops.hessian()), Mat(nf.asDiagonal()));
  const Index free = static_cast<Index>((ops.free_mask().array() > 0.0).count());
  if (m > free) throw InputError("requested mode count exceeds the free coordinates");
  return top_of_symmetric(0.5 * (a + a.transpose()), ops.sqrt_mass(), m, BuildPath::lma_reference, "lma");
}

Subspace pca_from_samples(const SystemOperators& ops, const ForcePrior& prior, Index m, Index count,
                          std::uint64_t seed) {
  if (m < 1) throw InputError("requested mode count must be at least 1");
  if (count < m) throw InputError("PCA needs at least as many samples as modes");
  const ForcePrior masked = prior.masked(ops.free_mask());
  std::mt19937_64 rng(seed);
  Mat forces(ops.dofs(), count);
  for (Index s = 0; s < count; ++s) forces.col(s) = masked.sample(rng) - masked.mean();
  const Vec& n = ops.sqrt_mass();
  const Mat y = n.asDiagonal() * ops.solve_columns(forces);

  Mat x;
  Vec values;
  if (count > y.rows()) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(y * y.transpose());
    if (eig.info() != Eigen::Success) throw NumericalError("PCA eigensolve failed");
    x = eig.eigenvectors().rightCols(m).rowwise().reverse();
    values = eig.eigenvalues().tail(m).reverse() / static_cast<double>(count);
  } else {
    Eigen::BDCSVD<Mat> svd(y, Eigen::ComputeThinU);
    x = svd.matrixU().leftCols(m);
    values = svd.singularValues().head(m).cwiseAbs2() / static_cast<double>(count);
  }
  canonicalize_basis(x, values, n);
  Subspace sub;
  sub.basis = n.cwiseInverse().asDiagonal() * x;
  sub.eigenvalues = values;
  sub.mean = ops.solve(masked.mean());
  sub.prior_label = prior.label();
  sub.path = BuildPath::pca;
  return sub;
}

AlignmentReport principal_angles(const Mat& a, const Mat& b, const Vec& mass) {
  if (a.rows() != b.rows() || a.rows() != mass.size()) throw InputError("subspaces have different ambient dimension");
  const Vec n = mass.cwiseSqrt();
  Mat qa = orthonormal_columns(n.asDiagonal() * a);
  Mat qb = orthonormal_columns(n.asDiagonal() * b);
  if (qa.cols() < qb.cols()) std::swap(qa, qb);
  const Index k = qb.cols();

  const Mat c = qa.transpose() * qb;
  Eigen::JacobiSVD<Mat> cos_svd(c);
  Eigen::JacobiSVD<Mat> sin_svd(qb - qa * c);
  const Vec cosines = cos_svd.singularValues();       // descending
  const Vec sines = sin_svd.singularValues().reverse();  // ascending

  AlignmentReport report;
  report.angles.resize(k);
  for (Index i = 0; i < k; ++i) {
    const double cs = std::clamp(cosines(i), 0.0, 1.0);
    const double sn = std::clamp(sines(i), 0.0, 1.0);
    report.angles(i) = cs * cs > 0.5 ? std::asin(sn) : std::acos(cs);
  }
  std::sort(report.angles.begin(), report.angles.end());
  report.residuals = projection_residuals(a, b, mass);
  return report;
}

Vec projection_residuals(const Mat& a, const Mat& b, const Vec& mass) {
  const Vec n = mass.cwiseSqrt();
  const Mat qa = orthonormal_columns(n.asDiagonal() * a);
  const Mat nb = n.asDiagonal() * b;
  const Mat r = nb - qa * (qa.transpose() * nb);
  Vec out(b.cols());
  for (Index j = 0; j < b.cols(); ++j) {
    const double norm = nb.col(j).norm();
    out(j) = norm > 0.0 ? r.col(j).norm() / norm : 0.0;
  }
  return out;
}

AppendixReport appendix_checks(const SystemOperators& ops, const ForcePrior& lowrank, Index m, Index max_dofs) {
  AppendixReport report;
  const Subspace modal = dense_modal_basis(ops, m, max_dofs);
  const Subspace diag = build_diagonal(ops, lma_prior(ops), m);
  report.lma_max_angle = principal_angles(modal.basis, diag.basis, ops.mass()).max_angle();

  const Index r = lowrank.lowrank().factor.cols();
  const Subspace lr = build_lowrank(ops, lowrank, std::min(m, r));
  const Mat g = ops.solve_columns(lowrank.masked(ops.free_mask()).lowrank().factor);
  report.containment_max_residual = projection_residuals(g, lr.basis, ops.mass()).maxCoeff();
  return report;
}

}  // namespace fdm
