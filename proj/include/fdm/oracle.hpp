#pragma once

#include <cstdint>

#include "fdm/subspace.hpp"

namespace fdm {

/// Dense H, M, Sigma_F and Sigma_U = H^-1 Sigma_F H^-1 for small problems.
/// The prior is masked to the free coordinates.
class DenseModel {
 public:
  static DenseModel build(const SystemOperators& ops, const ForcePrior& prior, Index max_dofs = 600);

  Index dofs() const { return mass_.size(); }
  const Mat& hessian() const { return hessian_; }
  const Vec& mass() const { return mass_; }
  const Mat& force_covariance() const { return sigma_f_; }
  const Mat& displacement_covariance() const { return sigma_u_; }
  const Vec& displacement_mean() const { return mu_u_; }
  /// Eigenvalues of Sigma_U M, descending.
  const Vec& spectrum() const { return spectrum_; }
  /// Matching eigenvectors of N Sigma_U N (Euclidean orthonormal).
  const Mat& scaled_eigenvectors() const { return vectors_; }

 private:
  Mat hessian_;
  Vec mass_;
  Mat sigma_f_;
  Mat sigma_u_;
  Vec mu_u_;
  Vec spectrum_;
  Mat vectors_;
};

/// Top-m M-orthonormal eigenvectors of Sigma_U M.
Subspace dense_optimal_basis(const DenseModel& model, Index m);

/// E ||u - mu_U - B B^T M (u - mu_U)||_M^2 = tr(M Sigma_U) - tr(B^T M Sigma_U M B).
double expected_reconstruction_error(const DenseModel& model, const Mat& basis);

/// Sample mean of ||u - mu_U - B B^T M (u - mu_U)||_M^2 over drawn responses.
double sampled_reconstruction_error(const SystemOperators& ops, const ForcePrior& prior, const Mat& basis,
                                    Index count, std::uint64_t seed);

/// Classical modes H b = omega^2 M b on the free coordinates by a dense
/// eigensolve; Lambda holds 1/omega^2.
Subspace dense_modal_basis(const SystemOperators& ops, Index m, Index max_dofs = 2400);

/// M-weighted PCA of `count` sampled static responses (mean mu_U removed).
Subspace pca_from_samples(const SystemOperators& ops, const ForcePrior& prior, Index m, Index count,
                          std::uint64_t seed);

struct AlignmentReport {
  Vec angles;     // radians, ascending
  Vec residuals;  // relative M-norm residual of each column of b against Col(a)
  double max_angle() const { return angles.size() ? angles.maxCoeff() : 0.0; }
  double max_residual() const { return residuals.size() ? residuals.maxCoeff() : 0.0; }
};

AlignmentReport principal_angles(const Mat& a, const Mat& b, const Vec& mass);

/// Relative M-norm residual of each column of `b` against Col(a).
Vec projection_residuals(const Mat& a, const Mat& b, const Vec& mass);

struct AppendixReport {
  double lma_max_angle = 0.0;
  double containment_max_residual = 0.0;
};

/// LMA equivalence of the diagonal path with Sigma_F = M against dense modal
/// analysis, and containment of the low-rank basis in Col(H^-1 L).
AppendixReport appendix_checks(const SystemOperators& ops, const ForcePrior& lowrank, Index m,
                               Index max_dofs = 2400);

}  // namespace fdm
