#pragma once

#include <string>

#include "fdm/eigensolver.hpp"
#include "fdm/priors.hpp"

namespace fdm {

enum class BuildPath { diagonal, lowrank, greens, lma_reference, skinning, dense_oracle, pca };

std::string to_string(BuildPath path);
BuildPath parse_build_path(std::string_view name);

/// Mass-orthonormal basis B (3n x m) with descending variances Lambda and mean mu_U.
struct Subspace {
  Mat basis;
  Vec eigenvalues;
  Vec mean;
  std::string prior_label;
  BuildPath path = BuildPath::diagonal;

  Index modes() const { return basis.cols(); }
  Index dofs() const { return basis.rows(); }
};

/// N(mu_U, H^-1 Sigma_F H^-1), kept implicit. Holds a reference to `ops`,
/// which must outlive it.
class DisplacementDistribution {
 public:
  DisplacementDistribution(const SystemOperators& ops, ForcePrior prior);

  const SystemOperators& operators() const { return *ops_; }
  const ForcePrior& prior() const { return prior_; }
  const Vec& mean() const { return mean_; }
  /// Sigma_U X, two sparse solves per column.
  Mat apply_covariance(const Mat& x) const;
  /// H^-1 L for low-rank priors, so that Sigma_U = G G^T.
  Mat covariance_factor() const;

 private:
  const SystemOperators* ops_;
  ForcePrior prior_;
  Vec mean_;
};

/// Masks the prior to the free coordinates and solves H mu_U = mu_F.
DisplacementDistribution propagate(const SystemOperators& ops, const ForcePrior& prior);

struct BuildOptions {
  SubspaceIterationOptions eigen;
  bool keep_mean = true;
};

/// Diagonal prior: top-m eigenvectors of N H^-1 Sigma_F H^-1 N, B = N^-1 X.
Subspace build_diagonal(const SystemOperators& ops, const ForcePrior& prior, Index m, const BuildOptions& opts = {});
/// Low-rank prior: thin SVD of N H^-1 L, B = N^-1 U_m, Lambda = S_m^2.
Subspace build_lowrank(const SystemOperators& ops, const ForcePrior& prior, Index m, const BuildOptions& opts = {});
/// Dispatches on the prior's covariance form.
Subspace build_subspace(const SystemOperators& ops, const ForcePrior& prior, Index m, const BuildOptions& opts = {});
/// M-orthonormal basis of Col(H^-1 D), one column per force column.
Subspace greens_subspace(const SystemOperators& ops, const Mat& forces);

struct SkinningWeights {
  Mat weights;      // n x m scalar fields
  Vec eigenvalues;  // descending
};

/// Scalarized force-dual weights: diagonal priors use the vertex-summed
/// Hessian blocks and per-vertex mean variance, low-rank priors sum the
/// coordinate rows of N H^-1 L.
SkinningWeights scalarize_skinning(const SystemOperators& ops, const ForcePrior& prior, Index m,
                                   const BuildOptions& opts = {});
/// Affine-per-weight blend basis (12 columns per weight) M-orthonormalized
/// in column order; dependent columns are dropped.
Subspace lbs_basis(const TetMesh& mesh, const SystemOperators& ops, const SkinningWeights& weights);

/// B z + mu_U.
Vec reconstruct(const Subspace& sub, const Vec& z);
/// B^T M (u - mu_U).
Vec project(const Subspace& sub, const Vec& mass, const Vec& u);
/// max |B^T M B - I|.
double mass_orthonormality_error(const Mat& basis, const Vec& mass);

/// Deterministic column order and signs for a Euclidean-orthonormal block X
/// with descending values: clusters with relative gap below 1e-8 are rotated
/// onto ascending coordinate-axis projections, then each column's
/// largest-magnitude entry of `scale^-1 X` is made positive.
void canonicalize_basis(Mat& x, const Vec& values, const Vec& scale);

}  // namespace fdm
