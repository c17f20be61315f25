#pragma once

#include <optional>
#include <random>
#include <string>
#include <variant>

#include "fdm/operators.hpp"

namespace fdm {

struct DiagonalCovariance {
  Vec variances;  // per coordinate, length 3n
};

/// Sigma_F = factor * factor^T. The factor already absorbs chol(Sigma_A).
struct LowRankCovariance {
  Mat factor;
  Vec actuation_mean;
  Mat actuation_covariance;
};

/// Gaussian on nodal forces, N(mean, Sigma_F).
class ForcePrior {
 public:
  ForcePrior(Vec mean, DiagonalCovariance cov, std::string label);
  ForcePrior(Vec mean, LowRankCovariance cov, std::string label);

  Index dofs() const { return mean_.size(); }
  const Vec& mean() const { return mean_; }
  const std::string& label() const { return label_; }
  bool is_diagonal() const { return std::holds_alternative<DiagonalCovariance>(cov_); }
  const DiagonalCovariance& diagonal() const { return std::get<DiagonalCovariance>(cov_); }
  const LowRankCovariance& lowrank() const { return std::get<LowRankCovariance>(cov_); }

  /// Sigma_F x.
  Vec apply_covariance(const Vec& x) const;
  Mat apply_covariance(const Mat& x) const;
  /// Materialized Sigma_F; intended for oracle-scale problems only.
  Mat dense_covariance() const;
  double covariance_trace() const;
  /// One draw mean + Sigma_F^{1/2} xi with xi standard normal.
  Vec sample(std::mt19937_64& rng) const;
  /// Prior with covariance scaled by s^2 and mean by s.
  ForcePrior scaled(double s) const;
  /// Copy with pinned coordinates (mask == 0) zeroed in mean and covariance.
  ForcePrior masked(const Vec& free_mask) const;
  ForcePrior relabeled(std::string label) const;

 private:
  Vec mean_;
  std::variant<DiagonalCovariance, LowRankCovariance> cov_;
  std::string label_;
};

/// Gaussian on actuation coefficients A. Unset fields default to
/// zero mean and identity covariance at the model's rank.
struct Actuation {
  std::optional<Vec> mean;
  std::optional<Mat> covariance;
};

/// F = D A with A ~ N(mu_A, Sigma_A): LowRank prior with L = D chol(Sigma_A)
/// and mean D mu_A. Sigma_A may be singular PSD. Throws InputError when
/// Sigma_A is not symmetric PSD or sizes disagree.
ForcePrior lowrank_prior(const Mat& forces, const Actuation& actuation, std::string label);

/// Sigma_F = M, zero mean.
ForcePrior lma_prior(const SystemOperators& ops);

/// Per-coordinate variance w_vertex * M; w must be nonnegative and sized n.
ForcePrior painted_prior(const TetMesh& mesh, const SystemOperators& ops, const Vec& weights);

/// exp(-alpha (|x - center| - radius)^2) outside the ball, 1 inside.
Vec radial_decay_weights(const TetMesh& mesh, const Vec3& center, double radius, double alpha = 10.0);

struct HandleSet {
  std::vector<Index> vertices;
  double strength = 1.0;  // alpha, N/m per unit mass
};

/// Sparse 3n x 3k selection of the handle coordinates.
SpMat handle_selection(Index dofs, const std::vector<Index>& vertices);
/// D = alpha S N_h, N_h the handle mass block.
Mat handle_forces(const SystemOperators& ops, const HandleSet& handles);
ForcePrior handle_prior(const SystemOperators& ops, const HandleSet& handles, const Actuation& actuation = {});

struct ContactFrame {
  Vec3 normal;
  Vec3 tangent;
  Vec3 bitangent;
  Vec weights;  // per vertex, zero off the surface
};

struct ContactPatchSet {
  std::vector<ContactFrame> frames;
  bool normalize_weights = false;  // rescale each frame so sum_i w_ij = 1
};

/// Weights max(0, 1 - |x - center| / radius) on surface vertices.
Vec spherical_patch_weights(const TetMesh& mesh, const Vec3& center, double radius);
/// Orthonormal frame with the given normal (tangents chosen deterministically).
ContactFrame contact_frame_from_normal(const Vec3& normal, Vec weights);

/// D block (3i, 3j) = v_i w_ij [n_j t_j r_j], v_i the lumped vertex mass.
Mat contact_forces(const TetMesh& mesh, const SystemOperators& ops, const ContactPatchSet& patches);
ForcePrior contact_prior(const TetMesh& mesh, const SystemOperators& ops, const ContactPatchSet& patches,
                         const Actuation& actuation = {});

struct PneumaticPocketSet {
  std::vector<std::vector<Index>> pockets;  // surface vertex ids per pocket
};

/// Column j holds v_i n_i on pocket-j vertices (Voronoi area, unit normal).
Mat pneumatic_forces(const TetMesh& mesh, const PneumaticPocketSet& pockets);
ForcePrior pneumatic_prior(const TetMesh& mesh, const PneumaticPocketSet& pockets, const Actuation& actuation = {});

struct MuscleFiberSet {
  std::vector<Index> elements;
  std::vector<Vec3> directions;  // one unit fiber per active element
};

/// Column j = -v_j (d_j d_j^T : dF_j/dU) at the rest state.
Mat muscle_forces(const TetMesh& mesh, const std::vector<ElementJacobian>& jacobians, const MuscleFiberSet& fibers);
ForcePrior muscle_prior(const TetMesh& mesh, const std::vector<ElementJacobian>& jacobians,
                        const MuscleFiberSet& fibers, const Actuation& actuation = {});

struct SpringSet {
  std::vector<std::pair<Index, Index>> edges;
  std::vector<double> rest_lengths;  // empty: measured on the rest mesh
};

/// Edge-length Jacobian transpose at rest: -e at a, +e at b per edge column.
Mat spring_forces(const TetMesh& mesh, const SpringSet& springs);
ForcePrior spring_prior(const TetMesh& mesh, const SpringSet& springs, const Actuation& actuation = {});

}  // namespace fdm
