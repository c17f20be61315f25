#pragma once

#include <Eigen/SparseCholesky>

#include <memory>
#include <optional>

#include "fdm/mesh.hpp"

namespace fdm {

/// Isotropic linear-elastic material. Young's modulus and density may be given
/// per element; an empty override vector means the uniform value applies.
struct MaterialParams {
  double youngs_modulus = 1e5;
  double poisson_ratio = 0.3;
  double density = 1000.0;
  std::vector<double> youngs_per_element;
  std::vector<double> density_per_element;

  double youngs(Index tet) const;
  double rho(Index tet) const;
  void validate(Index num_tets) const;
};

/// Lumped diagonal mass (length 3n): each vertex receives a quarter of the
/// mass of every incident tet, replicated over its three coordinates.
Vec assemble_mass(const TetMesh& mesh, const MaterialParams& mat);

/// Rest-state linear elasticity stiffness (3n x 3n), no pins, no shift.
SpMat assemble_stiffness(const TetMesh& mesh, const MaterialParams& mat);

/// Stiffness with pinned rows/columns replaced by identity and `epsilon * M`
/// added on the free coordinates. epsilon = 0 with no pins returns the
/// singular free-floating stiffness.
SpMat assemble_hessian(const TetMesh& mesh, const MaterialParams& mat, const std::vector<Index>& pins, double epsilon);

/// 1e-4 * mean(diag H) / mean(diag M).
double default_regularization(const SpMat& stiffness, const Vec& mass);

using Cholesky = Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;

/// Mass, pinned/regularized Hessian and its Cholesky factorization.
/// Immutable after construction; solves are safe from concurrent readers.
class SystemOperators {
 public:
  /// Throws NumericalError when the Hessian fails to factorize. When `epsilon`
  /// is unset, unpinned meshes use default_regularization and pinned meshes 0.
  static SystemOperators build(const TetMesh& mesh, const MaterialParams& mat, std::vector<Index> pins,
                               std::optional<double> epsilon = std::nullopt);

  Index dofs() const { return mass_.size(); }
  const Vec& mass() const { return mass_; }
  /// N = sqrt(M), diagonal.
  const Vec& sqrt_mass() const { return sqrt_mass_; }
  const SpMat& hessian() const { return hessian_; }
  const std::vector<Index>& pins() const { return pins_; }
  /// 1 on free coordinates, 0 on pinned ones.
  const Vec& free_mask() const { return free_mask_; }
  double regularization() const { return epsilon_; }

  Vec solve(const Vec& rhs) const;
  Mat solve(const Mat& rhs) const;
  /// Column-parallel variant of solve for wide right-hand sides.
  Mat solve_columns(const Mat& rhs) const;

 private:
  Vec mass_;
  Vec sqrt_mass_;
  SpMat hessian_;
  std::vector<Index> pins_;
  Vec free_mask_;
  double epsilon_ = 0.0;
  std::shared_ptr<const Cholesky> factor_;
};

/// Maps nodal displacements of one tet to its displacement gradient, so that
/// F = I + G(U). Stores the four shape-function gradients.
class ElementJacobian {
 public:
  ElementJacobian(const Eigen::Matrix<double, 4, 3>& shape_gradients, double volume)
      : grads_(shape_gradients), volume_(volume) {}

  const Eigen::Matrix<double, 4, 3>& shape_gradients() const { return grads_; }
  double volume() const { return volume_; }

  /// G = sum_i u_i grad_i^T for the tet's four vertex displacements (rows).
  Mat3 displacement_gradient(const Eigen::Matrix<double, 4, 3>& u) const;
  /// P : dF/dU as four 3-vectors (rows), one per tet vertex.
  Eigen::Matrix<double, 4, 3> contract(const Mat3& p) const;

 private:
  Eigen::Matrix<double, 4, 3> grads_;
  double volume_;
};

/// Throws MeshError for degenerate elements.
std::vector<ElementJacobian> element_jacobians(const TetMesh& mesh);

/// Deformation gradient of tet `t` under the full displacement vector U (3n).
Mat3 deformation_gradient(const TetMesh& mesh, const ElementJacobian& jac, Index t, const Vec& displacement);

}  // namespace fdm
