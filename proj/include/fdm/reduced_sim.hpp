#pragma once

#include <map>

#include "fdm/mixture.hpp"

namespace fdm {

/// Galerkin-projected operators. H_r = B^T H B, M_r = B^T M B, and the
/// elastic force of the mean, B^T H mu_U.
struct ReducedOperators {
  Mat stiffness;
  Mat mass;
  Vec mean_force;
};

/// Warns through the logger when m exceeds `cap`.
ReducedOperators reduce_operators(const SystemOperators& ops, const Subspace& sub, Index cap = 512);

/// Full-space force f, or f = D a when `actuation_map` is set.
struct ExternalLoad {
  Vec force;
  Mat actuation_map;
  Vec actuation;

  Vec full(Index dofs) const;
};

struct ReducedState {
  Vec z;
  Vec z_dot;
  double time = 0.0;
};

/// z = H_r^-1 B^T (f - H mu_U).
ReducedState static_solve(const ReducedOperators& red, const Subspace& sub, const ExternalLoad& load);

/// ||u* - u_c||_M^2 between the full static solution and the reduced one.
double reconstruction_error(const Subspace& sub, const SystemOperators& ops, const ExternalLoad& load);

/// Objective minimized by Newton's method.
class Energy {
 public:
  virtual ~Energy() = default;
  virtual double value(const Vec& z) const = 0;
  virtual Vec gradient(const Vec& z) const = 0;
  virtual Mat hessian(const Vec& z) const = 0;
};

struct NewtonOptions {
  int max_iterations = 10;
  double gradient_tolerance = 1e-8;  // relative to 1 + |E|
  double armijo = 1e-4;
  int max_halvings = 20;
};

struct NewtonResult {
  Vec z;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
};

/// Newton with Armijo backtracking. Throws NumericalError when the Hessian
/// is not positive definite or the line search fails.
NewtonResult newton_minimize(const Energy& energy, Vec z0, const NewtonOptions& opts = {});

/// Reduced handle spring: 1/2 alpha sum_h m_h |B_h z + mu_h - a_h|^2.
struct ReducedHandle {
  Index vertex = 0;
  double strength = 1.0;
  Mat rows;        // 3 x m rows of B at the vertex
  Vec3 mean;       // mu_U at the vertex
  Vec3 target;     // target displacement
  Vec3 mass;       // lumped mass of the three coordinates
};

struct StepSettings {
  double timestep = 1.0 / 60.0;
  double mass_damping = 0.0;
  double stiffness_damping = 0.0;
  NewtonOptions newton;
};

/// Implicit Euler energy: 1/2 |z - z~|^2_{M_r} / h^2 + 1/2 (z - z_n)^T D_r (z - z_n) / h
/// + 1/2 z^T H_r z + z^T B^T H mu - z^T B^T f + handle springs.
class StepEnergy : public Energy {
 public:
  StepEnergy(const ReducedOperators& red, const ReducedState& state, const Vec& reduced_force,
             const std::vector<ReducedHandle>& handles, const StepSettings& settings);
  double value(const Vec& z) const override;
  Vec gradient(const Vec& z) const override;
  Mat hessian(const Vec& z) const override;

 private:
  const ReducedOperators& red_;
  const std::vector<ReducedHandle>& handles_;
  Vec z_n_;
  Vec z_tilde_;
  Vec force_;
  Mat damping_;
  double h_;
};

/// One implicit Euler step from `state` under `load`.
ReducedState dynamic_step(const ReducedOperators& red, const Subspace& sub, const ReducedState& state,
                          const ExternalLoad& load, const StepSettings& settings, int* iterations = nullptr);

/// Owns the reduced state, runtime handles and constant loads.
class ReducedSimulator {
 public:
  ReducedSimulator(const SystemOperators& ops, Subspace sub, StepSettings settings = {});

  const Subspace& subspace() const { return sub_; }
  const ReducedState& state() const { return state_; }
  const ReducedOperators& reduced() const { return red_; }
  const StepSettings& settings() const { return settings_; }

  /// Swaps subspaces; displacement and velocity are reconstructed and
  /// re-projected so the state carries over.
  void set_subspace(Subspace sub);
  void set_state(ReducedState state);
  void set_constant_force(Vec force);
  const Vec& constant_force() const { return force_; }

  void assign_handle(Index vertex, double strength);
  /// Target given as a displacement of the handle vertex.
  void move_handle(Index vertex, const Vec3& target);
  void release_handle(Index vertex);
  bool has_handle(Index vertex) const { return handles_.count(vertex) > 0; }
  void clear_handles();
  std::vector<Index> handle_vertices() const;

  /// alpha m (a - u) on handle coordinates of the current state.
  ForceObservation handle_observation() const;

  int step();
  Vec displacement() const { return reconstruct(sub_, state_.z); }
  Vec velocity() const { return sub_.basis * state_.z_dot; }

 private:
  struct Handle {
    double strength;
    Vec3 target;
  };
  ReducedHandle reduced_handle(Index vertex, const Handle& h) const;

  const SystemOperators* ops_;
  Subspace sub_;
  StepSettings settings_;
  ReducedOperators red_;
  ReducedState state_;
  Vec force_;
  std::map<Index, Handle> handles_;
};

/// One full-space implicit Euler Newton step for the quadratic energy:
/// assembles the stiffness, factorizes M/h^2 + D/h + K with pins and solves.
/// Used as the reference cost for the reduced step.
Vec full_space_step(const TetMesh& mesh, const MaterialParams& mat, const std::vector<Index>& pins, const Vec& u,
                    const Vec& v, const Vec& force, double timestep);

}  // namespace fdm
