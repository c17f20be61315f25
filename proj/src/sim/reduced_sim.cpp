#include "fdm/reduced_sim.hpp"

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

#include <cmath>

namespace fdm {

ReducedOperators reduce_operators(const SystemOperators& ops, const Subspace& sub, Index cap) {
  if (sub.dofs() != ops.dofs()) throw InputError("subspace does not match the operators");
  if (sub.modes() > cap)
    spdlog::warn("subspace has {} modes, above the reduced-size cap {}", sub.modes(), cap);
  ReducedOperators red;
  const Mat hb = ops.hessian() * sub.basis;
  red.stiffness = sub.basis.transpose() * hb;
  red.stiffness = 0.5 * (red.stiffness + red.stiffness.transpose()).eval();
  red.mass = sub.basis.transpose() * ops.mass().asDiagonal() * sub.basis;
  red.mean_force = hb.transpose() * sub.mean;
  return red;
}

Vec ExternalLoad::full(Index dofs) const {
  Vec f = force.size() ? force : Vec::Zero(dofs);
  if (f.size() != dofs) throw InputError("load size does not match the mesh");
  if (actuation_map.size()) {
    if (actuation_map.rows() != dofs || actuation_map.cols() != actuation.size())
      throw InputError("actuation map and coefficients have inconsistent sizes");
    f += actuation_map * actuation;
  }
  if (!f.allFinite()) throw InputError("load has non-finite entries");
  return f;
}

ReducedState static_solve(const ReducedOperators& red, const Subspace& sub, const ExternalLoad& load) {
  const Vec f = load.full(sub.dofs());
  Eigen::LLT<Mat> llt(red.stiffness);
  if (llt.info() != Eigen::Success) throw NumericalError("reduced stiffness is not positive definite");
  ReducedState state;
  state.z = llt.solve(sub.basis.transpose() * f - red.mean_force);
  state.z_dot = Vec::Zero(sub.modes());
  return state;
}

double reconstruction_error(const Subspace& sub, const SystemOperators& ops, const ExternalLoad& load) {
  const Vec f = ops.free_mask().cwiseProduct(load.full(ops.dofs()));
  const Vec full = ops.solve(f);
  const Vec reduced = reconstruct(sub, static_solve(reduce_operators(ops, sub), sub, load).z);
  const Vec d = full - reduced;
  return d.dot(ops.mass().cwiseProduct(d));
}

NewtonResult newton_minimize(const Energy& energy, Vec z0, const NewtonOptions& opts) {
  NewtonResult out;
  out.z = std::move(z0);
  double e = energy.value(out.z);
  Vec g = energy.gradient(out.z);
  for (;;) {
    out.gradient_norm = g.norm();
    if (!std::isfinite(e) || !g.allFinite()) throw NumericalError("Newton: non-finite energy or gradient");
    if (out.gradient_norm <= opts.gradient_tolerance * (1.0 + std::abs(e))) {
      out.converged = true;
      return out;
    }
    if (out.iterations >= opts.max_iterations) return out;
    Eigen::LLT<Mat> llt(energy.hessian(out.z));
    if (llt.info() != Eigen::Success) throw NumericalError("Newton: step Hessian is not positive definite");
    const Vec d = -llt.solve(g);
    const double slope = g.dot(d);
    double t = 1.0;
    int halvings = 0;
    Vec trial = out.z + d;
    double e_trial = energy.value(trial);
    while (!(e_trial <= e + opts.armijo * t * slope)) {
      if (++halvings > opts.max_halvings) throw NumericalError("Newton: line search failed");
      t *= 0.5;
      trial = out.z + t * d;
      e_trial = energy.value(trial);
    }
    out.z = std::move(trial);
    e = e_trial;
    g = energy.gradient(out.z);
    ++out.iterations;
  }
}

StepEnergy::StepEnergy(const ReducedOperators& red, const ReducedState& state, const Vec& reduced_force,
                       const std::vector<ReducedHandle>& handles, const StepSettings& settings)
    : red_(red),
      handles_(handles),
      z_n_(state.z),
      z_tilde_(state.z + settings.timestep * state.z_dot),
      force_(reduced_force),
      damping_(settings.mass_damping * red.mass + settings.stiffness_damping * red.stiffness),
      h_(settings.timestep) {
  if (!(h_ > 0.0)) throw InputError("timestep must be positive");
}

double StepEnergy::value(const Vec& z) const {
  const Vec dz = z - z_tilde_;
  const Vec dn = z - z_n_;
  double e = 0.5 * dz.dot(red_.mass * dz) / (h_ * h_) + 0.5 * dn.dot(damping_ * dn) / h_ +
             0.5 * z.dot(red_.stiffness * z) + z.dot(red_.mean_force) - z.dot(force_);
  for (const auto& hd : handles_) {
    const Vec3 r = hd.rows * z + hd.mean - hd.target;
    e += 0.5 * hd.strength * r.dot(hd.mass.cwiseProduct(r));
  }
  return e;
}

Vec StepEnergy::gradient(const Vec& z) const {
  Vec g = red_.mass * (z - z_tilde_) / (h_ * h_) + damping_ * (z - z_n_) / h_ + red_.stiffness * z +
          red_.mean_force - force_;
  for (const auto& hd : handles_) {
    const Vec3 r = hd.rows * z + hd.mean - hd.target;
    g += hd.strength * hd.rows.transpose() * hd.mass.cwiseProduct(r);
  }
  return g;
}

Mat StepEnergy::hessian(const Vec&) const {
  Mat hs = red_.mass / (h_ * h_) + damping_ / h_ + red_.stiffness;
  for (const auto& hd : handles_) hs += hd.strength * hd.rows.transpose() * hd.mass.asDiagonal() * hd.rows;
  return hs;
}

namespace {

ReducedState step_with(const ReducedOperators& red, const ReducedState& state, const Vec& reduced_force,
                       const std::vector<ReducedHandle>& handles, const StepSettings& settings, int* iterations) {
  if (!state.z.allFinite() || !state.z_dot.allFinite()) throw InputError("reduced state has non-finite entries");
  const StepEnergy energy(red, state, reduced_force, handles, settings);
  const NewtonResult r = newton_minimize(energy, state.z, settings.newton);
  if (iterations) *iterations = r.iterations;
  ReducedState next;
  next.z_dot = (r.z - state.z) / settings.timestep;
  next.z = r.z;
  next.time = state.time + settings.timestep;
  return next;
}

}  // namespace

ReducedState dynamic_step(const ReducedOperators& red, const Subspace& sub, const ReducedState& state,
                          const ExternalLoad& load, const StepSettings& settings, int* iterations) {
  if (state.z.size() != sub.modes() || state.z_dot.size() != sub.modes())
    throw InputError("reduced state does not match the subspace");
  const Vec f = sub.basis.transpose() * load.full(sub.dofs());
  return step_with(red, state, f, {}, settings, iterations);
}

ReducedSimulator::ReducedSimulator(const SystemOperators& ops, Subspace sub, StepSettings settings)
    : ops_(&ops), sub_(std::move(sub)), settings_(settings), red_(reduce_operators(ops, sub_)) {
  if (!(settings_.timestep > 0.0)) throw InputError("timestep must be positive");
  state_.z = Vec::Zero(sub_.modes());
  state_.z_dot = Vec::Zero(sub_.modes());
  force_ = Vec::Zero(ops.dofs());
}

void ReducedSimulator::set_subspace(Subspace sub) {
  if (sub.dofs() != ops_->dofs()) throw InputError("subspace does not match the operators");
  const Vec u = displacement();
  const Vec v = velocity();
  ReducedState next;
  next.z = project(sub, ops_->mass(), u);
  next.z_dot = sub.basis.transpose() * ops_->mass().cwiseProduct(v);
  next.time = state_.time;
  sub_ = std::move(sub);
  red_ = reduce_operators(*ops_, sub_);
  state_ = std::move(next);
}

void ReducedSimulator::set_state(ReducedState state) {
  if (state.z.size() != sub_.modes() || state.z_dot.size() != sub_.modes())
    throw InputError("reduced state does not match the subspace");
  state_ = std::move(state);
}

void ReducedSimulator::set_constant_force(Vec force) {
  if (force.size() != ops_->dofs() || !force.allFinite()) throw InputError("constant force has the wrong size");
  force_ = std::move(force);
}

void ReducedSimulator::assign_handle(Index vertex, double strength) {
  if (vertex < 0 || vertex >= ops_->dofs() / 3) throw InputError("handle vertex out of range: " + std::to_string(vertex));
  if (!(strength > 0.0)) throw InputError("handle strength must be positive");
  const Vec3 current = displacement().segment<3>(3 * vertex);
  handles_[vertex] = Handle{strength, current};
}

void ReducedSimulator::move_handle(Index vertex, const Vec3& target) {
  const auto it = handles_.find(vertex);
  if (it == handles_.end()) throw InputError("move of unassigned handle " + std::to_string(vertex));
  if (!target.allFinite()) throw InputError("handle target must be finite");
  it->second.target = target;
}

void ReducedSimulator::release_handle(Index vertex) {
  if (handles_.erase(vertex) == 0) throw InputError("release of unassigned handle " + std::to_string(vertex));
}

void ReducedSimulator::clear_handles() { handles_.clear(); }

std::vector<Index> ReducedSimulator::handle_vertices() const {
  std::vector<Index> out;
  for (const auto& [v, h] : handles_) out.push_back(v);
  return out;
}

ForceObservation ReducedSimulator::handle_observation() const {
  ForceObservation obs;
  obs.values.resize(3 * static_cast<Index>(handles_.size()));
  const Vec u = displacement();
  Index i = 0;
  for (const auto& [v, h] : handles_) {
    obs.support.push_back(v);
    const Vec3 m = ops_->mass().segment<3>(3 * v);
    obs.values.segment<3>(3 * i) = h.strength * m.cwiseProduct(h.target - u.segment<3>(3 * v));
    ++i;
  }
  return obs;
}

ReducedHandle ReducedSimulator::reduced_handle(Index vertex, const Handle& h) const {
  ReducedHandle r;
  r.vertex = vertex;
  r.strength = h.strength;
  r.rows = sub_.basis.middleRows(3 * vertex, 3);
  r.mean = sub_.mean.segment<3>(3 * vertex);
  r.target = h.target;
  r.mass = ops_->mass().segment<3>(3 * vertex);
  return r;
}

int ReducedSimulator::step() {
  std::vector<ReducedHandle> handles;
  handles.reserve(handles_.size());
  for (const auto& [v, h] : handles_) handles.push_back(reduced_handle(v, h));
  int iterations = 0;
  state_ = step_with(red_, state_, sub_.basis.transpose() * force_, handles, settings_, &iterations);
  return iterations;
}

Vec full_space_step(const TetMesh& mesh, const MaterialParams& mat, const std::vector<Index>& pins, const Vec& u,
                    const Vec& v, const Vec& force, double timestep) {
  const Index dofs = mesh.dofs();
  if (u.size() != dofs || v.size() != dofs || force.size() != dofs) throw InputError("full-space state has wrong size");
  const SpMat k = assemble_hessian(mesh, mat, pins, 0.0);
  const Vec m = assemble_mass(mesh, mat);
  Vec free = Vec::Ones(dofs);
  for (Index p : pins) free.segment<3>(3 * p).setZero();
  const double inv_h2 = 1.0 / (timestep * timestep);
  SpMat system = k;
  for (Index i = 0; i < dofs; ++i)
    if (free(i) > 0.0) system.coeffRef(i, i) += m(i) * inv_h2;
  // Gradient of the step energy at the current state; one Newton iteration
  // is exact for the quadratic model.
  const Vec u_tilde = u + timestep * v;
  const Vec grad = free.cwiseProduct(m.cwiseProduct(u - u_tilde) * inv_h2 + k * u - force);
  Cholesky chol(system);
  if (chol.info() != Eigen::Success) throw NumericalError("full-space step system is not positive definite");
  return u - Vec(chol.solve(grad));
}

}  // namespace fdm
