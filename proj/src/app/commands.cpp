#include "fdm/commands.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>

#include "fdm/oracle.hpp"

namespace fdm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out << std::setprecision(17);
  return out;
}

void prepare(const CommandOptions& opts) {
  set_thread_count(opts.threads);
  spdlog::set_level(opts.verbose ? spdlog::level::debug : spdlog::level::info);
  if (opts.config.empty()) throw InputError("--config is required");
  fs::create_directories(opts.out);
}

std::vector<Subspace> load_or_build(const CommandOptions& opts, const SceneConfig& config, const Scene& scene,
                                    std::vector<ForcePrior>& priors) {
  const auto specs = component_specs(config);
  priors.clear();
  for (const auto& s : specs) priors.push_back(make_prior(s, scene).masked(scene.ops.free_mask()));
  std::vector<Subspace> subs;
  if (!opts.subspaces.empty()) {
    if (opts.subspaces.size() != specs.size())
      throw InputError("expected " + std::to_string(specs.size()) + " subspace files, got " +
                       std::to_string(opts.subspaces.size()));
    for (const auto& p : opts.subspaces) {
      subs.push_back(load_subspace(p));
      if (subs.back().dofs() != scene.mesh.dofs()) throw InputError(p.string() + ": subspace does not match the mesh");
    }
    return subs;
  }
  for (auto& b : build_components(config, scene, opts.seed)) subs.push_back(std::move(b.subspace));
  return subs;
}

Vec3 rest_vertex(const Scene& scene, Index v) {
  if (v < 0 || v >= scene.mesh.num_vertices()) throw InputError("vertex " + std::to_string(v) + " out of range");
  return scene.mesh.vertex(v);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationFailure*>(&e)) return kExitValidation;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  if (dynamic_cast<const InputError*>(&e)) return kExitInput;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return kExitInput;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitInput;
  return 1;
}

Vec gravity_force(const Scene& scene, const Vec3& gravity) {
  Vec f(scene.mesh.dofs());
  for (Index v = 0; v < scene.mesh.num_vertices(); ++v) f.segment<3>(3 * v) = gravity;
  return scene.ops.free_mask().cwiseProduct(scene.ops.mass().cwiseProduct(f));
}

Subspace build_for_spec(const Scene& scene, const ForcePrior& prior, Index m, const SubspaceSpec& spec,
                        std::uint64_t seed) {
  BuildOptions bo;
  bo.keep_mean = spec.keep_mean;
  bo.eigen.tolerance = spec.tolerance;
  bo.eigen.max_iterations = spec.max_iterations;
  bo.eigen.extra_block = spec.extra_block;
  bo.eigen.seed = 0x5eed ^ seed;
  Subspace sub;
  if (spec.skinning) {
    sub = lbs_basis(scene.mesh, scene.ops, scalarize_skinning(scene.ops, prior, m, bo));
  } else if (spec.path == "diagonal") {
    sub = build_diagonal(scene.ops, prior, m, bo);
  } else if (spec.path == "lowrank") {
    sub = build_lowrank(scene.ops, prior, m, bo);
  } else if (spec.path == "greens") {
    if (prior.is_diagonal()) throw InputError("the greens path needs a low-rank prior");
    sub = greens_subspace(scene.ops, prior.lowrank().factor);
  } else {
    sub = build_subspace(scene.ops, prior, m, bo);
  }
  sub.prior_label = prior.label();
  return sub;
}

std::vector<ComponentBuild> build_components(const SceneConfig& config, const Scene& scene, std::uint64_t seed) {
  std::vector<ComponentBuild> out;
  const auto specs = component_specs(config);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    ForcePrior prior = make_prior(specs[k], scene);
    Subspace sub;
    try {
      sub = build_for_spec(scene, prior, component_modes(config, static_cast<Index>(k)), config.subspace, seed);
    } catch (const InputError& e) {
      throw InputError("component " + std::to_string(k) + " (" + prior.label() + "): " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError("component " + std::to_string(k) + " (" + prior.label() + "): " + e.what());
    }
    out.push_back(ComponentBuild{prior.masked(scene.ops.free_mask()), std::move(sub), seconds_since(t0)});
  }
  return out;
}

SimulationRun simulate_scene(const SceneConfig& config, const Scene& scene, const std::vector<Subspace>& subspaces,
                             const std::vector<ForcePrior>& priors) {
  if (subspaces.empty()) throw InputError("simulation needs at least one subspace");
  const SimulationSpec& sim_spec = config.simulation;
  const Schedule schedule = sim_spec.schedule.value_or(Schedule{});
  const int steps = sim_spec.steps > 0 ? sim_spec.steps : schedule.steps;
  const Index nv = scene.mesh.num_vertices();

  StepSettings settings;
  settings.timestep = sim_spec.timestep;
  settings.mass_damping = sim_spec.mass_damping;
  settings.stiffness_damping = sim_spec.stiffness_damping;
  settings.newton.max_iterations = sim_spec.max_iterations;

  std::optional<MixtureModel> mixture;
  ComponentSelector selector(config.mixture ? config.mixture->hysteresis : HysteresisOptions{});
  if (subspaces.size() > 1) {
    MixtureOptions mo;
    if (config.mixture) mo.marginal_limit = config.mixture->marginal_limit;
    mixture.emplace(priors, Eigen::Map<const Vec>(component_weights(config).data(), static_cast<Index>(priors.size())),
                    subspaces, mo);
  }

  ReducedSimulator sim(scene.ops, subspaces.front(), settings);
  const Vec gravity = gravity_force(scene, sim_spec.gravity);
  Vec loads = Vec::Zero(scene.mesh.dofs());
  sim.set_constant_force(gravity);

  Index max_modes = 0;
  for (const auto& s : subspaces) max_modes = std::max(max_modes, s.modes());
  Mat time(steps, 1), component(steps, 1), iterations(steps, 1), modes(steps, 1);
  Mat reduced = Mat::Zero(steps, max_modes);
  Mat positions;
  if (sim_spec.record_positions) positions.resize(steps, scene.mesh.dofs());

  SimulationRun run;
  std::size_t next_event = 0;
  for (int step = 0; step < steps; ++step) {
    bool loads_changed = false;
    while (next_event < schedule.events.size() && schedule.events[next_event].step <= step) {
      const ScheduleEvent& e = schedule.events[next_event++];
      switch (e.kind) {
        case ScheduleEvent::Kind::load:
          for (Index v : e.vertices.resolve(scene.mesh)) loads.segment<3>(3 * v) += e.force;
          loads_changed = true;
          break;
        case ScheduleEvent::Kind::clear_loads:
          loads.setZero();
          loads_changed = true;
          break;
        case ScheduleEvent::Kind::assign:
          if (e.vertex >= nv) throw InputError("schedule assigns out-of-range vertex " + std::to_string(e.vertex));
          sim.assign_handle(e.vertex, e.strength.value_or(sim_spec.handle_strength));
          break;
        case ScheduleEvent::Kind::move:
          sim.move_handle(e.vertex, e.target - rest_vertex(scene, e.vertex));
          break;
        case ScheduleEvent::Kind::release:
          sim.release_handle(e.vertex);
          break;
      }
    }
    if (loads_changed) sim.set_constant_force(gravity + scene.ops.free_mask().cwiseProduct(loads));

    if (mixture) {
      ForceObservation obs;
      if (!sim.handle_vertices().empty()) {
        obs = sim.handle_observation();
      } else {
        for (Index v = 0; v < nv; ++v) {
          if (loads.segment<3>(3 * v).squaredNorm() > 0.0) obs.support.push_back(v);
        }
        obs.values.resize(3 * static_cast<Index>(obs.support.size()));
        for (std::size_t i = 0; i < obs.support.size(); ++i)
          obs.values.segment<3>(3 * static_cast<Index>(i)) = loads.segment<3>(3 * obs.support[i]);
      }
      if (!obs.support.empty() && selector.update(mixture->log_posterior(obs))) {
        spdlog::info("step {}: switching to component {} ({})", step, selector.active(),
                     priors[static_cast<std::size_t>(selector.active())].label());
        sim.set_subspace(subspaces[static_cast<std::size_t>(selector.active())]);
      }
    }

    const int its = sim.step();
    const auto& st = sim.state();
    time(step, 0) = st.time;
    component(step, 0) = static_cast<double>(selector.active());
    iterations(step, 0) = its;
    modes(step, 0) = static_cast<double>(st.z.size());
    reduced.row(step).head(st.z.size()) = st.z.transpose();
    if (sim_spec.record_positions) positions.row(step) = sim.displacement().transpose();
    run.components.push_back(selector.active());
    run.iterations.push_back(its);
    spdlog::debug("step {} component {} newton {}", step, selector.active(), its);
  }

  Container& c = run.trajectory;
  c.metadata["kind"] = "trajectory";
  c.metadata["version"] = "1";
  c.metadata["steps"] = std::to_string(steps);
  c.metadata["dofs"] = std::to_string(scene.mesh.dofs());
  c.metadata["components"] = std::to_string(subspaces.size());
  c.metadata["timestep"] = std::to_string(sim_spec.timestep);
  c.arrays.emplace_back("time", time);
  c.arrays.emplace_back("component", component);
  c.arrays.emplace_back("iterations", iterations);
  c.arrays.emplace_back("modes", modes);
  c.arrays.emplace_back("reduced", reduced);
  if (sim_spec.record_positions) c.arrays.emplace_back("positions", positions);
  return run;
}

int run_build(const CommandOptions& opts) {
  prepare(opts);
  const SceneConfig config = load_config(opts.config);
  const auto t0 = std::chrono::steady_clock::now();
  const Scene scene = load_scene(config);
  const double setup = seconds_since(t0);
  const auto builds = build_components(config, scene, opts.seed);

  const auto weights = component_weights(config);
  json manifest;
  manifest["schema_version"] = kSchemaVersion;
  manifest["dofs"] = scene.mesh.dofs();
  manifest["components"] = json::array();
  std::ofstream report = open_out(opts.out / "build_report.txt");
  report << "mesh vertices=" << scene.mesh.num_vertices() << " tets=" << scene.mesh.num_tets()
         << " pins=" << scene.pins.size() << " regularization=" << scene.ops.regularization() << "\n";
  report << "[timing] setup_seconds=" << setup << "\n";
  for (std::size_t k = 0; k < builds.size(); ++k) {
    const Subspace& sub = builds[k].subspace;
    const std::string file = "component_" + std::to_string(k) + ".fdm";
    save_subspace(opts.out / file, sub);
    const double orth = mass_orthonormality_error(sub.basis, scene.ops.mass());
    report << "component " << k << " label=" << sub.prior_label << " path=" << to_string(sub.path)
           << " modes=" << sub.modes() << " weight=" << weights[k] << "\n";
    report << "  eigenvalues:";
    for (Index i = 0; i < sub.eigenvalues.size(); ++i) report << " " << sub.eigenvalues(i);
    report << "\n  mass_orthonormality_residual=" << orth << "\n";
    report << "  [timing] build_seconds=" << builds[k].seconds << "\n";
    manifest["components"].push_back({{"index", k},
                                      {"file", file},
                                      {"label", sub.prior_label},
                                      {"path", to_string(sub.path)},
                                      {"modes", sub.modes()},
                                      {"weight", weights[k]}});
    spdlog::info("component {} ({}): {} modes via {}, orthonormality {:.3e}", k, sub.prior_label, sub.modes(),
                 to_string(sub.path), orth);
  }
  if (config.mixture) {
    const auto& h = config.mixture->hysteresis;
    manifest["hysteresis"] = {{"enabled", h.enabled}, {"margin", h.margin}, {"count", h.count}};
  }
  open_out(opts.out / "manifest.json") << manifest.dump(2) << "\n";
  return kExitOk;
}

int run_simulate(const CommandOptions& opts) {
  prepare(opts);
  const SceneConfig config = load_config(opts.config);
  const Scene scene = load_scene(config);
  std::vector<ForcePrior> priors;
  const auto subs = load_or_build(opts, config, scene, priors);
  const SimulationRun run = simulate_scene(config, scene, subs, priors);
  write_container(opts.out / "trajectory.fdm", run.trajectory);

  std::ofstream csv = open_out(opts.out / "trajectory.csv");
  csv << "step,time,component,newton_iterations,max_displacement\n";
  const Mat& time = run.trajectory.array("time");
  const Mat& reduced = run.trajectory.array("reduced");
  const Mat& modes = run.trajectory.array("modes");
  for (Index s = 0; s < time.rows(); ++s) {
    const Subspace& sub = subs[static_cast<std::size_t>(run.components[static_cast<std::size_t>(s)])];
    const Index m = static_cast<Index>(modes(s, 0));
    const Vec u = reconstruct(sub, reduced.row(s).head(m).transpose());
    double umax = 0.0;
    for (Index v = 0; v < scene.mesh.num_vertices(); ++v) umax = std::max(umax, u.segment<3>(3 * v).norm());
    csv << s << "," << time(s, 0) << "," << run.components[static_cast<std::size_t>(s)] << ","
        << run.iterations[static_cast<std::size_t>(s)] << "," << umax << "\n";
  }
  spdlog::info("wrote {} steps to {}", time.rows(), (opts.out / "trajectory.fdm").string());
  return kExitOk;
}

namespace {

struct Check {
  std::string name;
  double value;
  double threshold;
  bool pass;
  std::string note;
};

Index farthest_vertex(const Scene& scene) {
  Vec3 anchor = Vec3::Zero();
  if (!scene.pins.empty()) {
    for (Index p : scene.pins) anchor += scene.mesh.vertex(p);
    anchor /= static_cast<double>(scene.pins.size());
  } else {
    anchor = scene.mesh.vertices().colwise().mean().transpose();
  }
  Index best = 0;
  double best_d = -1.0;
  for (Index v = 0; v < scene.mesh.num_vertices(); ++v) {
    const double d = (scene.mesh.vertex(v) - anchor).squaredNorm();
    if (d > best_d) {
      best_d = d;
      best = v;
    }
  }
  return best;
}

}  // namespace

int run_validate(const CommandOptions& opts) {
  prepare(opts);
  const SceneConfig config = load_config(opts.config);
  const Scene scene = load_scene(config);
  const ValidationSpec& vs = config.validation;
  if (scene.mesh.dofs() > vs.dense_limit)
    throw InputError("validate needs an oracle-scale mesh: " + std::to_string(scene.mesh.dofs()) +
                     " coordinates exceed the dense limit " + std::to_string(vs.dense_limit));
  const SystemOperators& ops = scene.ops;
  std::vector<Check> checks;
  const auto add = [&](std::string name, double value, double threshold, bool pass, std::string note = {}) {
    checks.push_back(Check{std::move(name), value, threshold, pass, std::move(note)});
  };

  // Built or supplied subspaces.
  std::vector<ComponentBuild> builds;
  if (!opts.subspaces.empty()) {
    for (const auto& p : opts.subspaces) {
      const Subspace sub = load_subspace(p);
      if (sub.dofs() != scene.mesh.dofs()) throw InputError(p.string() + ": subspace does not match the mesh");
      const double orth = mass_orthonormality_error(sub.basis, ops.mass());
      add("orthonormality:" + p.filename().string(), orth, 1e-8, orth <= 1e-8);
    }
  }
  builds = build_components(config, scene, opts.seed);
  const auto again = build_components(config, scene, opts.seed);
  for (std::size_t k = 0; k < builds.size(); ++k) {
    const Subspace& sub = builds[k].subspace;
    const double orth = mass_orthonormality_error(sub.basis, ops.mass());
    add("orthonormality:component_" + std::to_string(k), orth, 1e-8, orth <= 1e-8);
    const bool same = sub.basis == again[k].subspace.basis && sub.eigenvalues == again[k].subspace.eigenvalues &&
                      sub.mean == again[k].subspace.mean;
    add("determinism:component_" + std::to_string(k), same ? 0.0 : 1.0, 0.0, same);
  }

  // LMA equivalence and Green's containment.
  const Index free = static_cast<Index>((ops.free_mask().array() > 0.0).count());
  const Index lma_m = std::min<Index>(10, free);
  {
    const Subspace modal = dense_modal_basis(ops, lma_m, vs.dense_limit);
    const Subspace diag = build_diagonal(ops, lma_prior(ops), lma_m);
    const double angle = principal_angles(modal.basis, diag.basis, ops.mass()).max_angle();
    add("lma_equivalence_max_angle", angle, 1e-6, angle < 1e-6);
  }
  const Index load_vertex = vs.load_vertices ? vs.load_vertices->resolve(scene.mesh).front() : farthest_vertex(scene);
  std::vector<ForcePrior> lowrank;
  for (const auto& b : builds)
    if (!b.prior.is_diagonal()) lowrank.push_back(b.prior);
  if (lowrank.empty()) lowrank.push_back(handle_prior(ops, HandleSet{{load_vertex}, 1.0}));
  for (std::size_t i = 0; i < lowrank.size(); ++i) {
    const Index r = lowrank[i].lowrank().factor.cols();
    const Mat g = ops.solve_columns(lowrank[i].lowrank().factor);
    double worst = 0.0;
    for (Index m = 1; m <= std::min<Index>(r, vs.max_modes); ++m)
      worst = std::max(worst, projection_residuals(g, build_lowrank(ops, lowrank[i], m).basis, ops.mass()).maxCoeff());
    add("greens_containment:" + lowrank[i].label(), worst, 1e-8, worst < 1e-8);
  }

  // Closed-form optimality of the first component.
  const ForcePrior& prior0 = builds.front().prior;
  const DenseModel model = DenseModel::build(ops, prior0, vs.dense_limit);
  {
    const Subspace& sub = builds.front().subspace;
    const double expected = expected_reconstruction_error(model, sub.basis);
    const double discarded = model.spectrum().tail(model.dofs() - sub.modes()).sum();
    const double scale = std::max(model.spectrum().sum(), 1e-300);
    const double gap = std::abs(expected - discarded) / scale;
    add("optimality_relative_gap", gap, 1e-8, sub.path == BuildPath::skinning || gap <= 1e-8,
        sub.path == BuildPath::skinning ? "skinning basis is not the optimal basis; reported only" : "");
  }

  // PCA convergence.
  {
    const Index m = std::min<Index>(vs.pca_modes.value_or(std::min<Index>(builds.front().subspace.modes(), 10)),
                                    builds.front().subspace.modes());
    const Subspace ref = dense_optimal_basis(model, m);
    std::ofstream csv = open_out(opts.out / "pca_alignment.csv");
    csv << "samples,mean_max_angle\n";
    double prev = std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (Index count : vs.pca_samples) {
      double total = 0.0;
      for (int s = 0; s < vs.pca_seeds; ++s) {
        const Subspace pca = pca_from_samples(ops, prior0, m, count, opts.seed * 1000003ULL + static_cast<std::uint64_t>(s));
        total += principal_angles(ref.basis, pca.basis, ops.mass()).max_angle();
      }
      const double mean = total / vs.pca_seeds;
      csv << count << "," << mean << "\n";
      monotone = monotone && mean <= prev;
      prev = mean;
    }
    add("pca_alignment_monotone", monotone ? 0.0 : 1.0, 0.0, monotone);
  }

  // Error against mode count, nested truncations of one build.
  ExternalLoad load;
  load.force = Vec::Zero(scene.mesh.dofs());
  load.force.segment<3>(3 * load_vertex) = vs.load_force;
  {
    const Index mmax = std::min<Index>(vs.max_modes, free);
    const Subspace full = build_for_spec(scene, prior0, mmax, SubspaceSpec{mmax, "auto"}, opts.seed);
    const Subspace lma = build_diagonal(ops, lma_prior(ops), mmax);
    std::ofstream csv = open_out(opts.out / "error_vs_modes.csv");
    csv << "modes,prior_error,lma_error\n";
    double prev_p = std::numeric_limits<double>::infinity(), prev_l = prev_p;
    bool monotone = true;
    for (Index m = 1; m <= std::min(full.modes(), lma.modes()); ++m) {
      Subspace a = full, b = lma;
      a.basis = full.basis.leftCols(m);
      a.eigenvalues = full.eigenvalues.head(m);
      b.basis = lma.basis.leftCols(m);
      b.eigenvalues = lma.eigenvalues.head(m);
      const double ep = reconstruction_error(a, ops, load);
      const double el = reconstruction_error(b, ops, load);
      csv << m << "," << ep << "," << el << "\n";
      const double tol = 1e-12 * std::max(1.0, std::abs(prev_l));
      monotone = monotone && ep <= prev_p * (1.0 + 1e-9) + 1e-30 && el <= prev_l + tol;
      prev_p = ep;
      prev_l = el;
    }
    add("error_vs_modes_monotone", monotone ? 0.0 : 1.0, 0.0, monotone);
  }

  // Localization ablation.
  {
    const Index m = std::min<Index>(vs.ablation_modes, free);
    const double lma_error = reconstruction_error(build_diagonal(ops, lma_prior(ops), m), ops, load);
    std::ofstream csv = open_out(opts.out / "error_vs_radius.csv");
    csv << "radius,modes,localized_error,lma_error,ratio\n";
    std::vector<double> radii = vs.radii;
    std::sort(radii.begin(), radii.end());
    double tight_ratio = 0.0;
    for (std::size_t i = 0; i < radii.size(); ++i) {
      const Vec w = radial_decay_weights(scene.mesh, scene.mesh.vertex(load_vertex), radii[i], vs.alpha);
      const double e = reconstruction_error(build_diagonal(ops, painted_prior(scene.mesh, ops, w), m), ops, load);
      const double ratio = lma_error / std::max(e, 1e-300);
      if (i == 0) tight_ratio = ratio;
      csv << radii[i] << "," << m << "," << e << "," << lma_error << "," << ratio << "\n";
    }
    if (!radii.empty()) add("localization_ratio_tightest_radius", tight_ratio, 10.0, tight_ratio >= 10.0);
  }

  std::ofstream report = open_out(opts.out / "validation_report.txt");
  bool ok = true;
  for (const auto& c : checks) {
    report << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " threshold=" << c.threshold;
    if (!c.note.empty()) report << " note=" << c.note;
    report << "\n";
    spdlog::log(c.pass ? spdlog::level::info : spdlog::level::err, "{} {} value={:.3e} threshold={:.3e}",
                c.pass ? "PASS" : "FAIL", c.name, c.value, c.threshold);
    ok = ok && c.pass;
  }
  return ok ? kExitOk : kExitValidation;
}

void write_surface_obj(const fs::path& path, const TetMesh& mesh, const Vec& displacement) {
  if (displacement.size() != mesh.dofs()) throw InputError("displacement does not match the mesh");
  std::ofstream out = open_out(path);
  const auto& sv = mesh.surface_vertices();
  std::vector<Index> local(static_cast<std::size_t>(mesh.num_vertices()), -1);
  for (std::size_t i = 0; i < sv.size(); ++i) {
    local[static_cast<std::size_t>(sv[i])] = static_cast<Index>(i);
    const Vec3 x = mesh.vertex(sv[i]) + displacement.segment<3>(3 * sv[i]);
    out << "v " << x.x() << " " << x.y() << " " << x.z() << "\n";
  }
  const auto& tris = mesh.surface();
  for (Index f = 0; f < tris.rows(); ++f)
    out << "f " << local[static_cast<std::size_t>(tris(f, 0))] + 1 << " " << local[static_cast<std::size_t>(tris(f, 1))] + 1
        << " " << local[static_cast<std::size_t>(tris(f, 2))] + 1 << "\n";
}

int run_export_obj(const CommandOptions& opts) {
  prepare(opts);
  if (opts.every < 1) throw InputError("--every must be at least 1");
  const SceneConfig config = load_config(opts.config);
  const Scene scene = load_scene(config);
  if (opts.trajectory.empty()) {
    write_surface_obj(opts.out / "rest.obj", scene.mesh, Vec::Zero(scene.mesh.dofs()));
    return kExitOk;
  }
  const Container traj = read_container(opts.trajectory);
  if (traj.meta("kind") != "trajectory") throw InputError(opts.trajectory.string() + " is not a trajectory");
  const Index steps = traj.array("time").rows();
  std::vector<Subspace> subs;
  if (!traj.has_array("positions")) {
    std::vector<ForcePrior> priors;
    subs = load_or_build(opts, config, scene, priors);
  }
  const Mat& component = traj.array("component");
  const Mat& modes = traj.array("modes");
  const Mat& reduced = traj.array("reduced");
  Index written = 0;
  for (Index s = 0; s < steps; s += opts.every) {
    Vec u;
    if (traj.has_array("positions")) {
      u = traj.array("positions").row(s).transpose();
    } else {
      const auto k = static_cast<std::size_t>(component(s, 0));
      if (k >= subs.size()) throw InputError("trajectory references a missing component");
      u = reconstruct(subs[k], reduced.row(s).head(static_cast<Index>(modes(s, 0))).transpose());
    }
    std::ostringstream name;
    name << "frame_" << std::setw(5) << std::setfill('0') << s << ".obj";
    write_surface_obj(opts.out / name.str(), scene.mesh, u);
    ++written;
  }
  spdlog::info("wrote {} OBJ frames to {}", written, opts.out.string());
  return kExitOk;
}

}  // namespace fdm
