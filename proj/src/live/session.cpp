#include <spdlog/spdlog.h>

#include "fdm/live_service.hpp"

namespace fdm {

using nlohmann::json;

SessionSetup make_session_setup(const SceneConfig& config, const Scene& scene,
                                const std::vector<std::filesystem::path>& subspace_files, std::uint64_t seed) {
  const auto specs = component_specs(config);
  std::vector<Subspace> subs;
  std::vector<ForcePrior> priors;
  if (!subspace_files.empty()) {
    if (subspace_files.size() != specs.size())
      throw InputError("expected " + std::to_string(specs.size()) + " subspace files, got " +
                       std::to_string(subspace_files.size()));
    for (const auto& s : specs) priors.push_back(make_prior(s, scene).masked(scene.ops.free_mask()));
    for (const auto& p : subspace_files) {
      subs.push_back(load_subspace(p));
      if (subs.back().dofs() != scene.mesh.dofs()) throw InputError(p.string() + ": subspace does not match the mesh");
    }
  } else {
    for (auto& b : build_components(config, scene, seed)) {
      priors.push_back(std::move(b.prior));
      subs.push_back(std::move(b.subspace));
    }
  }
  const auto w = component_weights(config);
  SessionSetup setup{scene.mesh,
                     scene.ops,
                     std::move(subs),
                     std::move(priors),
                     Eigen::Map<const Vec>(w.data(), static_cast<Index>(w.size())),
                     config.mixture ? config.mixture->hysteresis : HysteresisOptions{},
                     MixtureOptions{},
                     StepSettings{},
                     gravity_force(scene, config.simulation.gravity),
                     config.service.handle_strength.value_or(config.simulation.handle_strength)};
  if (config.mixture) setup.mixture.marginal_limit = config.mixture->marginal_limit;
  setup.settings.timestep = config.simulation.timestep;
  setup.settings.mass_damping = config.simulation.mass_damping;
  setup.settings.stiffness_damping = config.simulation.stiffness_damping;
  setup.settings.newton.max_iterations = config.simulation.max_iterations;
  return setup;
}

LiveSession::LiveSession(SessionSetup setup)
    : setup_(std::move(setup)),
      selector_(setup_.hysteresis),
      sim_(setup_.ops, setup_.subspaces.at(0), setup_.settings) {
  if (setup_.subspaces.size() > 1) {
    mixture_.emplace(setup_.priors, setup_.weights, setup_.subspaces, setup_.mixture);
  }
  if (setup_.constant_force.size() == setup_.mesh.dofs()) sim_.set_constant_force(setup_.constant_force);
}

std::string LiveSession::init_message() const {
  const TetMesh& mesh = setup_.mesh;
  const auto& sv = mesh.surface_vertices();
  std::vector<Index> local(static_cast<std::size_t>(mesh.num_vertices()), -1);
  json rest = json::array();
  for (std::size_t i = 0; i < sv.size(); ++i) {
    local[static_cast<std::size_t>(sv[i])] = static_cast<Index>(i);
    const Vec3 x = mesh.vertex(sv[i]);
    rest.push_back(x.x());
    rest.push_back(x.y());
    rest.push_back(x.z());
  }
  json tris = json::array();
  for (Index f = 0; f < mesh.surface().rows(); ++f)
    for (int c = 0; c < 3; ++c) tris.push_back(local[static_cast<std::size_t>(mesh.surface()(f, c))]);
  json components = json::array();
  for (const auto& s : setup_.subspaces) components.push_back({{"label", s.prior_label}, {"modes", s.modes()}});
  return json{{"type", "init"},
              {"protocol", kProtocolVersion},
              {"num_vertices", mesh.num_vertices()},
              {"surface_vertices", sv},
              {"triangles", tris},
              {"rest_positions", rest},
              {"components", components},
              {"active", selector_.active()},
              {"timestep", setup_.settings.timestep}}
      .dump();
}

void LiveSession::apply(const HandleEvent& e, std::vector<Reply>& replies) {
  const auto error = [&](const std::string& what) {
    replies.push_back({e.client, json{{"type", "error"}, {"message", what}}.dump()});
  };
  if (e.vertex < 0 || e.vertex >= setup_.mesh.num_vertices()) {
    error("vertex " + std::to_string(e.vertex) + " out of range");
    return;
  }
  const Vec3 rest = setup_.mesh.vertex(e.vertex);
  switch (e.kind) {
    case EventKind::assign:
      sim_.assign_handle(e.vertex, setup_.handle_strength);
      if (e.target) sim_.move_handle(e.vertex, *e.target - rest);
      break;
    case EventKind::move:
      if (!sim_.has_handle(e.vertex)) {
        error("move of unassigned handle " + std::to_string(e.vertex));
        return;
      }
      sim_.move_handle(e.vertex, *e.target - rest);
      break;
    case EventKind::release:
      if (!sim_.has_handle(e.vertex)) {
        error("release of unassigned handle " + std::to_string(e.vertex));
        return;
      }
      sim_.release_handle(e.vertex);
      break;
  }
  replies.push_back({e.client, json{{"type", "ack"}, {"event", event_name(e.kind)}, {"vertex", e.vertex}}.dump()});
}

FramePayload LiveSession::tick(const std::vector<HandleEvent>& events, std::vector<Reply>& replies) {
  for (const auto& e : events) apply(e, replies);
  if (mixture_ && !sim_.handle_vertices().empty()) {
    if (selector_.update(mixture_->log_posterior(sim_.handle_observation()))) {
      spdlog::info("frame {}: switching to component {} ({})", frame_id_, selector_.active(),
                   setup_.subspaces[static_cast<std::size_t>(selector_.active())].prior_label);
      sim_.set_subspace(setup_.subspaces[static_cast<std::size_t>(selector_.active())]);
    }
  }
  sim_.step();

  FramePayload f;
  f.frame_id = frame_id_++;
  f.component = static_cast<std::uint16_t>(selector_.active());
  const Vec& z = sim_.state().z;
  f.reduced.assign(z.data(), z.data() + z.size());
  const Vec u = sim_.displacement();
  const auto& sv = setup_.mesh.surface_vertices();
  f.positions.resize(3 * sv.size());
  for (std::size_t i = 0; i < sv.size(); ++i) {
    const Vec3 x = setup_.mesh.vertex(sv[i]) + u.segment<3>(3 * sv[i]);
    for (int c = 0; c < 3; ++c) f.positions[3 * i + static_cast<std::size_t>(c)] = static_cast<float>(x(c));
  }
  return f;
}

}  // namespace fdm
