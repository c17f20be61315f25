#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fdm/mixture.hpp"
#include "fdm/reduced_sim.hpp"

namespace fdm {

inline constexpr int kSchemaVersion = 1;

/// Explicit ids, an axis-aligned box, or the vertex nearest to a point.
struct VertexSelector {
  std::vector<Index> ids;
  std::optional<std::pair<Vec3, Vec3>> box;
  std::optional<Vec3> nearest;
  bool surface_only = false;

  std::vector<Index> resolve(const TetMesh& mesh) const;
};

struct MeshSpec {
  std::filesystem::path path;
  MeshFormat format = MeshFormat::tetgen;
  std::string generator;  // box | bear_proxy | bat_proxy; empty when loading a file
  std::array<int, 3> cells{1, 1, 1};
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();
  int resolution = 1;
};

struct ActuationSpec {
  std::optional<Vec> mean;
  std::optional<Mat> covariance;
};

enum class PriorType { lma, painted, handle, contact, pneumatic, muscle, spring };

struct PriorSpec {
  PriorType type = PriorType::lma;
  std::string label;
  double scale = 1.0;
  ActuationSpec actuation;
  // painted
  std::optional<std::filesystem::path> weights_path;
  std::optional<Vec3> radial_center;
  double radial_radius = 0.0;
  double radial_alpha = 10.0;
  std::optional<VertexSelector> region;
  // handle
  VertexSelector vertices;
  double strength = 1.0;
  // contact
  struct Patch {
    Vec3 center;
    double radius;
    Vec3 normal;
  };
  std::vector<Patch> patches;
  bool normalize_weights = false;
  // pneumatic
  std::vector<VertexSelector> pockets;
  // muscle
  struct Fiber {
    std::vector<Index> elements;
    bool all_elements = false;
    Vec3 direction;
  };
  std::vector<Fiber> fibers;
  // spring
  std::vector<std::pair<Index, Index>> edges;
};

struct SubspaceSpec {
  Index modes = 10;
  std::string path = "auto";  // auto | diagonal | lowrank | greens
  bool skinning = false;
  bool keep_mean = true;
  double tolerance = 1e-10;
  int max_iterations = 300;
  int extra_block = 8;
};

struct MixtureSpec {
  std::vector<PriorSpec> components;
  std::vector<std::optional<Index>> modes;  // per-component override
  std::vector<double> weights;
  HysteresisOptions hysteresis;
  Index marginal_limit = 3072;
};

struct ScheduleEvent {
  enum class Kind { load, clear_loads, assign, move, release } kind = Kind::load;
  int step = 0;
  VertexSelector vertices;  // load
  Vec3 force = Vec3::Zero();
  Index vertex = -1;        // handle events
  Vec3 target = Vec3::Zero();  // absolute position
  std::optional<double> strength;
};

struct Schedule {
  int steps = 0;
  std::vector<ScheduleEvent> events;  // sorted by step, stable
};

struct SimulationSpec {
  double timestep = 1.0 / 60.0;
  int steps = 0;  // overrides the schedule when > 0
  double mass_damping = 0.0;
  double stiffness_damping = 0.0;
  Vec3 gravity = Vec3::Zero();
  int max_iterations = 10;
  double handle_strength = 1.0;
  bool record_positions = false;
  std::optional<Schedule> schedule;
};

struct ServiceSpec {
  std::string host = "127.0.0.1";
  unsigned short port = 8765;
  double frame_rate = 60.0;
  std::optional<double> handle_strength;
};

struct ValidationSpec {
  std::vector<Index> pca_samples{50, 200, 1000};
  int pca_seeds = 3;
  std::optional<Index> pca_modes;
  Index max_modes = 20;
  std::optional<VertexSelector> load_vertices;
  Vec3 load_force = Vec3(0.0, -1.0, 0.0);
  std::vector<double> radii{0.1, 0.2, 0.4};
  double alpha = 10.0;
  Index ablation_modes = 10;
  Index dense_limit = 600;
};

struct SceneConfig {
  std::filesystem::path base_dir;
  MeshSpec mesh;
  MaterialParams material;
  std::vector<Index> pin_ids;
  std::vector<std::pair<Vec3, Vec3>> pin_boxes;
  std::optional<double> regularization;
  std::optional<PriorSpec> prior;
  std::optional<MixtureSpec> mixture;
  SubspaceSpec subspace;
  SimulationSpec simulation;
  ServiceSpec service;
  ValidationSpec validation;
};

/// Parses and validates a scene; relative paths resolve against `base_dir`.
/// Unknown keys, a wrong schema_version and missing files are InputErrors.
SceneConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
SceneConfig load_config(const std::filesystem::path& path);
Schedule parse_schedule(const nlohmann::json& j);

/// Mesh, material, pins and factorized operators for a config.
struct Scene {
  TetMesh mesh;
  MaterialParams material;
  std::vector<Index> pins;
  SystemOperators ops;
};

Scene load_scene(const SceneConfig& config);
ForcePrior make_prior(const PriorSpec& spec, const Scene& scene);

/// One prior per component (a single prior counts as one component).
std::vector<PriorSpec> component_specs(const SceneConfig& config);
std::vector<double> component_weights(const SceneConfig& config);
Index component_modes(const SceneConfig& config, Index k);

/// Reads one non-negative scalar per vertex: one value per line, or the
/// last comma-separated column.
Vec read_scalar_column(const std::filesystem::path& path, Index expected);

}  // namespace fdm
