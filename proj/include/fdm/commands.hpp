#pragma once

#include <cstdint>
#include <filesystem>

#include "fdm/config.hpp"
#include "fdm/container.hpp"

namespace fdm {

/// Raised when a validation threshold fails; maps to exit code 2.
class ValidationFailure : public Error {
 public:
  using Error::Error;
};

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitInput = 3, kExitNumerical = 4 };

/// Maps an exception thrown by a command to its exit code.
int exit_code_for(const std::exception& e);

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out = ".";
  std::uint64_t seed = 0;
  int threads = 1;
  bool verbose = false;
  std::vector<std::filesystem::path> subspaces;
  std::filesystem::path trajectory;
  int every = 1;
};

struct ComponentBuild {
  ForcePrior prior;
  Subspace subspace;
  double seconds = 0.0;
};

/// Builds the subspace for one prior according to the subspace section.
Subspace build_for_spec(const Scene& scene, const ForcePrior& prior, Index m, const SubspaceSpec& spec,
                        std::uint64_t seed);
std::vector<ComponentBuild> build_components(const SceneConfig& config, const Scene& scene, std::uint64_t seed);

struct SimulationRun {
  Container trajectory;
  std::vector<Index> components;  // active component per step
  std::vector<int> iterations;
};

/// Runs the scheduled simulation. With more than one component, the active
/// subspace follows Bayes selection on handle or load observations.
SimulationRun simulate_scene(const SceneConfig& config, const Scene& scene, const std::vector<Subspace>& subspaces,
                             const std::vector<ForcePrior>& priors);

/// Gravity M g on the free coordinates.
Vec gravity_force(const Scene& scene, const Vec3& gravity);

int run_build(const CommandOptions& opts);
int run_simulate(const CommandOptions& opts);
int run_validate(const CommandOptions& opts);
int run_export_obj(const CommandOptions& opts);

/// Surface triangles and positions (rest + displacement) as Wavefront OBJ.
void write_surface_obj(const std::filesystem::path& path, const TetMesh& mesh, const Vec& displacement);

}  // namespace fdm
