#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>

#include "fdm/commands.hpp"
#ifdef FDM_HAVE_SERVICE
#include "fdm/live_service.hpp"
#endif

namespace {

void add_common(CLI::App* cmd, fdm::CommandOptions& opts) {
  cmd->add_option("--config", opts.config, "scene config (JSON)")->required();
  cmd->add_option("--seed", opts.seed, "seed for randomized start blocks and sampling");
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--threads", opts.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--verbose,-v", opts.verbose, "debug logging");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Force-distribution subspace builder, simulator and live service"};
  app.require_subcommand(1);
  fdm::CommandOptions opts;

  auto* build = app.add_subcommand("build", "build one subspace per prior component");
  add_common(build, opts);

  auto* simulate = app.add_subcommand("simulate", "run the scheduled reduced simulation");
  add_common(simulate, opts);
  simulate->add_option("--subspace", opts.subspaces, "prebuilt subspace containers, one per component");

  auto* validate = app.add_subcommand("validate", "run the dense oracle checks on an oracle-scale scene");
  add_common(validate, opts);
  validate->add_option("--subspace", opts.subspaces, "subspace containers to check for orthonormality");

  auto* serve = app.add_subcommand("serve", "host a live WebSocket session");
  add_common(serve, opts);
  serve->add_option("--subspace", opts.subspaces, "prebuilt subspace containers, one per component");

  auto* export_obj = app.add_subcommand("export-obj", "write surface OBJ files per trajectory frame");
  add_common(export_obj, opts);
  export_obj->add_option("--trajectory", opts.trajectory, "trajectory container from simulate");
  export_obj->add_option("--subspace", opts.subspaces, "subspaces used by the trajectory");
  export_obj->add_option("--every", opts.every, "write every k-th frame")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fdm::kExitInput;
  }

  try {
    if (*build) return fdm::run_build(opts);
    if (*simulate) return fdm::run_simulate(opts);
    if (*validate) return fdm::run_validate(opts);
    if (*export_obj) return fdm::run_export_obj(opts);
    if (*serve) {
#ifdef FDM_HAVE_SERVICE
      return fdm::run_serve(opts);
#else
      throw fdm::InputError("this build has no live service (configure with FDM_BUILD_SERVICE=ON)");
#endif
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return fdm::exit_code_for(e);
  }
  return 0;
}
