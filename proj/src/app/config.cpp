#include "fdm/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "fdm/shapes.hpp"

namespace fdm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Object reader that rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j.is_object()) throw InputError(context_ + ": expected an object");
  }
  ~Reader() = default;

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& at(const std::string& key) {
    if (!has(key)) throw InputError(context_ + ": missing required key '" + key + "'");
    return j_.at(key);
  }
  template <class T>
  T get(const std::string& key) {
    try {
      return at(key).get<T>();
    } catch (const json::exception& e) {
      throw InputError(context_ + "." + key + ": " + e.what());
    }
  }
  template <class T>
  T get(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }
  const std::string& context() const { return context_; }
  std::string child(const std::string& key) const { return context_ + "." + key; }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw InputError(context_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> used_;
};

Vec3 vec3(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3) throw InputError(ctx + ": expected a 3-vector");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) throw InputError(ctx + ": expected numbers");
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

Vec vector_of(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw InputError(ctx + ": expected an array");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError(ctx + ": expected numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

Mat matrix_of(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.empty()) throw InputError(ctx + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Mat m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const Vec row = vector_of(j[r], ctx);
    if (static_cast<std::size_t>(row.size()) != cols) throw InputError(ctx + ": ragged matrix");
    m.row(static_cast<Index>(r)) = row.transpose();
  }
  return m;
}

std::vector<Index> index_list(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw InputError(ctx + ": expected an array of vertex ids");
  std::vector<Index> out;
  for (const auto& e : j) {
    if (!e.is_number_integer() || e.get<long long>() < 0) throw InputError(ctx + ": expected non-negative integers");
    out.push_back(static_cast<Index>(e.get<long long>()));
  }
  return out;
}

std::pair<Vec3, Vec3> box_of(const json& j, const std::string& ctx) {
  Reader r(j, ctx);
  const Vec3 lo = vec3(r.at("lo"), r.child("lo"));
  const Vec3 hi = vec3(r.at("hi"), r.child("hi"));
  r.finish();
  if (!((hi - lo).array() >= 0.0).all()) throw InputError(ctx + ": box needs hi >= lo");
  return {lo, hi};
}

VertexSelector selector_of(const json& j, const std::string& ctx) {
  VertexSelector s;
  if (j.is_array()) {
    s.ids = index_list(j, ctx);
    if (s.ids.empty()) throw InputError(ctx + ": empty vertex list");
    return s;
  }
  Reader r(j, ctx);
  int kinds = 0;
  if (r.has("ids")) {
    s.ids = index_list(r.at("ids"), r.child("ids"));
    ++kinds;
  }
  if (r.has("box")) {
    s.box = box_of(r.at("box"), r.child("box"));
    ++kinds;
  }
  if (r.has("nearest")) {
    s.nearest = vec3(r.at("nearest"), r.child("nearest"));
    ++kinds;
  }
  s.surface_only = r.get<bool>("surface_only", false);
  r.finish();
  if (kinds != 1) throw InputError(ctx + ": give exactly one of ids, box, nearest");
  return s;
}

fs::path existing_file(const fs::path& base, const std::string& rel, const std::string& ctx) {
  fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
  if (!fs::exists(p)) throw InputError(ctx + ": file not found: " + p.string());
  return p;
}

ActuationSpec actuation_of(const json& j, const std::string& ctx) {
  Reader r(j, ctx);
  ActuationSpec a;
  if (r.has("mean")) a.mean = vector_of(r.at("mean"), r.child("mean"));
  if (r.has("covariance")) a.covariance = matrix_of(r.at("covariance"), r.child("covariance"));
  r.finish();
  return a;
}

PriorType prior_type(const std::string& s, const std::string& ctx) {
  static const std::map<std::string, PriorType> kTypes{
      {"lma", PriorType::lma},         {"painted", PriorType::painted}, {"handle", PriorType::handle},
      {"contact", PriorType::contact}, {"pneumatic", PriorType::pneumatic}, {"muscle", PriorType::muscle},
      {"spring", PriorType::spring}};
  const auto it = kTypes.find(s);
  if (it == kTypes.end()) throw InputError(ctx + ": unknown prior type '" + s + "'");
  return it->second;
}

PriorSpec prior_of(const json& j, const std::string& ctx, const fs::path& base) {
  Reader r(j, ctx);
  PriorSpec p;
  const std::string type = r.get<std::string>("type");
  p.type = prior_type(type, ctx);
  p.label = r.get<std::string>("label", type);
  p.scale = r.get<double>("scale", 1.0);
  if (!(p.scale > 0.0)) throw InputError(ctx + ".scale must be positive");
  const bool lowrank = p.type != PriorType::lma && p.type != PriorType::painted;
  if (lowrank && r.has("actuation")) p.actuation = actuation_of(r.at("actuation"), r.child("actuation"));

  switch (p.type) {
    case PriorType::lma:
      break;
    case PriorType::painted: {
      int kinds = 0;
      if (r.has("weights_path")) {
        p.weights_path = existing_file(base, r.get<std::string>("weights_path"), r.child("weights_path"));
        ++kinds;
      }
      if (r.has("radial")) {
        Reader rr(r.at("radial"), r.child("radial"));
        p.radial_center = vec3(rr.at("center"), rr.child("center"));
        p.radial_radius = rr.get<double>("radius");
        p.radial_alpha = rr.get<double>("alpha", 10.0);
        rr.finish();
        ++kinds;
      }
      if (r.has("region")) {
        p.region = selector_of(r.at("region"), r.child("region"));
        ++kinds;
      }
      if (kinds != 1) throw InputError(ctx + ": painted prior needs exactly one of weights_path, radial, region");
      break;
    }
    case PriorType::handle:
      p.vertices = selector_of(r.at("vertices"), r.child("vertices"));
      p.strength = r.get<double>("strength", 1.0);
      break;
    case PriorType::contact: {
      p.normalize_weights = r.get<bool>("normalize_weights", false);
      const json& patches = r.at("patches");
      if (!patches.is_array() || patches.empty()) throw InputError(ctx + ".patches: expected a non-empty array");
      for (std::size_t i = 0; i < patches.size(); ++i) {
        Reader pr(patches[i], r.child("patches[" + std::to_string(i) + "]"));
        PriorSpec::Patch patch{vec3(pr.at("center"), pr.child("center")), pr.get<double>("radius"),
                               vec3(pr.at("normal"), pr.child("normal"))};
        pr.finish();
        p.patches.push_back(patch);
      }
      break;
    }
    case PriorType::pneumatic: {
      const json& pockets = r.at("pockets");
      if (!pockets.is_array() || pockets.empty()) throw InputError(ctx + ".pockets: expected a non-empty array");
      for (std::size_t i = 0; i < pockets.size(); ++i)
        p.pockets.push_back(selector_of(pockets[i], r.child("pockets[" + std::to_string(i) + "]")));
      break;
    }
    case PriorType::muscle: {
      const json& fibers = r.at("fibers");
      if (!fibers.is_array() || fibers.empty()) throw InputError(ctx + ".fibers: expected a non-empty array");
      for (std::size_t i = 0; i < fibers.size(); ++i) {
        Reader fr(fibers[i], r.child("fibers[" + std::to_string(i) + "]"));
        PriorSpec::Fiber f;
        const json& el = fr.at("elements");
        if (el.is_string() && el.get<std::string>() == "all") {
          f.all_elements = true;
        } else {
          f.elements = index_list(el, fr.child("elements"));
        }
        f.direction = vec3(fr.at("direction"), fr.child("direction"));
        fr.finish();
        p.fibers.push_back(std::move(f));
      }
      break;
    }
    case PriorType::spring: {
      const json& edges = r.at("edges");
      if (!edges.is_array() || edges.empty()) throw InputError(ctx + ".edges: expected a non-empty array");
      for (const auto& e : edges) {
        const auto ids = index_list(e, r.child("edges"));
        if (ids.size() != 2) throw InputError(ctx + ".edges: each edge needs two vertex ids");
        p.edges.emplace_back(ids[0], ids[1]);
      }
      break;
    }
  }
  r.finish();
  return p;
}

ScheduleEvent event_of(const json& j, const std::string& ctx) {
  Reader r(j, ctx);
  ScheduleEvent e;
  e.step = r.get<int>("step");
  if (e.step < 0) throw InputError(ctx + ".step must be non-negative");
  const std::string type = r.get<std::string>("type");
  if (type == "load") {
    e.kind = ScheduleEvent::Kind::load;
    e.vertices = selector_of(r.at("vertices"), r.child("vertices"));
    e.force = vec3(r.at("force"), r.child("force"));
  } else if (type == "clear_loads") {
    e.kind = ScheduleEvent::Kind::clear_loads;
  } else if (type == "assign" || type == "move" || type == "release") {
    e.kind = type == "assign" ? ScheduleEvent::Kind::assign
             : type == "move" ? ScheduleEvent::Kind::move
                              : ScheduleEvent::Kind::release;
    const long long v = r.get<long long>("vertex");
    if (v < 0) throw InputError(ctx + ".vertex must be non-negative");
    e.vertex = static_cast<Index>(v);
    if (e.kind == ScheduleEvent::Kind::move) e.target = vec3(r.at("target"), r.child("target"));
    if (e.kind == ScheduleEvent::Kind::assign && r.has("strength")) e.strength = r.get<double>("strength");
  } else {
    throw InputError(ctx + ": unknown event type '" + type + "'");
  }
  r.finish();
  return e;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<Index> VertexSelector::resolve(const TetMesh& mesh) const {
  std::vector<Index> out;
  const auto allowed = [&](Index v) { return !surface_only || mesh.is_surface_vertex(v); };
  if (!ids.empty()) {
    for (Index v : ids) {
      if (v >= mesh.num_vertices()) throw InputError("vertex id " + std::to_string(v) + " out of range");
      if (allowed(v)) out.push_back(v);
    }
  } else if (box) {
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      const Vec3 x = mesh.vertex(v);
      const double tol = 1e-9 * std::max(1.0, (box->second - box->first).norm());
      if (((x - box->first).array() >= -tol).all() && ((box->second - x).array() >= -tol).all() && allowed(v))
        out.push_back(v);
    }
  } else if (nearest) {
    Index best = -1;
    double best_d = 0.0;
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      if (!allowed(v)) continue;
      const double d = (mesh.vertex(v) - *nearest).squaredNorm();
      if (best < 0 || d < best_d) {
        best = v;
        best_d = d;
      }
    }
    if (best >= 0) out.push_back(best);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw InputError("vertex selection is empty");
  return out;
}

Schedule parse_schedule(const json& j) {
  Reader r(j, "schedule");
  Schedule s;
  if (r.has("schema_version") && r.get<int>("schema_version") != kSchemaVersion)
    throw InputError("schedule: unsupported schema_version");
  s.steps = r.get<int>("steps");
  if (s.steps < 0) throw InputError("schedule.steps must be non-negative");
  if (r.has("events")) {
    const json& ev = r.at("events");
    if (!ev.is_array()) throw InputError("schedule.events: expected an array");
    for (std::size_t i = 0; i < ev.size(); ++i) s.events.push_back(event_of(ev[i], "schedule.events[" + std::to_string(i) + "]"));
  }
  r.finish();
  std::stable_sort(s.events.begin(), s.events.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
  // Handle events must refer to handles that exist at that point.
  std::set<Index> live;
  for (const auto& e : s.events) {
    switch (e.kind) {
      case ScheduleEvent::Kind::assign:
        live.insert(e.vertex);
        break;
      case ScheduleEvent::Kind::move:
        if (!live.count(e.vertex)) throw InputError("schedule moves unknown handle " + std::to_string(e.vertex));
        break;
      case ScheduleEvent::Kind::release:
        if (!live.erase(e.vertex)) throw InputError("schedule releases unknown handle " + std::to_string(e.vertex));
        break;
      default:
        break;
    }
  }
  return s;
}

SceneConfig parse_config(const json& j, const fs::path& base_dir) {
  Reader r(j, "config");
  SceneConfig c;
  c.base_dir = base_dir;
  const int version = r.get<int>("schema_version");
  if (version != kSchemaVersion)
    throw InputError("config: unsupported schema_version " + std::to_string(version) + " (expected 1)");

  {
    Reader m(r.at("mesh"), "mesh");
    if (m.has("path")) {
      c.mesh.path = existing_file(base_dir, m.get<std::string>("path"), "mesh.path");
      if (c.mesh.path.extension() == ".node" || c.mesh.path.extension() == ".ele") {
        // checked as a pair by the loader
      }
      c.mesh.format = parse_mesh_format(m.get<std::string>("format", c.mesh.path.extension() == ".msh" ? "gmsh" : "tetgen"));
    } else {
      c.mesh.generator = m.get<std::string>("generator");
      if (c.mesh.generator == "box") {
        const auto cells = m.get<std::vector<int>>("cells");
        if (cells.size() != 3) throw InputError("mesh.cells: expected 3 integers");
        c.mesh.cells = {cells[0], cells[1], cells[2]};
        c.mesh.lo = vec3(m.at("lo"), "mesh.lo");
        c.mesh.hi = vec3(m.at("hi"), "mesh.hi");
      } else if (c.mesh.generator == "bear_proxy") {
        c.mesh.resolution = m.get<int>("resolution", 1);
      } else if (c.mesh.generator != "bat_proxy") {
        throw InputError("mesh.generator: unknown generator '" + c.mesh.generator + "'");
      }
    }
    m.finish();
  }

  if (r.has("material")) {
    Reader m(r.at("material"), "material");
    c.material.youngs_modulus = m.get<double>("youngs_modulus", c.material.youngs_modulus);
    c.material.poisson_ratio = m.get<double>("poisson_ratio", c.material.poisson_ratio);
    c.material.density = m.get<double>("density", c.material.density);
    c.material.youngs_per_element = m.get<std::vector<double>>("youngs_per_element", {});
    c.material.density_per_element = m.get<std::vector<double>>("density_per_element", {});
    m.finish();
    if (!(c.material.youngs_modulus > 0.0)) throw InputError("material.youngs_modulus must be positive");
    if (!(c.material.density > 0.0)) throw InputError("material.density must be positive");
    if (!(c.material.poisson_ratio > -1.0 && c.material.poisson_ratio < 0.5))
      throw InputError("material.poisson_ratio must lie in (-1, 0.5)");
  }

  if (r.has("pins")) {
    Reader p(r.at("pins"), "pins");
    if (p.has("vertices")) c.pin_ids = index_list(p.at("vertices"), "pins.vertices");
    if (p.has("boxes")) {
      const json& boxes = p.at("boxes");
      if (!boxes.is_array()) throw InputError("pins.boxes: expected an array");
      for (const auto& b : boxes) c.pin_boxes.push_back(box_of(b, "pins.boxes"));
    }
    p.finish();
  }
  if (r.has("regularization")) {
    c.regularization = r.get<double>("regularization");
    if (*c.regularization < 0.0) throw InputError("regularization must be non-negative");
  }

  if (r.has("prior")) c.prior = prior_of(r.at("prior"), "prior", base_dir);
  if (r.has("mixture")) {
    Reader m(r.at("mixture"), "mixture");
    MixtureSpec mix;
    const json& comps = m.at("components");
    if (!comps.is_array() || comps.empty()) throw InputError("mixture.components: expected a non-empty array");
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::string ctx = "mixture.components[" + std::to_string(i) + "]";
      Reader cr(comps[i], ctx);
      mix.components.push_back(prior_of(cr.at("prior"), ctx + ".prior", base_dir));
      mix.modes.push_back(cr.has("modes") ? std::optional<Index>(cr.get<Index>("modes")) : std::nullopt);
      cr.finish();
    }
    mix.weights = m.get<std::vector<double>>("weights", std::vector<double>(comps.size(), 1.0 / comps.size()));
    if (mix.weights.size() != comps.size()) throw InputError("mixture.weights: one weight per component");
    if (m.has("hysteresis")) {
      Reader h(m.at("hysteresis"), "mixture.hysteresis");
      mix.hysteresis.enabled = h.get<bool>("enabled", true);
      mix.hysteresis.margin = h.get<double>("margin", 2.0);
      mix.hysteresis.count = h.get<int>("count", 3);
      h.finish();
      if (mix.hysteresis.count < 1 || mix.hysteresis.margin < 0.0) throw InputError("mixture.hysteresis out of range");
    }
    mix.marginal_limit = m.get<Index>("marginal_limit", 3072);
    m.finish();
    c.mixture = std::move(mix);
  }
  if (c.prior && c.mixture) throw InputError("config: give either prior or mixture, not both");

  if (r.has("subspace")) {
    Reader s(r.at("subspace"), "subspace");
    c.subspace.modes = s.get<Index>("modes", 10);
    c.subspace.path = s.get<std::string>("path", "auto");
    c.subspace.skinning = s.get<bool>("skinning", false);
    c.subspace.keep_mean = s.get<bool>("keep_mean", true);
    c.subspace.tolerance = s.get<double>("tolerance", 1e-10);
    c.subspace.max_iterations = s.get<int>("max_iterations", 300);
    c.subspace.extra_block = s.get<int>("extra_block", 8);
    s.finish();
    if (c.subspace.modes < 1) throw InputError("subspace.modes must be at least 1");
    static const std::set<std::string> kPaths{"auto", "diagonal", "lowrank", "greens"};
    if (!kPaths.count(c.subspace.path)) throw InputError("subspace.path: unknown path '" + c.subspace.path + "'");
  }

  if (r.has("simulation")) {
    Reader s(r.at("simulation"), "simulation");
    c.simulation.timestep = s.get<double>("timestep", 1.0 / 60.0);
    c.simulation.steps = s.get<int>("steps", 0);
    if (s.has("damping")) {
      Reader d(s.at("damping"), "simulation.damping");
      c.simulation.mass_damping = d.get<double>("mass", 0.0);
      c.simulation.stiffness_damping = d.get<double>("stiffness", 0.0);
      d.finish();
    }
    if (s.has("gravity")) c.simulation.gravity = vec3(s.at("gravity"), "simulation.gravity");
    c.simulation.max_iterations = s.get<int>("max_iterations", 10);
    c.simulation.handle_strength = s.get<double>("handle_strength", 1.0);
    c.simulation.record_positions = s.get<bool>("record_positions", false);
    if (s.has("schedule")) {
      const json& sch = s.at("schedule");
      c.simulation.schedule =
          sch.is_string() ? parse_schedule(read_json(existing_file(base_dir, sch.get<std::string>(), "simulation.schedule")))
                          : parse_schedule(sch);
    }
    s.finish();
    if (!(c.simulation.timestep > 0.0)) throw InputError("simulation.timestep must be positive");
    if (c.simulation.steps < 0) throw InputError("simulation.steps must be non-negative");
    if (c.simulation.mass_damping < 0.0 || c.simulation.stiffness_damping < 0.0)
      throw InputError("simulation.damping must be non-negative");
    if (!(c.simulation.handle_strength > 0.0)) throw InputError("simulation.handle_strength must be positive");
  }

  if (r.has("service")) {
    Reader s(r.at("service"), "service");
    const std::string bind = s.get<std::string>("bind", "127.0.0.1:8765");
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw InputError("service.bind: expected host:port");
    c.service.host = bind.substr(0, colon);
    try {
      const int port = std::stoi(bind.substr(colon + 1));
      if (port < 0 || port > 65535) throw InputError("service.bind: port out of range");
      c.service.port = static_cast<unsigned short>(port);
    } catch (const std::logic_error&) {
      throw InputError("service.bind: invalid port");
    }
    c.service.frame_rate = s.get<double>("frame_rate", 60.0);
    if (s.has("handle_strength")) c.service.handle_strength = s.get<double>("handle_strength");
    s.finish();
    if (!(c.service.frame_rate > 0.0)) throw InputError("service.frame_rate must be positive");
  }

  if (r.has("validation")) {
    Reader v(r.at("validation"), "validation");
    ValidationSpec& vs = c.validation;
    vs.pca_samples = v.get<std::vector<Index>>("pca_samples", vs.pca_samples);
    vs.pca_seeds = v.get<int>("pca_seeds", vs.pca_seeds);
    if (v.has("pca_modes")) vs.pca_modes = v.get<Index>("pca_modes");
    vs.max_modes = v.get<Index>("max_modes", vs.max_modes);
    if (v.has("load")) {
      Reader l(v.at("load"), "validation.load");
      vs.load_vertices = selector_of(l.at("vertices"), "validation.load.vertices");
      vs.load_force = vec3(l.at("force"), "validation.load.force");
      l.finish();
    }
    vs.radii = v.get<std::vector<double>>("radii", vs.radii);
    vs.alpha = v.get<double>("alpha", vs.alpha);
    vs.ablation_modes = v.get<Index>("ablation_modes", vs.ablation_modes);
    vs.dense_limit = v.get<Index>("dense_limit", vs.dense_limit);
    v.finish();
    if (vs.pca_seeds < 1 || vs.max_modes < 1 || vs.ablation_modes < 1) throw InputError("validation counts must be positive");
  }
  r.finish();
  return c;
}

SceneConfig load_config(const fs::path& path) {
  return parse_config(read_json(path), fs::absolute(path).parent_path());
}

Scene load_scene(const SceneConfig& config) {
  TetMesh mesh = [&] {
    const auto& m = config.mesh;
    if (m.generator.empty()) return load_mesh(m.path, m.format);
    if (m.generator == "box") return box_mesh(m.cells[0], m.cells[1], m.cells[2], m.lo, m.hi);
    if (m.generator == "bear_proxy") return bear_proxy_mesh(m.resolution);
    return bat_proxy_mesh();
  }();
  std::vector<Index> pins = config.pin_ids;
  for (Index v : pins)
    if (v >= mesh.num_vertices()) throw InputError("pinned vertex " + std::to_string(v) + " out of range");
  for (const auto& box : config.pin_boxes) {
    VertexSelector sel;
    sel.box = box;
    const auto ids = sel.resolve(mesh);
    pins.insert(pins.end(), ids.begin(), ids.end());
  }
  std::sort(pins.begin(), pins.end());
  pins.erase(std::unique(pins.begin(), pins.end()), pins.end());
  SystemOperators ops = SystemOperators::build(mesh, config.material, pins, config.regularization);
  return Scene{std::move(mesh), config.material, std::move(pins), std::move(ops)};
}

Vec read_scalar_column(const fs::path& path, Index expected) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.rfind(',');
    const std::string cell = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
    } catch (const std::logic_error&) {
      if (values.empty()) continue;  // header row
      throw InputError(path.string() + ": malformed value '" + cell + "'");
    }
  }
  if (static_cast<Index>(values.size()) != expected)
    throw InputError(path.string() + ": expected " + std::to_string(expected) + " values, got " +
                     std::to_string(values.size()));
  return Eigen::Map<Vec>(values.data(), expected);
}

ForcePrior make_prior(const PriorSpec& spec, const Scene& scene) {
  const TetMesh& mesh = scene.mesh;
  const SystemOperators& ops = scene.ops;
  const Actuation act{spec.actuation.mean, spec.actuation.covariance};
  const auto build = [&]() -> ForcePrior {
    switch (spec.type) {
      case PriorType::lma:
        return lma_prior(ops);
      case PriorType::painted: {
        Vec w;
        if (spec.weights_path) {
          w = read_scalar_column(*spec.weights_path, mesh.num_vertices());
        } else if (spec.radial_center) {
          w = radial_decay_weights(mesh, *spec.radial_center, spec.radial_radius, spec.radial_alpha);
        } else {
          w = Vec::Zero(mesh.num_vertices());
          for (Index v : spec.region->resolve(mesh)) w(v) = 1.0;
        }
        return painted_prior(mesh, ops, w);
      }
      case PriorType::handle:
        return handle_prior(ops, HandleSet{spec.vertices.resolve(mesh), spec.strength}, act);
      case PriorType::contact: {
        ContactPatchSet set;
        set.normalize_weights = spec.normalize_weights;
        for (const auto& p : spec.patches)
          set.frames.push_back(contact_frame_from_normal(p.normal, spherical_patch_weights(mesh, p.center, p.radius)));
        return contact_prior(mesh, ops, set, act);
      }
      case PriorType::pneumatic: {
        PneumaticPocketSet set;
        for (const auto& s : spec.pockets) set.pockets.push_back(s.resolve(mesh));
        return pneumatic_prior(mesh, set, act);
      }
      case PriorType::muscle: {
        MuscleFiberSet set;
        for (const auto& f : spec.fibers) {
          if (f.all_elements) {
            for (Index t = 0; t < mesh.num_tets(); ++t) {
              set.elements.push_back(t);
              set.directions.push_back(f.direction);
            }
          } else {
            for (Index t : f.elements) {
              set.elements.push_back(t);
              set.directions.push_back(f.direction);
            }
          }
        }
        return muscle_prior(mesh, element_jacobians(mesh), set, act);
      }
      case PriorType::spring:
        return spring_prior(mesh, SpringSet{spec.edges, {}}, act);
    }
    throw InputError("unknown prior type");
  };
  ForcePrior p = build();
  if (spec.scale != 1.0) p = p.scaled(spec.scale);
  return p.relabeled(spec.label);
}

std::vector<PriorSpec> component_specs(const SceneConfig& config) {
  if (config.mixture) return config.mixture->components;
  if (config.prior) return {*config.prior};
  PriorSpec lma;
  lma.label = "lma";
  return {lma};
}

std::vector<double> component_weights(const SceneConfig& config) {
  if (config.mixture) return config.mixture->weights;
  return {1.0};
}

Index component_modes(const SceneConfig& config, Index k) {
  if (config.mixture) {
    const auto& o = config.mixture->modes.at(static_cast<std::size_t>(k));
    if (o) return *o;
  }
  return config.subspace.modes;
}

}  // namespace fdm
