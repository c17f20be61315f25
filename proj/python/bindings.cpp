#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fdm/container.hpp"
#include "fdm/oracle.hpp"
#include "fdm/reduced_sim.hpp"
#include "fdm/shapes.hpp"

namespace py = pybind11;
using namespace fdm;

PYBIND11_MODULE(_fdm, m) {
  m.doc() = "Force-dual subspace construction and reduced simulation";

  static py::exception<InputError> input_error(m, "InputError", PyExc_ValueError);
  static py::exception<NumericalError> numerical_error(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      py::set_error(input_error, e.what());
    } catch (const NumericalError& e) {
      py::set_error(numerical_error, e.what());
    }
  });

  py::class_<TetMesh>(m, "Mesh")
      .def(py::init(&TetMesh::create), py::arg("vertices"), py::arg("tets"))
      .def_static(
          "box",
          [](std::array<int, 3> cells, const Vec3& lo, const Vec3& hi) { return box_mesh(cells[0], cells[1], cells[2], lo, hi); },
          py::arg("cells"), py::arg("lo"), py::arg("hi"))
      .def_static("bear_proxy", &bear_proxy_mesh, py::arg("resolution") = 1)
      .def_static("bat_proxy", &bat_proxy_mesh)
      .def_property_readonly("vertices", &TetMesh::vertices)
      .def_property_readonly("tets", &TetMesh::tets)
      .def_property_readonly("surface", &TetMesh::surface)
      .def_property_readonly("surface_vertices", &TetMesh::surface_vertices)
      .def_property_readonly("num_vertices", &TetMesh::num_vertices)
      .def_property_readonly("dofs", &TetMesh::dofs)
      .def("total_volume", &TetMesh::total_volume);

  py::class_<SystemOperators>(m, "Operators")
      .def(py::init([](const TetMesh& mesh, double youngs_modulus, double poisson_ratio, double density,
                       std::vector<Index> pins) {
             MaterialParams mat;
             mat.youngs_modulus = youngs_modulus;
             mat.poisson_ratio = poisson_ratio;
             mat.density = density;
             return SystemOperators::build(mesh, mat, std::move(pins));
           }),
           py::arg("mesh"), py::arg("youngs_modulus") = 1e5, py::arg("poisson_ratio") = 0.3,
           py::arg("density") = 1000.0, py::arg("pins") = std::vector<Index>{})
      .def_property_readonly("dofs", &SystemOperators::dofs)
      .def_property_readonly("mass", &SystemOperators::mass)
      .def_property_readonly("free_mask", &SystemOperators::free_mask)
      .def_property_readonly("pins", &SystemOperators::pins)
      .def_property_readonly("hessian", &SystemOperators::hessian)
      .def("solve", py::overload_cast<const Vec&>(&SystemOperators::solve, py::const_), py::arg("rhs"));

  py::class_<ForcePrior>(m, "Prior")
      .def_property_readonly("label", &ForcePrior::label)
      .def_property_readonly("mean", &ForcePrior::mean)
      .def_property_readonly("is_diagonal", &ForcePrior::is_diagonal)
      .def("scaled", &ForcePrior::scaled, py::arg("s"))
      .def("dense_covariance", &ForcePrior::dense_covariance);

  m.def("lma_prior", &lma_prior, py::arg("ops"));
  m.def("painted_prior", &painted_prior, py::arg("mesh"), py::arg("ops"), py::arg("weights"));
  m.def("radial_decay_weights", &radial_decay_weights, py::arg("mesh"), py::arg("center"), py::arg("radius"),
        py::arg("alpha") = 10.0);
  m.def(
      "handle_prior",
      [](const SystemOperators& ops, std::vector<Index> vertices, double strength) {
        return handle_prior(ops, HandleSet{std::move(vertices), strength});
      },
      py::arg("ops"), py::arg("vertices"), py::arg("strength") = 1.0);
  m.def(
      "lowrank_prior", [](const Mat& forces, const std::string& label) { return lowrank_prior(forces, {}, label); },
      py::arg("forces"), py::arg("label") = "lowrank");

  py::class_<Subspace>(m, "Subspace")
      .def_readonly("basis", &Subspace::basis)
      .def_readonly("eigenvalues", &Subspace::eigenvalues)
      .def_readonly("mean", &Subspace::mean)
      .def_readonly("prior_label", &Subspace::prior_label)
      .def_property_readonly("path", [](const Subspace& s) { return to_string(s.path); })
      .def_property_readonly("modes", &Subspace::modes)
      .def("reconstruct", [](const Subspace& s, const Vec& z) { return reconstruct(s, z); }, py::arg("z"))
      .def("project", [](const Subspace& s, const Vec& mass, const Vec& u) { return project(s, mass, u); },
           py::arg("mass"), py::arg("u"));

  m.def("build_diagonal", [](const SystemOperators& ops, const ForcePrior& p, Index k) { return build_diagonal(ops, p, k); },
        py::arg("ops"), py::arg("prior"), py::arg("m"));
  m.def("build_lowrank", [](const SystemOperators& ops, const ForcePrior& p, Index k) { return build_lowrank(ops, p, k); },
        py::arg("ops"), py::arg("prior"), py::arg("m"));
  m.def("build_subspace", [](const SystemOperators& ops, const ForcePrior& p, Index k) { return build_subspace(ops, p, k); },
        py::arg("ops"), py::arg("prior"), py::arg("m"));
  m.def("greens_subspace", &greens_subspace, py::arg("ops"), py::arg("forces"));
  m.def("dense_modal_basis", [](const SystemOperators& ops, Index k) { return dense_modal_basis(ops, k); },
        py::arg("ops"), py::arg("m"));
  m.def("mass_orthonormality_error", &mass_orthonormality_error, py::arg("basis"), py::arg("mass"));
  m.def(
      "principal_angles", [](const Mat& a, const Mat& b, const Vec& mass) { return principal_angles(a, b, mass).angles; },
      py::arg("a"), py::arg("b"), py::arg("mass"));
  m.def(
      "reconstruction_error",
      [](const Subspace& sub, const SystemOperators& ops, const Vec& force) {
        return reconstruction_error(sub, ops, ExternalLoad{force, {}, {}});
      },
      py::arg("subspace"), py::arg("ops"), py::arg("force"));
  m.def("save_subspace", &save_subspace, py::arg("path"), py::arg("subspace"));
  m.def("load_subspace", &load_subspace, py::arg("path"));

  py::class_<ReducedSimulator>(m, "Simulator")
      .def(py::init([](const SystemOperators& ops, Subspace sub, double timestep, double mass_damping) {
             StepSettings s;
             s.timestep = timestep;
             s.mass_damping = mass_damping;
             return std::make_unique<ReducedSimulator>(ops, std::move(sub), s);
           }),
           py::arg("ops"), py::arg("subspace"), py::arg("timestep") = 1.0 / 60.0, py::arg("mass_damping") = 0.0,
           py::keep_alive<1, 2>())
      .def("step", &ReducedSimulator::step, "Advances one step; returns the Newton iteration count.")
      .def("set_constant_force", &ReducedSimulator::set_constant_force, py::arg("force"))
      .def("assign_handle", &ReducedSimulator::assign_handle, py::arg("vertex"), py::arg("strength"))
      .def("move_handle", &ReducedSimulator::move_handle, py::arg("vertex"), py::arg("offset"))
      .def("release_handle", &ReducedSimulator::release_handle, py::arg("vertex"))
      .def_property_readonly("z", [](const ReducedSimulator& s) { return s.state().z; })
      .def_property_readonly("time", [](const ReducedSimulator& s) { return s.state().time; })
      .def("displacement", &ReducedSimulator::displacement);
}
