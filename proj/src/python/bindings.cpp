// Thin Python layer over the core library; dense matrices cross as numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mblflow/errors.hpp"
#include "mblflow/flow.hpp"
#include "mblflow/harness.hpp"
#include "mblflow/oracle.hpp"

namespace py = pybind11;
using namespace mblflow;

namespace {

// nlohmann -> Python through the json module keeps the binding free of a converter.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

FlowParams flow_params(std::optional<double> epsilon, int max_steps) {
  FlowParams p;
  p.epsilon = epsilon;
  p.max_steps = max_steps;
  return p;
}

}  // namespace

PYBIND11_MODULE(_mblflow, m) {
  m.attr("__version__") = kVersion;

  // Translators run last-registered first, so the base class goes in before its children.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CapacityError>(m, "CapacityError", PyExc_MemoryError);

  py::class_<Disorder>(m, "Disorder")
      .def(py::init([](double gamma, std::vector<double> h, std::vector<double> Gamma, std::vector<double> J) {
             Disorder d{static_cast<int>(h.size()), gamma, std::move(h), std::move(Gamma), std::move(J)};
             d.validate_shape();
             return d;
           }),
           py::arg("gamma"), py::arg("h"), py::arg("Gamma"), py::arg("J"))
      .def_readonly("n", &Disorder::n)
      .def_readonly("gamma", &Disorder::gamma)
      .def_readonly("h", &Disorder::h)
      .def_readonly("Gamma", &Disorder::Gamma)
      .def_readonly("J", &Disorder::J)
      .def("scaled", &Disorder::scaled)
      .def("coupling_radius", &Disorder::coupling_radius)
      .def("to_json", [](const Disorder& d) { return to_py(to_json(d)); });

  m.def(
      "sample_disorder",
      [](std::uint64_t seed, int n, double gamma, const std::string& law) {
        ModelParams p;
        p.n = n;
        p.gamma = gamma;
        p.law = coupling_law_from_string(law);
        return sample_disorder(seed, p);
      },
      py::arg("seed"), py::arg("n"), py::arg("gamma"), py::arg("law") = "uniform");
  m.def("derive_seed", &derive_seed, py::arg("master_seed"), py::arg("index"));
  m.def("default_epsilon", &default_epsilon);
  m.def("build_hamiltonian", [](const Disorder& d) { return build_hamiltonian(d); });
  m.def("detect_resonant_sites", &detect_resonant_sites, py::arg("disorder"), py::arg("epsilon"));

  m.def("eigh", [](const Disorder& d) {
    const Spectrum s = diagonalize(build_hamiltonian(d));
    return py::make_tuple(s.energies, s.vectors);
  });
  m.def("min_level_spacing", [](const Disorder& d) { return min_level_spacing(diagonalize(build_hamiltonian(d))); });
  m.def("radial_scaling_check", &radial_scaling_check, py::arg("disorder"), py::arg("lam"),
        py::arg("relative_floor") = 1e-3);

  py::class_<FlowState>(m, "FlowState")
      .def_readonly("step", &FlowState::step)
      .def_readonly("converged", &FlowState::converged)
      .def_readonly("epsilon", &FlowState::epsilon)
      .def_readonly("resonant_sites", &FlowState::resonant_sites)
      .def_readonly("H_eff", &FlowState::H_eff)
      .def_readonly("R", &FlowState::R_cum)
      .def("trace_csv", [](const FlowState& s) { return flow_trace_csv(s); });
  m.def(
      "run_flow",
      [](const Disorder& d, std::optional<double> epsilon, int max_steps) {
        return run_flow(d, flow_params(epsilon, max_steps));
      },
      py::arg("disorder"), py::arg("epsilon") = py::none(), py::arg("max_steps") = FlowParams{}.max_steps);

  // Ensembles are driven by the same flat config text as the CLI.
  m.def(
      "run_ensemble",
      [](const std::string& config_text) {
        const RunConfig cfg = parse_config(config_text);
        cfg.validate();
        EnsembleReport r;
        {
          py::gil_scoped_release release;
          r = run_ensemble(cfg);
        }
        return to_py(aggregates_json(r));
      },
      py::arg("config_text"));
  m.def("config_json", [](const std::string& text) { return to_py(to_json(parse_config(text))); });
}
