#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sbm/errors.hpp"
#include "sbm/kernels.hpp"
#include "sbm/laplace.hpp"
#include "sbm/renewal.hpp"
#include "sbm/simulate.hpp"
#include "sbm/verify.hpp"

namespace py = pybind11;
using namespace sbm;

// JSON crosses the boundary as text; the Python layer decodes it.
namespace {

BernsteinSpec spec_from(const std::string& text) { return BernsteinSpec::from_json(json::parse(text)); }

McConfig mc(std::uint64_t seed, unsigned workers) {
  McConfig c;
  c.seed = seed;
  c.workers = workers;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<CertificationError>(m, "CertificationError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());

  py::class_<BernsteinSpec>(m, "BernsteinSpec")
      .def(py::init(&spec_from), py::arg("json_text"))
      .def("to_json", [](const BernsteinSpec& s) { return s.to_json().dump(); })
      .def_property_readonly("id", &BernsteinSpec::id)
      .def_property_readonly("label", &BernsteinSpec::label)
      .def("__call__", [](const BernsteinSpec& s, double l) { return eval_phi(s, l); })
      .def("derivative", [](const BernsteinSpec& s, double l) { return eval_phi_prime(s, l); })
      .def("__repr__", [](const BernsteinSpec& s) { return "BernsteinSpec(" + s.label() + ")"; });

  m.def("family_names", &family_names);
  m.def("conjugate", &conjugate);
  m.def("rescale", &rescale);
  m.def("capital_phi", &capital_phi);
  m.def("capital_phi_inv", [](const BernsteinSpec& s, double t) { return capital_phi_inv(s, t); });
  m.def("certify", [](const BernsteinSpec& s, double decades) { return certify(s, decades).to_json().dump(); },
        py::arg("spec"), py::arg("decades") = 8.0);

  m.def("levy_density_mu", [](const BernsteinSpec& s, double t) { return levy_density_mu(s, t).value; });
  m.def("potential_density_u", [](const BernsteinSpec& s, double t) { return potential_density_u(s, t).value; });
  m.def("levy_tail", [](const BernsteinSpec& s, double t) { return levy_tail(s, t).value; });

  m.def("jump_density_j", [](const BernsteinSpec& s, int d, double r) { return jump_density_j(s, d, r); });
  m.def("green_radial_g", [](const BernsteinSpec& s, int d, double r) { return green_radial_g(s, d, r); });
  m.def("free_heat_kernel",
        [](const BernsteinSpec& s, int d, double t, double r) { return free_heat_kernel(s, d, t, r).value; });
  m.def("p_estimate", &p_estimate);
  m.def("half_space_hk_estimate", &half_space_hk_estimate);

  m.def("ladder_exponent_chi",
        [](const BernsteinSpec& s, double l) { return ladder_exponent_chi(s, l); });
  m.def("renewal_V", [](const BernsteinSpec& s, const std::vector<double>& r) {
    const auto tab = renewal_table(s);
    std::vector<double> out;
    for (double x : r) out.push_back(tab(x));
    return out;
  });
  m.def("bhp_decay_comparator", &bhp_decay_comparator);

  m.def(
      "mc_exit_ball",
      [](const BernsteinSpec& s, int d, double radius, std::size_t n, double dt, std::uint64_t seed,
         unsigned workers) {
        StepRule st;
        st.dt = dt > 0 ? dt : default_dt(s, radius);
        Point c(d, 0.0);
        py::gil_scoped_release release;
        return mc_exit_ball(s, SubordinatorSampler::make(s), d, c, radius, c, n, st, mc(seed, workers))
            .to_json()
            .dump();
      },
      py::arg("spec"), py::arg("d"), py::arg("radius"), py::arg("n"), py::arg("dt") = 0.0,
      py::arg("seed") = 1, py::arg("workers") = 0);

  m.def(
      "run_suite",
      [](const BernsteinSpec& s, int d, bool monte_carlo, bool inject_wrong_exponent, unsigned workers) {
        SuiteConfig cfg;
        cfg.monte_carlo = monte_carlo;
        cfg.inject_wrong_exponent = inject_wrong_exponent;
        cfg.workers = workers;
        py::gil_scoped_release release;
        const auto b = run_suite(s, d, cfg);
        return json{{"passed", b.passed()}, {"failed", b.failed_checks()}, {"checks", b.summary()}}.dump();
      },
      py::arg("spec"), py::arg("d"), py::arg("monte_carlo") = false,
      py::arg("inject_wrong_exponent") = false, py::arg("workers") = 0);
}
