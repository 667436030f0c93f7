#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dynbath/error.hpp"
#include "dynbath/fock.hpp"
#include "dynbath/hamiltonian.hpp"
#include "dynbath/runner.hpp"
#include "dynbath/thermofit.hpp"

namespace py = pybind11;
using namespace dynbath;

namespace {

HamiltonianParams params(std::size_t modes, int particles, double delta, double hopping, double u, double u_prime) {
  HamiltonianParams p;
  p.num_modes = modes;
  p.num_particles = particles;
  p.level_spacing = delta;
  p.hopping = hopping;
  p.intra_level = u;
  p.inter_level = u_prime;
  p.validate();
  return p;
}

py::dict fit_dict(const TemperatureFit& f) {
  py::dict d;
  d["temperature"] = f.temperature;
  d["temperature_error"] = f.temperature_error;
  d["beta"] = f.beta;
  d["beta_error"] = f.beta_error;
  d["point_count"] = f.point_count;
  d["converged"] = f.converged;
  d["thermal"] = f.thermal;
  d["status"] = f.status;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Exact-diagonalization dynamics of few-level Bose gases.";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("version", &library_version);
  m.def("sector_dimension", &sector_dimension, py::arg("modes"), py::arg("particles"));

  m.def(
      "basis_states",
      [](std::size_t modes, int particles) {
        const BasisPtr b = enumerate_basis(modes, particles);
        std::vector<std::vector<int>> out;
        out.reserve(b->dimension());
        for (std::size_t k = 0; k < b->dimension(); ++k) {
          const auto s = b->state(k);
          out.emplace_back(s.begin(), s.end());
        }
        return out;
      },
      py::arg("modes"), py::arg("particles"), "Occupation tuples in lexicographically decreasing order.");

  m.def(
      "hamiltonian",
      [](std::size_t modes, int particles, double delta, double hopping, double u, double u_prime) {
        const HamiltonianParams p = params(modes, particles, delta, hopping, u, u_prime);
        return Eigen::MatrixXcd(build_hamiltonian(p, enumerate_basis(modes, particles)).matrix);
      },
      py::arg("modes"), py::arg("particles"), py::arg("level_spacing") = 10.0, py::arg("hopping") = 1.0,
      py::arg("intra_level") = 1.0, py::arg("inter_level") = 0.1);

  m.def(
      "eigenvalues",
      [](std::size_t modes, int particles, double delta, double hopping, double u, double u_prime) {
        const HamiltonianParams p = params(modes, particles, delta, hopping, u, u_prime);
        return Eigen::VectorXd(eigenvalues(build_hamiltonian(p, enumerate_basis(modes, particles))));
      },
      py::arg("modes"), py::arg("particles"), py::arg("level_spacing") = 10.0, py::arg("hopping") = 1.0,
      py::arg("intra_level") = 1.0, py::arg("inter_level") = 0.1);

  m.def(
      "r_ratio",
      [](std::vector<double> levels, std::optional<std::pair<double, double>> window) {
        std::sort(levels.begin(), levels.end());
        const ChaosReport r = r_ratio(levels, window);
        py::dict d;
        d["mean_ratio"] = r.mean_ratio;
        d["ratio_count"] = r.ratio_count;
        d["merged_levels"] = r.merged_levels;
        d["level_count"] = r.level_count;
        return d;
      },
      py::arg("levels"), py::arg("window") = py::none());

  m.def(
      "fit_bose_einstein",
      [](const std::vector<double>& e, const std::vector<double>& n, const std::vector<double>& sigma) {
        if (e.size() != n.size() || e.size() != sigma.size())
          throw ValidationError("energies, occupations and sigmas differ in length");
        std::vector<FdtPoint> pts;
        for (std::size_t k = 0; k < e.size(); ++k) pts.push_back({e[k], n[k], sigma[k], false});
        return fit_dict(fit_bose_einstein(pts));
      },
      py::arg("energies"), py::arg("occupations"), py::arg("sigmas"));

  m.def(
      "fit_fdt_beta",
      [](const std::vector<double>& e, const std::vector<double>& f, const std::vector<double>& r,
         std::pair<double, double> window) { return fit_dict(fit_fdt_beta(e, f, r, window)); },
      py::arg("energies"), py::arg("forward"), py::arg("reversed"), py::arg("window") = kDefaultBetaWindow);

  m.def(
      "fit_biexponential",
      [](const std::vector<double>& t, const std::vector<double>& y, double plateau, double sigma_inf) {
        const RelaxationFit f = fit_biexponential(t, y, plateau, sigma_inf);
        py::dict d;
        d["a1"] = f.a1;
        d["a2"] = f.a2;
        d["tau1"] = f.tau1;
        d["tau2"] = f.tau2;
        d["converged"] = f.converged;
        d["degenerate"] = f.degenerate;
        return d;
      },
      py::arg("times"), py::arg("values"), py::arg("plateau"), py::arg("sigma_inf") = 0.0);

  m.def(
      "run",
      [](const std::string& config_json, const std::string& output_directory) {
        RunConfig cfg = RunConfig::from_json(json::parse(config_json));
        if (!output_directory.empty()) cfg.output_directory = output_directory;
        json manifest;
        {
          py::gil_scoped_release release;
          Runner runner(cfg);
          manifest = runner.run_all();
        }
        return manifest.dump();
      },
      py::arg("config_json"), py::arg("output_directory") = "",
      "Runs every stage of a JSON configuration and returns the manifest as JSON text.");
}
