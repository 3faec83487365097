#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <string>
#include <vector>

#include "dmpot/angular.hpp"
#include "dmpot/cli.hpp"
#include "dmpot/decluster.hpp"
#include "dmpot/diagnostics.hpp"
#include "dmpot/error.hpp"
#include "dmpot/margins.hpp"
#include "dmpot/simulate.hpp"

namespace py = pybind11;
using namespace dmpot;

namespace {

DMParams mixture(const std::vector<double>& weights, const std::vector<std::vector<double>>& centers,
                 const std::vector<double>& shapes) {
  if (centers.size() != weights.size() || shapes.size() != weights.size())
    throw ConfigError("weights, centers and shapes need one entry per component");
  DMParams psi;
  psi.weights = weights;
  for (std::size_t m = 0; m < weights.size(); ++m) psi.components.push_back({centers[m], shapes[m]});
  try {
    psi.validate();
  } catch (const NumericalError& e) {
    throw ConfigError(std::string("invalid mixture: ") + e.what());
  }
  return psi;
}

py::dict decluster_file(const std::string& path, const std::vector<double>& thresholds, int run_length) {
  const auto panel = read_csv_file(path);
  const ThresholdConfig cfg{thresholds, run_length};
  const auto s = decluster(panel, cfg);
  const auto rates = estimate_zeta(panel, cfg);
  py::list clusters;
  for (const auto& c : s.clusters) {
    py::list cells;
    for (const auto& o : c.coords)
      cells.append(py::make_tuple(static_cast<int>(o.kind), o.value ? py::cast(*o.value) : py::none(), o.lower,
                                  o.upper));
    clusters.append(py::dict(py::arg("start") = c.start, py::arg("length") = c.length,
                             py::arg("maxima") = cells));
  }
  py::dict d;
  d["site_names"] = s.site_names;
  d["n_days"] = s.n_days;
  d["clusters"] = clusters;
  d["cluster_days"] = s.cluster_days;
  d["blocks"] = s.blocks.size();
  d["block_days"] = s.block_days();
  d["below_days"] = s.below_days;
  d["missing_days"] = s.missing_days;
  d["mean_cluster_size"] = s.mean_cluster_size;
  d["zetas"] = rates.zetas;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multivariate peaks-over-threshold model with Dirichlet-mixture dependence";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.attr("__version__") = kSoftwareVersion;

  m.def(
      "chi_coefficient",
      [](const std::vector<double>& weights, const std::vector<std::vector<double>>& centers,
         const std::vector<double>& shapes, std::size_t i, std::size_t j) {
        return chi_coefficient(i, j, mixture(weights, centers, shapes));
      },
      py::arg("weights"), py::arg("centers"), py::arg("shapes"), py::arg("i") = 0, py::arg("j") = 1);
  m.def(
      "exponent_measure",
      [](const std::vector<double>& u, const std::vector<double>& weights,
         const std::vector<std::vector<double>>& centers, const std::vector<double>& shapes) {
        return exponent_measure_region(u, mixture(weights, centers, shapes)).value;
      },
      py::arg("u"), py::arg("weights"), py::arg("centers"), py::arg("shapes"),
      "Exponent measure of the region where some coordinate exceeds its level.");
  m.def(
      "solve_last_center",
      [](const std::vector<double>& weights, const std::vector<std::vector<double>>& free_centers, std::size_t dim) {
        return solve_last_center(weights, free_centers, dim);
      },
      py::arg("weights"), py::arg("free_centers"), py::arg("dim"),
      "Center of the last component that restores the moment constraint, or None.");
  m.def(
      "return_level",
      [](double years, double threshold, double scale, double shape, double zeta, double days_per_year) {
        const MarginalParams mp{{std::log(scale)}, {shape}, false};
        const std::vector<double> v{threshold};
        return return_level(years, 0, mp, ExceedanceRates::from_zetas({zeta}), v, days_per_year);
      },
      py::arg("years"), py::arg("threshold"), py::arg("scale"), py::arg("shape"), py::arg("zeta"),
      py::arg("days_per_year") = kDaysPerYear);
  m.def("joint_return_period", &joint_return_period, py::arg("years"), py::arg("chi"));
  m.def("independent_joint_return_period", &independent_joint_return_period, py::arg("years"),
        py::arg("mean_cluster_size"), py::arg("days_per_year") = 365.0);
  m.def("lrt_regional_shape", &lrt_regional_shape, py::arg("loglik_regional"), py::arg("loglik_local"),
        py::arg("n_sites"));
  m.def(
      "write_lookalike_panel",
      [](std::uint64_t seed, const std::string& path) { write_csv_file(path, make_gardons_lookalike(seed)); },
      py::arg("seed"), py::arg("path"));
  m.def("decluster", &decluster_file, py::arg("path"), py::arg("thresholds"), py::arg("run_length"),
        "Decluster a panel CSV; returns the summary as a dict.");
  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "dmpot");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Run a command-line invocation in-process; returns the exit code.");
}
