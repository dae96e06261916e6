#include "physolver/errors.hpp"
#include "physolver/report.hpp"
#include "physolver/verify.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace physolver;

namespace {

ExperimentConfig resolve(const std::vector<std::string>& overrides, const std::optional<std::string>& path) {
  std::optional<std::filesystem::path> p;
  if (path) p = *path;
  return loadConfig(p, overrides);
}

py::dict errorDict(const std::vector<metrics::ErrorRow>& rows) {
  py::dict out;
  for (const auto& r : rows) out[py::str(r.method + "/" + r.problem)] = r.relL2;
  return out;
}

}  // namespace

PYBIND11_MODULE(_physolver, m) {
  m.doc() = "Transformer-enhanced physics-informed solver for time-dependent PDEs";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("presets", &presetNames);
  m.def(
      "load_config",
      [](const std::vector<std::string>& overrides, const std::optional<std::string>& path) {
        return toJson(resolve(overrides, path)).dump();
      },
      py::arg("overrides") = std::vector<std::string>{}, py::arg("path") = py::none(),
      "Resolved config as a JSON string.");

  m.def("radical_inverse", &sampling::radicalInverse, py::arg("index"), py::arg("base"));
  m.def(
      "halton_stamps",
      [](int count, double lo, double hi) { return sampling::haltonDataStamps(count, sampling::Interval{lo, hi}); },
      py::arg("count"), py::arg("lo"), py::arg("hi"));

  m.def("relative_l2", &metrics::relativeL2, py::arg("approx"), py::arg("ref"));
  m.def("relative_linf", &metrics::relativeLinf, py::arg("approx"), py::arg("ref"));
  m.def("extrapolate_recursive", &trainer::extrapolateRecursive, py::arg("previous"), py::arg("current"),
        py::arg("steps"));

  m.def(
      "reference_values",
      [](const std::string& preset, const Eigen::MatrixXd& coords) {
        trainer::Experiment exp(loadConfig(std::nullopt, {"preset=" + preset}));
        return exp.reference().evaluate(coords);
      },
      py::arg("preset"), py::arg("coords"), "Reference solution at rows of (t, x[, y]).");

  m.def("verify", [] {
    std::vector<std::tuple<std::string, bool, std::string>> out;
    for (const auto& c : verify::runPropertySuite()) out.emplace_back(c.name, c.passed, c.detail);
    return out;
  });

  m.def(
      "train",
      [](const std::vector<std::string>& overrides, const std::optional<std::string>& out) {
        const auto cfg = resolve(overrides, std::nullopt);
        std::optional<std::filesystem::path> dir;
        if (out) dir = *out;
        report::RunResult r;
        {
          py::gil_scoped_release release;
          r = report::run(cfg, dir);
        }
        py::dict d;
        d["status"] = std::string(optim::statusName(r.trained.status));
        d["iterations"] = r.trained.trace.size();
        d["loss"] = r.trained.finalLoss.grandTotal;
        d["reference_accesses"] = r.trained.referenceAccesses;
        d["errors"] = errorDict(r.evaluation.rows);
        d["theta"] = r.trained.theta.values();
        return d;
      },
      py::arg("overrides") = std::vector<std::string>{}, py::arg("out") = py::none(),
      "Train one configuration; returns status, loss and relative l2 errors.");

  py::class_<trainer::Experiment>(m, "Experiment")
      .def(py::init([](const std::vector<std::string>& overrides) { return trainer::Experiment(resolve(overrides, {})); }),
           py::arg("overrides") = std::vector<std::string>{})
      .def_property_readonly("parameter_count", [](const trainer::Experiment& e) { return e.model().layout().size(); })
      .def_property_readonly("train_times", [](const trainer::Experiment& e) { return e.axes().trainTimes; })
      .def_property_readonly("held_out_times", [](const trainer::Experiment& e) { return e.axes().heldOutTimes; })
      .def("initial_parameters", [](const trainer::Experiment& e, std::uint64_t seed) {
        return e.model().initialize(seed).values();
      })
      .def("grid", &trainer::Experiment::gridAt, py::arg("times"))
      .def(
          "predict",
          [](const trainer::Experiment& e, const Eigen::VectorXd& theta, const Eigen::MatrixXd& coords) {
            if (theta.size() != e.model().layout().size()) throw ContractViolation("parameter vector has the wrong size");
            return e.predict(ad::ParameterVector(e.model().layout(), theta), coords);
          },
          py::arg("theta"), py::arg("coords"));
}
