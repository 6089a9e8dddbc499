#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "irco/data.hpp"
#include "irco/error.hpp"
#include "irco/harness.hpp"
#include "irco/metrics.hpp"

namespace py = pybind11;

namespace {

irco::Batch label_batch(const std::vector<int>& labels, const std::vector<int>& groups) {
  irco::Batch b;
  b.features = Eigen::MatrixXd(static_cast<Eigen::Index>(labels.size()), 0);
  b.labels = labels;
  b.groups = groups;
  return b;
}

void check_sizes(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(scores.size()) != labels.size())
    throw std::invalid_argument("scores and labels differ in length");
}

py::tuple dataset_arrays(const irco::Dataset& d) {
  return py::make_tuple(d.features, d.labels);
}

}  // namespace

PYBIND11_MODULE(_irco, m) {
  m.doc() = "Implicit rate-constrained optimization core";

  auto base = py::register_exception<irco::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<irco::DegenerateError>(m, "DegenerateError", base.ptr());
  py::register_exception<irco::DegenerateSlopeError>(m, "DegenerateSlopeError", base.ptr());
  py::register_exception<irco::DivergenceError>(m, "DivergenceError", base.ptr());

  m.def(
      "roc_auc",
      [](const Eigen::VectorXd& s, const std::vector<int>& y) {
        check_sizes(s, y);
        return irco::roc_auc({s.data(), static_cast<std::size_t>(s.size())}, y);
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "partial_auc_roc",
      [](const Eigen::VectorXd& s, const std::vector<int>& y, double beta, int grid_m) {
        check_sizes(s, y);
        const auto p =
            irco::partial_auc_roc({s.data(), static_cast<std::size_t>(s.size())}, y, beta, grid_m);
        return py::make_tuple(p.raw, p.mcclish);
      },
      py::arg("scores"), py::arg("labels"), py::arg("beta"), py::arg("grid_m") = 10,
      "Returns (raw, mcclish).");
  m.def(
      "partial_auc_pr",
      [](const Eigen::VectorXd& s, const std::vector<int>& y, double beta, int grid_m) {
        check_sizes(s, y);
        return irco::partial_auc_pr({s.data(), static_cast<std::size_t>(s.size())}, y, beta,
                                    grid_m);
      },
      py::arg("scores"), py::arg("labels"), py::arg("beta"), py::arg("grid_m") = 5);
  m.def(
      "metric",
      [](const std::string& name, const Eigen::VectorXd& s, const std::vector<int>& y, double beta,
         std::int64_t k, int grid_m, const std::vector<int>& groups,
         const std::vector<double>& thresholds) {
        check_sizes(s, y);
        return irco::evaluate_named_metric(name, s, label_batch(y, groups), beta, k, grid_m,
                                           thresholds);
      },
      py::arg("name"), py::arg("scores"), py::arg("labels"), py::arg("beta") = 0.1,
      py::arg("k") = 10, py::arg("grid_m") = 10, py::arg("groups") = std::vector<int>{},
      py::arg("thresholds") = std::vector<double>{});

  m.def(
      "heteroscedastic",
      [](std::size_t n, std::uint64_t seed) {
        return dataset_arrays(irco::gen_gaussian(irco::heteroscedastic_spec(), n, seed));
      },
      py::arg("n"), py::arg("seed") = 0, "Returns (features, labels).");
  m.def(
      "load_csv",
      [](const std::string& path, const std::string& label_column) {
        return dataset_arrays(irco::load_csv(irco::resolve_data_path(path), label_column));
      },
      py::arg("path"), py::arg("label_column") = "label");

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const irco::ExperimentConfig cfg = irco::parse_config(config_json);
        py::gil_scoped_release release;
        return irco::report_to_json(irco::run_experiment(cfg));
      },
      py::arg("config_json"), "Runs a sweep and returns the report as JSON text.");
  m.def(
      "gradcheck",
      [](const std::string& config_json) {
        const irco::ExperimentConfig cfg = irco::parse_config(config_json);
        irco::GradcheckResult g;
        {
          py::gil_scoped_release release;
          g = irco::gradcheck(cfg);
        }
        return py::dict(py::arg("model_vjp") = g.model_error,
                        py::arg("implicit_gradient") = g.implicit_error);
      },
      py::arg("config_json"));
}
