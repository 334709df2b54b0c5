#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "slsada/alignment.hpp"
#include "slsada/cli.hpp"
#include "slsada/dataset.hpp"
#include "slsada/error.hpp"
#include "slsada/graph.hpp"
#include "slsada/harness.hpp"
#include "slsada/selfcheck.hpp"
#include "slsada/solver.hpp"

namespace py = pybind11;
using namespace slsada;

namespace {

DomainPair make_pair(const Matrix& xs, const Matrix& xt, int classes,
                     const std::optional<Labels>& truth_s, const std::optional<Labels>& truth_t) {
  return DomainPair(FeatureMatrix(xs), FeatureMatrix(xt), classes, truth_s.value_or(Labels{}),
                    truth_t.value_or(Labels{}));
}

// Columns reordered from position order back to original source order.
Matrix original_columns(const Matrix& z, const DomainPair& pair) {
  Matrix out(z.rows(), z.cols());
  const auto order = pair.source_order();
  for (std::size_t p = 0; p < order.size(); ++p) {
    out.col(order[p]) = z.col(static_cast<Eigen::Index>(p));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(slsada, m) {
  m.doc() = "Sparsely-labeled source domain adaptation";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<UsageError> usage(m, "UsageError", base.ptr());
  static py::exception<DataError> data(m, "DataError", base.ptr());
  static py::exception<NumericalError> numerical(m, "NumericalError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UsageError& e) {
      py::set_error(usage, e.what());
    } catch (const DataError& e) {
      py::set_error(data, e.what());
    } catch (const NumericalError& e) {
      py::set_error(numerical, e.what());
    }
  });

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_static("preset", &SolverConfig::preset, py::arg("name"))
      .def_readwrite("k", &SolverConfig::k)
      .def_readwrite("gamma", &SolverConfig::gamma)
      .def_readwrite("lambda_", &SolverConfig::lambda)
      .def_readwrite("iterations", &SolverConfig::iterations)
      .def_readwrite("inner_updates", &SolverConfig::inner_updates)
      .def_readwrite("neighbor_count", &SolverConfig::neighbor_count)
      .def_readwrite("epsilon", &SolverConfig::epsilon)
      .def_readwrite("floor", &SolverConfig::floor)
      .def_readwrite("conditional", &SolverConfig::conditional)
      .def_readwrite("seed", &SolverConfig::seed)
      .def_property(
          "graph", [](const SolverConfig& c) { return std::string(to_string(c.graph_schedule)); },
          [](SolverConfig& c, const std::string& v) { c.graph_schedule = parse_graph_schedule(v); })
      .def_property(
          "target_rule", [](const SolverConfig& c) { return std::string(to_string(c.target_rule)); },
          [](SolverConfig& c, const std::string& v) { c.target_rule = parse_target_rule(v); })
      .def_property(
          "source_rule", [](const SolverConfig& c) { return std::string(to_string(c.source_rule)); },
          [](SolverConfig& c, const std::string& v) { c.source_rule = parse_source_rule(v); })
      .def("__repr__", [](const SolverConfig& c) { return to_json(c).dump(); });

  m.def(
      "generate_synthetic",
      [](int classes, int dim, int per_class, double rotation, double offset, double separation,
         double cov_scale, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.classes = classes;
        spec.dim = dim;
        spec.per_class = per_class;
        spec.rotation_deg = rotation;
        spec.offset = offset;
        spec.separation = separation;
        spec.covariance_scale = cov_scale;
        const DomainPair pair = generate_synthetic_pair(spec, seed);
        py::dict out;
        out["xs"] = pair.source_original();
        out["xt"] = pair.target().values();
        out["ys"] = pair.to_original_order(pair.true_labels_source());
        out["yt"] = pair.true_labels_target();
        return out;
      },
      py::arg("classes") = 3, py::arg("dim") = 10, py::arg("per_class") = 50,
      py::arg("rotation") = 15.0, py::arg("offset") = 1.0, py::arg("separation") = 3.0,
      py::arg("cov_scale") = 1.0, py::arg("seed") = 0);

  m.def(
      "sample_labeled_subset",
      [](const Labels& labels, int per_class, std::uint64_t seed, int classes) {
        return sample_labeled_subset(labels, per_class, seed, classes);
      },
      py::arg("labels"), py::arg("per_class"), py::arg("seed"), py::arg("classes") = -1);

  m.def(
      "run",
      [](const Matrix& xs, const Matrix& xt, int classes, const std::vector<int>& labeled_idx,
         const std::vector<int>& labeled_labels, const SolverConfig& config,
         const std::optional<Labels>& truth_s, const std::optional<Labels>& truth_t) {
        const DomainPair pair =
            make_pair(xs, xt, classes, truth_s, truth_t).with_labeled(labeled_idx, labeled_labels);
        SolverResult result;
        {
          py::gil_scoped_release release;
          result = run_slsada(pair, config);
        }
        py::dict out;
        out["source_predictions"] = pair.to_original_order(result.source_predictions);
        out["target_predictions"] = result.target_predictions;
        out["objective_trace"] = result.state.objective_trace;
        out["projection"] = result.state.projection.values;
        out["embeddings_source"] = original_columns(result.embeddings.source, pair);
        out["embeddings_target"] = result.embeddings.target;
        if (pair.has_source_truth()) out["accuracy_s"] = accuracy_s(result.source_predictions, pair);
        if (pair.has_target_truth()) out["accuracy_t"] = accuracy_t(result.target_predictions, pair);
        return out;
      },
      py::arg("xs"), py::arg("xt"), py::arg("classes"), py::arg("labeled_idx"),
      py::arg("labeled_labels"), py::arg("config") = SolverConfig{},
      py::arg("truth_source") = py::none(), py::arg("truth_target") = py::none());

  m.def(
      "protocol_json",
      [](const Matrix& xs, const Matrix& xt, const Labels& ys, const Labels& yt, int classes,
         const SolverConfig& config, int per_class, int repeats, std::uint64_t seed,
         const std::vector<std::string>& methods) {
        ExperimentSpec spec;
        spec.solver = config;
        spec.per_class_labels = per_class;
        spec.repeats = repeats;
        spec.seed = seed;
        spec.methods.clear();
        for (const auto& name : methods) spec.methods.push_back(parse_method(name));
        const DomainPair pair = make_pair(xs, xt, classes, ys, yt);
        RunReport report;
        {
          py::gil_scoped_release release;
          report = run_protocol(pair, spec);
        }
        return to_json(report).dump();
      },
      py::arg("xs"), py::arg("xt"), py::arg("ys"), py::arg("yt"), py::arg("classes"),
      py::arg("config") = SolverConfig{}, py::arg("per_class") = 5, py::arg("repeats") = 10,
      py::arg("seed") = 0,
      py::arg("methods") = std::vector<std::string>{"slsada", "source_only"});

  m.def(
      "knn_weights",
      [](const Matrix& z, int neighbors) { return Matrix(build_knn_graph(z, neighbors).weights); },
      py::arg("z"), py::arg("neighbors"));

  m.def(
      "propagate_labels",
      [](const Matrix& laplacian, int labeled_count, const Matrix& labeled) {
        return propagate_labels(SparseMatrix(laplacian.sparseView()), labeled_count, labeled);
      },
      py::arg("laplacian"), py::arg("labeled_count"), py::arg("labeled"));

  m.def(
      "solve_projection",
      [](const Matrix& kms, const Matrix& x, int k) {
        const Projection p = solve_projection(kms, x, k);
        return py::make_tuple(p.values, p.eigenvalues);
      },
      py::arg("kms"), py::arg("x"), py::arg("k"));

  m.def(
      "marginal_mmd_matrix", [](int ns, int nt) { return build_m0(ns, nt).dense(); },
      py::arg("ns"), py::arg("nt"));

  m.def(
      "intra_class_scatter",
      [](const Matrix& x, const Labels& labels, int classes) {
        return intra_class_scatter(x, labels, classes);
      },
      py::arg("x"), py::arg("labels"), py::arg("classes"));

  m.def(
      "selfcheck",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& c : run_selfcheck(seed)) {
          out.append(py::make_tuple(c.name, c.passed, c.worst, c.tolerance));
        }
        return out;
      },
      py::arg("seed") = 0);

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "slsada");
        std::ostringstream out;
        std::ostringstream err;
        const int code = parse_and_dispatch(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));

  m.attr("__version__") = "0.1.0";
}
