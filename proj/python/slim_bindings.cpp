// Python bindings for the SLIM core. Matrices cross the boundary as NumPy
// arrays (copied); library exceptions map to slim.Error subclasses.

#include "slim/coherence.hpp"
#include "slim/dataset.hpp"
#include "slim/errors.hpp"
#include "slim/gradcheck_suite.hpp"
#include "slim/landmarks.hpp"
#include "slim/model_io.hpp"
#include "slim/pooling.hpp"
#include "slim/substructure.hpp"
#include "slim/train.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace slim;

namespace {

Graph make_graph(const Mat& adjacency, std::vector<int> node_labels, int class_label) {
  if (adjacency.rows() != adjacency.cols()) throw ShapeError("adjacency must be square");
  if (static_cast<Index>(node_labels.size()) != adjacency.rows()) throw ShapeError("one node label per node required");
  Graph g;
  g.adjacency = adjacency;
  g.node_labels = std::move(node_labels);
  g.class_label = class_label;
  return g;
}

py::dict cv_dict(const CVResult& r) {
  py::dict d;
  d["mean"] = r.mean;
  d["std"] = r.std;
  d["per_fold"] = r.per_fold;
  d["selected_epoch"] = r.selected_epoch;
  d["curve"] = r.curve;
  d["warnings"] = r.warnings;
  return d;
}

std::vector<std::size_t> all_indices(const DatasetBundle& b) {
  std::vector<std::size_t> idx(b.graphs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

}  // namespace

PYBIND11_MODULE(_slim, m) {
  m.doc() = "Structural landmarking and interaction modelling for graph classification";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<RangeError>(m, "RangeError", base.ptr());

  py::class_<Graph>(m, "Graph")
      .def(py::init(&make_graph), py::arg("adjacency"), py::arg("node_labels"), py::arg("class_label") = 0)
      .def_readonly("adjacency", &Graph::adjacency)
      .def_readonly("node_labels", &Graph::node_labels)
      .def_readonly("class_label", &Graph::class_label)
      .def_property_readonly("node_count", &Graph::node_count)
      .def_property_readonly("edge_count", &Graph::edge_count);

  py::class_<DatasetBundle>(m, "Dataset")
      .def(py::init([](std::string name, std::vector<Graph> graphs, int node_label_count, int class_count) {
             DatasetBundle b;
             b.name = std::move(name);
             b.graphs = std::move(graphs);
             b.node_label_count = node_label_count;
             b.class_count = class_count;
             return b;
           }),
           py::arg("name"), py::arg("graphs"), py::arg("node_label_count"), py::arg("class_count"))
      .def_readonly("name", &DatasetBundle::name)
      .def_readonly("graphs", &DatasetBundle::graphs)
      .def_readonly("node_label_count", &DatasetBundle::node_label_count)
      .def_readonly("class_count", &DatasetBundle::class_count)
      .def_readonly("raw_class_labels", &DatasetBundle::raw_class_labels)
      .def_readonly("warnings", &DatasetBundle::warnings)
      .def("__len__", [](const DatasetBundle& b) { return b.graphs.size(); });

  m.def("load_tu_dataset", &load_tu_dataset, py::arg("root"), py::arg("name"));
  m.def("write_tu_dataset", &write_tu_dataset, py::arg("dataset"), py::arg("directory"));
  m.def("one_hot_features", &one_hot_features, py::arg("graph"), py::arg("node_types"));
  m.def("make_folds", [](const DatasetBundle& b, int folds, std::uint64_t seed) { return make_folds(b, folds, seed).assignments; },
        py::arg("dataset"), py::arg("folds") = 10, py::arg("seed") = 0);

  m.def("hop_distances", &hop_distances, py::arg("adjacency"), py::arg("max_hops"));
  m.def(
      "build_substructures",
      [](const Graph& g, int node_types, int hops, const std::string& variant, double layer_decay) {
        SubstructureConfig cfg{hops, parse_variant(variant), layer_decay};
        return build_substructures(g, one_hot_features(g, node_types), cfg);
      },
      py::arg("graph"), py::arg("node_types"), py::arg("hops") = 3, py::arg("variant") = "node-distribution",
      py::arg("layer_decay") = 0.5);

  m.def("cooccurrence_loss", py::overload_cast<const Mat&, const Mat&>(&cooccurrence_loss), py::arg("h"),
        py::arg("adjacency"));
  m.def(
      "soft_assign", [](const Mat& h, const Mat& u, double dof) { return assign(h, LandmarkSet{u, dof}); }, py::arg("h"),
      py::arg("landmarks"), py::arg("dof") = 1.0);
  m.def("target_distribution", &target_distribution, py::arg("w"));
  m.def("cluster_loss", py::overload_cast<const Mat&, const Mat&>(&cluster_loss), py::arg("w"), py::arg("target"));
  m.def(
      "init_landmarks",
      [](const Mat& points, int K, std::uint64_t seed, int restarts) {
        KMeansOptions opt;
        opt.restarts = restarts;
        KMeansResult r = init_landmarks(points, K, seed, opt);
        return py::make_tuple(r.landmarks.U, r.distortion, r.warnings);
      },
      py::arg("points"), py::arg("K"), py::arg("seed") = 0, py::arg("restarts") = 3);

  m.def(
      "pool",
      [](const Mat& x, const Mat& w, const Mat& adjacency) {
        const PooledFeatures pf = pool(x, w, adjacency);
        py::dict d;
        d["p"] = pf.p;
        d["M"] = pf.M;
        d["C"] = pf.C;
        d["C_norm"] = pf.C_norm;
        return d;
      },
      py::arg("x"), py::arg("w"), py::arg("adjacency"));

  m.def("mutual_coherence", &mutual_coherence, py::arg("landmarks"));
  m.def("recovery_support_bound", &recovery_support_bound, py::arg("mu"));
  m.def("unit_ball_volume", &unit_ball_volume, py::arg("d"));
  m.def("floor_root", &floor_root, py::arg("x"), py::arg("d"));
  m.def(
      "lower_bound",
      [](int d, double K, double cd_cp_over_umax2) -> py::object {
        const BoundValue b = theorem1_lower_bound_scaled(d, K, cd_cp_over_umax2);
        if (b.vacuous) return py::none();
        return py::float_(b.value);
      },
      py::arg("d"), py::arg("K"), py::arg("cd_cp_over_umax2"));

  m.def(
      "gradcheck",
      [](std::uint64_t seed, double step, double tolerance) {
        py::list out;
        for (const auto& r : run_gradcheck_suite(seed, step, tolerance)) {
          py::dict d;
          d["op"] = r.op_name;
          d["max_relative_error"] = r.max_relative_error;
          d["passed"] = r.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 0, py::arg("step") = 1e-5, py::arg("tolerance") = 1e-4);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("K", &TrainConfig::K)
      .def_readwrite("latent", &TrainConfig::latent)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("lambda_embed", &TrainConfig::lambda_embed)
      .def_readwrite("lambda_cluster", &TrainConfig::lambda_cluster)
      .def_readwrite("dof", &TrainConfig::dof)
      .def_readwrite("semi_supervised", &TrainConfig::semi_supervised)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_property(
          "hops", [](const TrainConfig& c) { return c.substructure.hops; },
          [](TrainConfig& c, int h) { c.substructure.hops = h; })
      .def_property(
          "variant", [](const TrainConfig& c) { return to_string(c.substructure.variant); },
          [](TrainConfig& c, const std::string& v) { c.substructure.variant = parse_variant(v); })
      .def_property(
          "optimizer", [](const TrainConfig& c) { return to_string(c.optimizer); },
          [](TrainConfig& c, const std::string& v) { c.optimizer = parse_optimizer(v); })
      .def_property(
          "activation", [](const TrainConfig& c) { return to_string(c.activation); },
          [](TrainConfig& c, const std::string& v) { c.activation = parse_activation(v); })
      .def("validate", &TrainConfig::validate);

  py::class_<ModelState>(m, "Model")
      .def_readonly("node_types", &ModelState::node_types)
      .def_readonly("class_count", &ModelState::class_count)
      .def_property_readonly("landmarks", [](const ModelState& s) { return s.landmarks.U; })
      .def(
          "predict",
          [](const ModelState& s, const DatasetBundle& b) {
            const auto graphs = prepare_graphs(b, s.substructure);
            const auto idx = all_indices(b);
            return predict(s, graphs, idx);
          },
          py::arg("dataset"))
      .def(
          "assignment",
          [](const ModelState& s, const DatasetBundle& b, std::size_t index) {
            DatasetBundle one = b;
            one.graphs = {b.graphs.at(index)};
            return soft_assignment(s, prepare_graphs(one, s.substructure).front());
          },
          py::arg("dataset"), py::arg("index"))
      .def("save", [](const ModelState& s, const std::filesystem::path& p) { save_model(s, p); }, py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));

  m.def(
      "train",
      [](const DatasetBundle& b, const TrainConfig& cfg) {
        py::gil_scoped_release release;
        const auto graphs = prepare_graphs(b, cfg.substructure);
        TrainSplit split;
        split.train = all_indices(b);
        return train(graphs, split, cfg, b.node_label_count, b.class_count).model;
      },
      py::arg("dataset"), py::arg("config"));

  m.def(
      "cross_validate",
      [](const DatasetBundle& b, const TrainConfig& cfg, int folds, int jobs) {
        CVResult r;
        {
          py::gil_scoped_release release;
          r = cross_validate(b, cfg, make_folds(b, folds, cfg.seed), jobs);
        }
        return cv_dict(r);
      },
      py::arg("dataset"), py::arg("config"), py::arg("folds") = 10, py::arg("jobs") = 1);

  m.attr("MODEL_FORMAT_VERSION") = kModelFormatVersion;
}
