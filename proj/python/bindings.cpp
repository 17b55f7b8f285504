#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <limits>

#include "covspd/covariance.hpp"
#include "covspd/diagnostics.hpp"
#include "covspd/errors.hpp"
#include "covspd/eval.hpp"
#include "covspd/fusion.hpp"
#include "covspd/kernel.hpp"
#include "covspd/pipeline.hpp"
#include "covspd/region.hpp"
#include "covspd/spd.hpp"
#include "covspd/tensorio.hpp"

namespace py = pybind11;
using namespace covspd;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

FloatArray tensor_to_array(const FeatureTensor& t) {
  FloatArray out({t.maps(), t.height(), t.width()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

FeatureTensor array_to_tensor(const FloatArray& a) {
  if (a.ndim() != 3) throw UsageError("feature tensor must be a 3-d array (maps, height, width)");
  std::vector<float> data(a.data(), a.data() + a.size());
  return FeatureTensor(static_cast<std::uint32_t>(a.shape(0)), static_cast<std::uint32_t>(a.shape(1)),
                       static_cast<std::uint32_t>(a.shape(2)), std::move(data));
}

std::vector<LogDescriptor> to_logs(const std::vector<Eigen::MatrixXd>& logs) {
  std::vector<LogDescriptor> out;
  out.reserve(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) out.push_back({std::to_string(i), "global", SymMatrix(logs[i])});
  return out;
}

nlohmann::json parse_json(const std::string& text) {
  return text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
}

FusionConfig make_fusion(const std::map<std::string, double>& weights, const std::string& method) {
  FusionConfig cfg;
  cfg.method = fusion_method_from_string(method);
  cfg.weights = weights;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_covspd, m) {
  m.doc() = "Covariance descriptors on SPD manifolds with a log-Euclidean RBF SVM";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
  py::register_exception<UsageError>(m, "UsageError", error.ptr());

  auto* warning_category = new py::object(py::reinterpret_steal<py::object>(
      PyErr_NewException("covspd._covspd.CovspdWarning", PyExc_UserWarning, nullptr)));
  m.attr("CovspdWarning") = *warning_category;
  set_warning_handler([warning_category](std::string_view message) {
    py::gil_scoped_acquire gil;
    if (PyErr_WarnEx(warning_category->ptr(), std::string(message).c_str(), 1) < 0) throw py::error_already_set();
  });

  m.def("load_tensor", [](const std::filesystem::path& path) { return tensor_to_array(load_feature_tensor(path)); },
        py::arg("path"), "Read an FMT1 file as a float32 array of shape (maps, height, width).");
  m.def("save_tensor",
        [](const std::filesystem::path& path, const FloatArray& a) { save_feature_tensor(array_to_tensor(a), path); },
        py::arg("path"), py::arg("tensor"), "Write a (maps, height, width) array as FMT1.");
  m.def("resize_feature_maps",
        [](const FloatArray& a, std::uint32_t h, std::uint32_t w) {
          return tensor_to_array(resize_feature_maps(array_to_tensor(a), h, w));
        },
        py::arg("tensor"), py::arg("height"), py::arg("width"), "Bilinear resize of every feature map.");

  m.def("map_point",
        [](double x, double y, double s, int width, int height) {
          const Cell c = map_point({x, y}, s, {width, height});
          return std::make_pair(c.col, c.row);
        },
        py::arg("x"), py::arg("y"), py::arg("s") = 1.0 / 16.0, py::arg("width") = 14, py::arg("height") = 14,
        "Map an image point to a feature-map cell, returned as (col, row).");

  m.def("compute_covariance",
        [](const Eigen::MatrixXd& observations) {
          return compute_covariance(ObservationMatrix(observations)).values();
        },
        py::arg("observations"), "Sample covariance of the columns of a (dim, count) matrix.");
  m.def("tensor_covariance",
        [](const FloatArray& a) { return compute_covariance(tensor_to_observations(array_to_tensor(a))).values(); },
        py::arg("tensor"), "Covariance of a (maps, height, width) tensor over all positions.");
  m.def("regularize",
        [](const Eigen::MatrixXd& c, double epsilon) { return regularize(SymMatrix(c), epsilon).values(); },
        py::arg("c"), py::arg("epsilon") = 1e-4, "C + epsilon I, checked to be SPD.");
  m.def("matrix_log",
        [](const Eigen::MatrixXd& c, double bound) { return matrix_log(SpdMatrix(SymMatrix(c), bound)).values(); },
        py::arg("c"), py::arg("min_eigenvalue") = std::numeric_limits<double>::min(),
        "Spectral logarithm of an SPD matrix.");
  m.def("log_euclidean_distance",
        [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
          const double tiny = std::numeric_limits<double>::min();
          return log_euclidean_distance(SpdMatrix(SymMatrix(a), tiny), SpdMatrix(SymMatrix(b), tiny));
        },
        py::arg("a"), py::arg("b"), "||log A - log B||_F for SPD matrices.");
  m.def("rbf_kernel", &rbf_from_squared_distance, py::arg("squared_distance"), py::arg("gamma"),
        "exp(-gamma d^2), clamped below to the smallest positive double.");
  m.def("gram_matrix",
        [](const std::vector<Eigen::MatrixXd>& logs, double gamma) { return gram_matrix(to_logs(logs), gamma).values; },
        py::arg("logs"), py::arg("gamma"), "RBF Gram matrix of matrix logarithms.");
  m.def("video_distance",
        [](const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b, const std::string& pairing) {
          const auto la = to_logs(a);
          const auto lb = to_logs(b);
          return video_distance(la, lb,
                                pairing == "frame_matched" ? FramePairing::kFrameMatched : FramePairing::kAllPairs);
        },
        py::arg("a"), py::arg("b"), py::arg("pairing") = "all_pairs",
        "Mean log-Euclidean distance between two frame sets.");

  m.def("fuse",
        [](const std::map<std::string, std::vector<double>>& scores, const std::map<std::string, double>& weights,
           const std::string& method) {
          std::map<std::string, ClassScores> in;
          for (const auto& [r, v] : scores) in[r] = ClassScores{v};
          const FusionResult f = fuse(in, make_fusion(weights, method));
          return std::make_pair(f.scores.values, f.predicted);
        },
        py::arg("scores"), py::arg("weights"), py::arg("method") = "weighted_sum",
        "Fuse per-region class scores; returns (scores, predicted class).");
  m.def("preset_weights",
        [](const std::string& name) { return preset_config(name, FusionMethod::kWeightedSum).weights; },
        py::arg("name"), "Region weights of the oulu or sfew preset.");

  m.def("make_folds",
        [](const std::vector<std::string>& subjects, int k, std::uint64_t seed) {
          return make_folds(subjects, k, seed).fold_of;
        },
        py::arg("subjects"), py::arg("k"), py::arg("seed") = 0, "Subject-independent fold assignment.");

  m.def("_synthesize",
        [](const std::filesystem::path& dir, int subjects, double separation, std::uint64_t seed) {
          SynthConfig c;
          c.subjects = subjects;
          c.separation = separation;
          c.seed = seed;
          synthesize_dataset(c, dir);
          return dir / "manifest.json";
        },
        py::arg("dir"), py::arg("subjects"), py::arg("separation"), py::arg("seed"));
  m.def("_extract",
        [](const std::filesystem::path& manifest, const std::filesystem::path& out, const std::string& config) {
          PipelineConfig c = config_from_json(parse_json(config));
          c.manifest = manifest;
          const DescriptorStore store = extract_descriptors(load_dataset_manifest(manifest), c);
          save_descriptor_store(store, out);
          return store.samples.size();
        },
        py::arg("manifest"), py::arg("out"), py::arg("config"));
  m.def("_cross_validate",
        [](const std::filesystem::path& store, const std::string& config) {
          const CrossValidationResult r = cross_validate(load_descriptor_store(store), config_from_json(parse_json(config)));
          nlohmann::json j = report_to_json(r.report);
          j["fold_accuracy"] = r.fold_accuracy;
          return j.dump();
        },
        py::arg("store"), py::arg("config"));
}
