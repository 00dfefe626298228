#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "jepa_fer/checkpoint.hpp"
#include "jepa_fer/checks.hpp"
#include "jepa_fer/data/clips.hpp"
#include "jepa_fer/data/folds.hpp"
#include "jepa_fer/data/synth.hpp"
#include "jepa_fer/error.hpp"
#include "jepa_fer/eval/metrics.hpp"
#include "jepa_fer/eval/protocol.hpp"
#include "jepa_fer/gradcheck.hpp"

namespace py = pybind11;
using namespace jepa_fer;

namespace {

eval::ConfusionMatrix to_matrix(const std::vector<std::vector<std::size_t>>& counts) {
  eval::ConfusionMatrix cm(counts.size());
  for (std::size_t t = 0; t < counts.size(); ++t) {
    if (counts[t].size() != counts.size()) throw DimensionError("confusion matrix must be square");
    for (std::size_t p = 0; p < counts.size(); ++p) cm.add(t, p, counts[t][p]);
  }
  return cm;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "V-JEPA pre-training and attentive-probe FER evaluation (C++ core)";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("uar", [](const std::vector<std::vector<std::size_t>>& cm) { return eval::uar(to_matrix(cm)); },
        py::arg("confusion"), "Unweighted average recall; rows are ground truth.");
  m.def("war", [](const std::vector<std::vector<std::size_t>>& cm) { return eval::war(to_matrix(cm)); },
        py::arg("confusion"), "Weighted average recall (accuracy).");

  m.def("vote_mv", [](const std::vector<std::vector<double>>& p) { return eval::vote_mv(p).predicted; },
        py::arg("clip_probs"));
  m.def("vote_pbv", [](const std::vector<std::vector<double>>& p) { return eval::vote_pbv(p).predicted; },
        py::arg("clip_probs"));

  m.def("enumerate_clips",
        [](std::size_t duration, std::size_t stride) { return data::enumerate_clips(duration, 16, 4, stride); },
        py::arg("duration"), py::arg("stride") = 1, "Start frames of every 16-frame, skip-4 clip.");

  m.def(
      "pca2",
      [](const std::vector<std::vector<double>>& rows) {
        const auto p = eval::pca2(rows);
        py::dict out;
        out["coords"] = p.coords;
        out["variance"] = p.variance;
        out["total_variance"] = p.total_variance;
        return out;
      },
      py::arg("rows"));

  m.def("crema_d_folds", [] { return data::crema_d_table_plan().folds; });

  m.def(
      "gen_synthetic",
      [](const std::filesystem::path& out, std::size_t subjects, std::size_t videos_per_class, std::size_t size,
         std::uint64_t seed) {
        data::SynthConfig cfg;
        cfg.subjects = subjects;
        cfg.videos_per_subject_class = videos_per_class;
        cfg.height = cfg.width = size;
        cfg.seed = seed;
        const auto manifest = data::gen_synthetic(cfg, out);
        return manifest.records.size();
      },
      py::arg("out"), py::arg("subjects") = 10, py::arg("videos_per_class") = 2, py::arg("size") = 64,
      py::arg("seed") = 0, "Writes videos/ and manifest.csv under `out`; returns the video count.");

  m.def(
      "checkpoint_entries",
      [](const std::filesystem::path& path) {
        std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
        for (const auto& [name, t] : Checkpoint::load(path).entries()) out.emplace_back(name, t.shape());
        return out;
      },
      py::arg("path"));
  m.def("checkpoint_checksum", [](const std::filesystem::path& path) { return Checkpoint::load(path).checksum(); },
        py::arg("path"));

  m.def(
      "gradcheck",
      [](std::uint64_t seed, std::size_t trials, double tolerance) {
        auto results = primitive_gradcheck_suite(seed, trials, tolerance);
        for (auto& r : model_gradcheck_suite(seed, 1, tolerance)) results.push_back(r);
        std::vector<std::tuple<std::string, double, bool>> out;
        for (const auto& r : results) out.emplace_back(r.name, r.max_rel_error, r.passed);
        return out;
      },
      py::arg("seed") = 0, py::arg("trials") = 3, py::arg("tolerance") = 1e-4,
      "(name, max relative error, passed) for every primitive and model composite.");
}
