// Python module over the core library: generation, datasets, normalization,
// metrics, models, training and evaluation. Matrices cross as NumPy arrays.

#include "cyclebench/dataset_io.hpp"
#include "cyclebench/eval.hpp"
#include "cyclebench/metrics.hpp"
#include "cyclebench/signal.hpp"
#include "cyclebench/synth.hpp"
#include "cyclebench/train.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace cyclebench;

namespace {

py::dict stats_dict(const ModelAggregate& a) {
  py::dict d;
  for (const auto& [name, s] : a.stats) d[py::str(name)] = py::make_tuple(s.mean, s.std, s.count);
  return d;
}

}  // namespace

PYBIND11_MODULE(_cyclebench, m) {
  m.doc() = "Cell-cycle phase regression benchmark";
  m.attr("__version__") = "0.1.0";

  py::enum_<Split>(m, "Split").value("train", Split::train).value("val", Split::val).value("test", Split::test);
  py::enum_<HeadKind>(m, "HeadKind")
      .value("single_frame_mlp", HeadKind::single_frame_mlp)
      .value("causal_cnn", HeadKind::causal_cnn)
      .value("lstm", HeadKind::lstm)
      .value("ssm", HeadKind::ssm)
      .value("transformer", HeadKind::transformer);

  py::class_<Landmarks>(m, "Landmarks")
      .def_readonly("t_g1s", &Landmarks::t_g1s)
      .def_readonly("t_sg2", &Landmarks::t_sg2);

  py::class_<Track>(m, "Track")
      .def(py::init<>())
      .def_readwrite("id", &Track::id)
      .def_readwrite("features", &Track::features)
      .def_readwrite("targets", &Track::targets)
      .def_readwrite("frame_interval_min", &Track::frame_interval_min)
      .def_readonly("landmarks", &Track::landmarks)
      .def_readwrite("tags", &Track::tags)
      .def_property_readonly("n_frames", &Track::n_frames)
      .def("__repr__", [](const Track& t) {
        return "<Track " + t.id + " " + std::to_string(t.n_frames()) + " frames>";
      });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("tracks", &Dataset::tracks)
      .def_readwrite("split", &Dataset::split)
      .def_readonly("seed", &Dataset::seed)
      .def("find", &Dataset::find, py::return_value_policy::reference_internal)
      .def("ids_in", [](const Dataset& d, Split s) {
        std::vector<std::string> ids;
        for (const Track* t : d.tracks_in(s)) ids.push_back(t->id);
        return ids;
      })
      .def("__len__", [](const Dataset& d) { return d.tracks.size(); })
      .def("__eq__", [](const Dataset& a, const Dataset& b) { return a == b; });

  m.def("crop", &crop, py::arg("track"), py::arg("tau1"), py::arg("tau2"));
  m.def("split_dataset", &split_dataset, py::arg("dataset"), py::arg("fractions"), py::arg("seed"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("dir"));
  m.def("load_dataset", &load_dataset, py::arg("dir"));

  m.def("gen_dataset",
        [](const std::string& preset_name, std::size_t n_tracks, std::uint64_t seed) {
          return gen_dataset(preset(preset_name), n_tracks, seed);
        },
        py::arg("preset") = "regular", py::arg("n_tracks") = 500, py::arg("seed") = 0,
        "Synthetic tracks from a named preset: regular, drug, informative, drug-informative.");

  m.def("normalize_fucci", &normalize_fucci, py::arg("fbar"), py::arg("epsilon"));
  m.def("denormalize_fucci", &denormalize_fucci, py::arg("value"), py::arg("epsilon"));
  m.def("percentile", &percentile, py::arg("samples"), py::arg("p"));
  m.def("smooth", [](const std::vector<double>& x, int window) { return smooth(x, window); }, py::arg("signal"),
        py::arg("window") = kDetectionWindow);

  m.def("dtw", &dtw, py::arg("a"), py::arg("b"), py::arg("penalty") = kDtwPenalty);
  m.def("detect_checkpoints",
        [](const Matrix& y) {
          auto c = detect_checkpoints(y);
          return py::make_tuple(c.t_g1s, c.t_sg2);
        },
        py::arg("targets"), "(t_g1s, t_sg2) frame indices from log-space targets; None when not found.");
  m.def("track_metrics",
        [](const Matrix& yhat, const Matrix& y, double interval) {
          auto t = track_metrics(yhat, y, interval);
          py::dict d;
          d["l1_fucci1"] = t.l1_fucci1;
          d["l1_fucci2"] = t.l1_fucci2;
          d["r2"] = t.r2;
          d["dtw"] = t.dtw;
          d["dt_g1s_min"] = t.dt_g1s_min;
          d["dt_sg2_min"] = t.dt_sg2_min;
          d["phase_f1"] = t.phase_f1;
          return d;
        },
        py::arg("yhat"), py::arg("y"), py::arg("frame_interval_min") = 5.0);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("head", &ModelConfig::head)
      .def_readwrite("causal", &ModelConfig::causal)
      .def_readwrite("input_dim", &ModelConfig::input_dim)
      .def_readwrite("encoder_dim", &ModelConfig::encoder_dim)
      .def_readwrite("head_layers", &ModelConfig::head_layers)
      .def_readwrite("head_hidden", &ModelConfig::head_hidden)
      .def_readwrite("attention_heads", &ModelConfig::attention_heads)
      .def_readwrite("rope_base", &ModelConfig::rope_base)
      .def_readwrite("seed", &ModelConfig::seed);
  m.def("parity_table", &parity_table, py::arg("config"));

  py::class_<SequenceModel>(m, "SequenceModel")
      .def_static("build", &SequenceModel::build, py::arg("config"))
      .def("predict", &SequenceModel::predict, py::arg("features"))
      .def_property_readonly("name", &SequenceModel::name)
      .def_property_readonly("param_count", &SequenceModel::param_count)
      .def_property_readonly("head_param_count", &SequenceModel::head_param_count)
      .def_property_readonly("is_causal", &SequenceModel::is_causal)
      .def_property_readonly("receptive_field", &SequenceModel::receptive_field);
  m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"), py::arg("expected_input_dim") = std::nullopt);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("subtrack_min", &TrainConfig::subtrack_min)
      .def_readwrite("subtrack_max", &TrainConfig::subtrack_max)
      .def_readwrite("full_track_prob", &TrainConfig::full_track_prob)
      .def_readwrite("augment_noise_std", &TrainConfig::augment_noise_std)
      .def_readwrite("seed", &TrainConfig::seed);

  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);
  m.def("train",
        [](SequenceModel& model, const Dataset& ds, const TrainConfig& cfg) {
          TrainResult r;
          {
            py::gil_scoped_release release;
            r = train(model, ds, cfg);
          }
          py::list history;
          for (const auto& e : r.history) history.append(py::make_tuple(e.epoch, e.train_l1, e.val_l1));
          return history;
        },
        py::arg("model"), py::arg("dataset"), py::arg("config"),
        "Trains in place and returns [(epoch, train_l1, val_l1), ...].");

  m.def("evaluate",
        [](const SequenceModel& model, const Dataset& ds, std::optional<Split> split, bool oracle) {
          std::vector<Predictor> ps{model_predictor(model)};
          if (oracle) ps.push_back(oracle_predictor());
          EvalOptions opt;
          opt.keep_exemplars = false;
          auto rep = evaluate_full(ps, ds, split, opt);
          py::dict out;
          for (const auto& a : rep.aggregates) out[py::str(a.model)] = stats_dict(a);
          return out;
        },
        py::arg("model"), py::arg("dataset"), py::arg("split") = Split::test, py::arg("oracle") = false,
        "Per-model {metric: (mean, std, count)}.");
}
