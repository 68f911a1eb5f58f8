#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "arst/cli.hpp"
#include "arst/config.hpp"
#include "arst/inference.hpp"
#include "arst/io.hpp"
#include "arst/metrics.hpp"
#include "arst/pipeline.hpp"
#include "arst/synthdata.hpp"
#include "arst/training.hpp"

namespace py = pybind11;
using namespace arst;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

RunConfig config_from(const py::object& o) {
  if (o.is_none()) return default_run_config("desk");
  if (py::isinstance<py::str>(o)) return parse_run_config(o.cast<std::string>());
  return run_config_from_json(from_py(o));
}

Matrix<float> to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw DimensionError("features must be a 2-D array (frames x d_feat)");
  Matrix<float> m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

template <typename S>
py::array_t<S> to_array(const Matrix<S>& m) {
  py::array_t<S> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

py::dict stream_dict(const StreamResult& r) {
  const std::size_t c = r.probs.empty() ? 0 : r.probs.front().size();
  py::array_t<double> probs({r.frames(), c});
  double* p = probs.mutable_data();
  for (const auto& row : r.probs) p = std::copy(row.begin(), row.end(), p);
  py::list decisions;
  for (const auto& d : r.decisions) {
    decisions.append(py::dict(py::arg("frame") = d.frame, py::arg("from_phase") = d.from, py::arg("to_phase") = d.to,
                              py::arg("lookahead") = d.lookahead, py::arg("accepted") = d.accepted));
  }
  py::dict out;
  out["committed"] = r.committed;
  out["greedy"] = r.greedy;
  out["probs"] = probs;
  out["latency_ms"] = r.latency_ms;
  out["decisions"] = decisions;
  return out;
}

Video make_video(const std::string& id, const FloatArray& features, const std::vector<int>& labels) {
  Video v;
  v.id = id;
  v.features = to_matrix(features);
  v.labels = labels;
  if (v.features.rows() != v.labels.size()) {
    throw LengthMismatchError("video '" + id + "': " + std::to_string(v.features.rows()) + " feature rows for " +
                              std::to_string(v.labels.size()) + " labels");
  }
  return v;
}

std::vector<Video> videos_from(const py::list& items) {
  std::vector<Video> out;
  for (const auto& item : items) {
    const auto d = item.cast<py::dict>();
    out.push_back(make_video(d["id"].cast<std::string>(), d["features"].cast<FloatArray>(),
                             d["labels"].cast<std::vector<int>>()));
  }
  return out;
}

struct PyModel {
  RunConfig config;
  ArstModel<float> model;
};

}  // namespace

PYBIND11_MODULE(_arst, m) {
  m.doc() = "Banded-mask auto-regressive transformer for online phase recognition";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<LengthMismatchError>(m, "LengthMismatchError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<TrainingNumericError>(m, "TrainingNumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "default_config", [](const std::string& profile) { return to_py(run_config_to_json(default_run_config(profile))); },
      py::arg("profile") = "desk", "Run config defaults for 'desk' or 'full' as a dict.");
  m.def(
      "parse_config", [](const py::object& cfg) { return to_py(run_config_to_json(config_from(cfg))); },
      py::arg("config"), "Validate a config dict or JSON string and return it with defaults filled in.");
  m.def(
      "parameter_count", [](const py::object& cfg) { return parameter_count(config_from(cfg).model); },
      py::arg("config") = py::none());

  py::class_<PyModel>(m, "Model")
      .def(py::init([](const py::object& cfg, std::optional<std::uint64_t> seed) {
             PyModel pm{config_from(cfg), {}};
             pm.model = ArstModel<float>(pm.config.model);
             pm.model.init(seed ? *seed : pm.config.init_seed());
             return pm;
           }),
           py::arg("config") = py::none(), py::arg("seed") = py::none(),
           "Randomly initialised model; the seed defaults to the config's init seed.")
      .def_static(
          "load",
          [](const std::string& path) {
            auto ck = load_checkpoint(path);
            return PyModel{ck.config, std::move(ck.model)};
          },
          py::arg("path"))
      .def(
          "save", [](const PyModel& pm, const std::string& path) { save_checkpoint(path, pm.model, pm.config); },
          py::arg("path"))
      .def_property_readonly("config", [](const PyModel& pm) { return to_py(run_config_to_json(pm.config)); })
      .def_property_readonly("parameter_count", [](const PyModel& pm) { return parameter_count(pm.model.cfg); })
      .def(
          "forward",
          [](const PyModel& pm, const FloatArray& features, const std::vector<int>& labels) {
            const auto f = to_matrix(features);
            if (labels.size() != f.rows()) throw LengthMismatchError("forward: one label per frame is required");
            return to_array(pm.model.forward_teacher_forced(f, shift_labels(labels)));
          },
          py::arg("features"), py::arg("labels"),
          "Teacher-forced logits (frames x classes), feeding BOS then labels[:-1].")
      .def(
          "stream",
          [](const PyModel& pm, const FloatArray& features, bool cci, std::size_t n) {
            const CciConfig c{cci, n};
            c.validate();
            const auto f = to_matrix(features);
            StreamResult r;
            {
              py::gil_scoped_release release;
              r = run_stream(pm.model, f, c);
            }
            return stream_dict(r);
          },
          py::arg("features"), py::arg("cci") = false, py::arg("n") = 10,
          "Frame-by-frame auto-regressive decoding with optional consistency check.")
      .def(
          "bench",
          [](const PyModel& pm, std::size_t frames, bool cci, std::size_t n, std::uint64_t seed) {
            return to_py(latency_report_json(bench_latency(pm.model, CciConfig{cci, n}, frames, seed)));
          },
          py::arg("frames") = 2000, py::arg("cci") = false, py::arg("n") = 10, py::arg("seed") = 0);

  m.def(
      "train",
      [](const py::object& cfg, const py::list& videos) {
        const RunConfig c = config_from(cfg);
        const auto vs = videos_from(videos);
        std::vector<double> losses;
        PyModel pm{c, {}};
        {
          py::gil_scoped_release release;
          pm.model = train_model(c, vs, [&](std::size_t, double l) { losses.push_back(l); });
        }
        return py::make_tuple(py::cast(std::move(pm)), losses);
      },
      py::arg("config"), py::arg("videos"),
      "Train a fresh model on dicts with 'id', 'features' and 'labels'. Returns (model, per-epoch losses).");

  m.def(
      "generate",
      [](const py::object& cfg) {
        const RunConfig c = config_from(cfg);
        const auto ds = gen_dataset(c.workflow, c.seed, c.data);
        py::list out;
        for (const auto& e : ds.entries) {
          out.append(py::dict(py::arg("id") = e.video.id, py::arg("split") = to_string(e.split),
                              py::arg("features") = to_array(e.video.features), py::arg("labels") = e.video.labels,
                              py::arg("hard_frames") = e.hard_frames));
        }
        return out;
      },
      py::arg("config") = py::none(), "Synthetic videos from the config's workflow, seed and data counts.");

  m.def(
      "eval_video",
      [](const std::vector<int>& pred, const std::vector<int>& gt, const std::string& id) {
        return to_py(eval_report_json(aggregate({eval_video(pred, gt, id)})).at("videos").at(0));
      },
      py::arg("pred"), py::arg("gt"), py::arg("id") = "");
  m.def(
      "evaluate",
      [](const std::vector<std::vector<int>>& preds, const std::vector<std::vector<int>>& gts) {
        if (preds.size() != gts.size()) throw LengthMismatchError("evaluate: prediction and ground-truth counts differ");
        std::vector<VideoEval> evals;
        for (std::size_t i = 0; i < preds.size(); ++i) evals.push_back(eval_video(preds[i], gts[i], std::to_string(i)));
        return to_py(eval_report_json(aggregate(std::move(evals))));
      },
      py::arg("preds"), py::arg("gts"), "Per-video and aggregate report, as written by the eval command.");
  m.def("render_ribbon_svg", [](const std::vector<int>& pred, const std::vector<int>& gt) {
    return render_ribbon_svg(pred, gt);
  });

  m.def(
      "read_features", [](const std::string& path) { return to_array(read_features(path)); }, py::arg("path"));
  m.def(
      "write_features", [](const std::string& path, const FloatArray& a) { write_features(path, to_matrix(a)); },
      py::arg("path"), py::arg("features"));
  m.def("read_labels", [](const std::string& path) { return read_labels(path); }, py::arg("path"));
  m.def("read_phase_sequence", [](const std::string& path) { return read_phase_sequence(path); }, py::arg("path"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run one command line in-process. Returns (exit code, stdout, stderr).");
}
