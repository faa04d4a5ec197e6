#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "authformer/data_io.hpp"
#include "authformer/error.hpp"
#include "authformer/gradcheck_suite.hpp"
#include "authformer/harness.hpp"
#include "authformer/ops.hpp"
#include "authformer/train.hpp"

namespace py = pybind11;
using namespace authformer;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

template <typename T>
Tensor<T> to_tensor(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor<T>(shape, std::vector<T>(a.data(), a.data() + a.size()));
}

template <typename T>
py::array_t<T> to_array(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Combination combo_from(const std::vector<std::string>& tags) {
  Combination c;
  for (const auto& t : tags) c.push_back(parse_modality(t));
  return c;
}

std::vector<std::string> tags_of(const Combination& c) {
  std::vector<std::string> out;
  for (auto m : c) out.emplace_back(modality_name(m));
  return out;
}

py::dict metrics_dict(const ClassificationMetrics& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["macro_recall"] = m.macro_recall;
  d["macro_f1"] = m.macro_f1;
  d["recall"] = m.recall;
  d["precision"] = m.precision;
  d["f1"] = m.f1;
  d["support"] = m.support;
  d["confusion"] = m.confusion;
  d["absent_classes"] = m.absent_classes;
  return d;
}

class PyModel {
 public:
  PyModel(const py::dict& config, std::uint64_t seed) : model_(parse_config(config), seed) {}
  explicit PyModel(AuthFormer<float> model) : model_(std::move(model)) {}

  // Keys missing from `config` keep their defaults.
  static ModelConfig parse_config(const py::dict& config) {
    nlohmann::json j = ModelConfig{};
    j.update(nlohmann::json::parse(py::cast<std::string>(py::module_::import("json").attr("dumps")(config))));
    return j.get<ModelConfig>();
  }

  py::array_t<float> forward(std::optional<FloatArray> face, std::optional<FloatArray> fingerprint,
                             std::optional<FloatArray> palmprint, std::optional<FloatArray> voice) const {
    return to_array(model_.forward(raw(face, fingerprint, palmprint, voice)));
  }

  py::tuple predict(std::optional<FloatArray> face, std::optional<FloatArray> fingerprint,
                    std::optional<FloatArray> palmprint, std::optional<FloatArray> voice) const {
    const auto p = predict_from_logits(model_.forward(raw(face, fingerprint, palmprint, voice)));
    return py::make_tuple(p.label, p.probabilities);
  }

  const AuthFormer<float>& get() const { return model_; }

  py::dict config() const {
    nlohmann::json j = model_.config();
    return py::module_::import("json").attr("loads")(j.dump());
  }

 private:
  RawSample<float> raw(const std::optional<FloatArray>& face, const std::optional<FloatArray>& fingerprint,
                       const std::optional<FloatArray>& palmprint, const std::optional<FloatArray>& voice) const {
    RawSample<float> s;
    auto add_image = [&](Modality tag, const std::optional<FloatArray>& a) {
      if (!a) return;
      auto t = to_tensor<float>(*a);
      if (t.rank() == 2) t = Tensor<float>({t.dim(0), t.dim(1), 1}, std::vector<float>(t.data().begin(), t.data().end()));
      s.images.push_back({tag, t});
    };
    add_image(Modality::Face, face);
    add_image(Modality::Fingerprint, fingerprint);
    add_image(Modality::Palmprint, palmprint);
    if (voice) s.sequence = SequenceSample<float>{to_tensor<float>(*voice)};
    return s;
  }

  AuthFormer<float> model_;
};

}  // namespace

PYBIND11_MODULE(_authformer, m) {
  m.doc() = "Multimodal biometric transformer: synthetic data, training, metrics and gradient checks.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("size", &Dataset::size)
      .def_property_readonly("num_classes", [](const Dataset& d) { return d.manifest.num_classes; })
      .def_property_readonly("labels", [](const Dataset& d) { return d.manifest.labels; })
      .def_property_readonly("train_ids", [](const Dataset& d) { return d.ids(SplitSide::Train); })
      .def_property_readonly("test_ids", [](const Dataset& d) { return d.ids(SplitSide::Test); })
      .def_property_readonly("modalities",
                             [](const Dataset& d) {
                               std::vector<std::string> out;
                               for (const auto& md : d.manifest.modalities) out.emplace_back(modality_name(md.tag));
                               return out;
                             })
      .def(
          "values",
          [](const Dataset& d, const std::string& tag) {
            const auto& desc = d.descriptor(parse_modality(tag));
            std::vector<py::ssize_t> shape(desc.shape.begin(), desc.shape.end());
            py::array_t<float> out(shape);
            const auto& v = d.values.at(desc.tag);
            std::copy(v.begin(), v.end(), out.mutable_data());
            return out;
          },
          py::arg("modality"), "All samples of one modality stacked along axis 0.");

  m.def(
      "generate_synthetic",
      [](std::size_t classes, std::size_t samples_per_class, std::uint64_t seed, double noise, double test_fraction) {
        SynthConfig c;
        c.num_classes = classes;
        c.samples_per_class = samples_per_class;
        c.seed = seed;
        c.noise_level = noise;
        c.test_fraction = test_fraction;
        return generate_synthetic(c);
      },
      py::arg("classes") = 8, py::arg("samples_per_class") = 40, py::arg("seed") = 42,
      py::arg("noise") = SynthConfig{}.noise_level, py::arg("test_fraction") = 0.25);
  m.def("save_dataset", [](const Dataset& d, const std::string& dir) { save_dataset(d, dir); });
  m.def("load_dataset", [](const std::string& dir) { return load_dataset(dir); });

  m.def(
      "plan_route", [](const std::vector<std::string>& tags) { return std::string(route_name(plan_route(combo_from(tags)))); },
      py::arg("modalities"));
  m.def("ablation_combinations", [] {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    for (const auto& c : ablation_combinations()) out.emplace_back(std::string(c.label), tags_of(c.modalities));
    return out;
  });

  m.def(
      "softmax", [](const Array& x, std::size_t axis) { return to_array(softmax(to_tensor<double>(x), axis)); },
      py::arg("x"), py::arg("axis") = 0);
  m.def(
      "layer_norm",
      [](const Array& x, double eps) {
        const auto t = to_tensor<double>(x);
        const std::size_t d = t.shape().back();
        return to_array(layer_norm(t, Tensor<double>::full({d}, 1.0), Tensor<double>::zeros({d}), eps));
      },
      py::arg("x"), py::arg("eps") = 1e-5);

  m.def(
      "classification_metrics",
      [](const std::vector<std::size_t>& y_true, const std::vector<std::size_t>& y_pred, std::size_t num_classes) {
        return metrics_dict(classification_metrics(y_true, y_pred, num_classes));
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("num_classes"));
  m.def(
      "compute_eer",
      [](const std::vector<double>& genuine, const std::vector<double>& impostor) {
        const auto r = compute_eer(genuine, impostor);
        py::dict d;
        d["eer"] = r.eer;
        d["threshold"] = r.threshold;
        d["tar"] = r.tar;
        d["frr"] = r.frr;
        d["far"] = r.far;
        return d;
      },
      py::arg("genuine"), py::arg("impostor"));

  py::class_<PyModel>(m, "Model")
      .def(py::init<const py::dict&, std::uint64_t>(), py::arg("config") = py::dict(), py::arg("seed") = 0)
      .def_static(
          "load", [](const std::string& path) { return PyModel(load_checkpoint<float>(path)); }, py::arg("path"))
      .def(
          "save", [](const PyModel& self, const std::string& path) { save_checkpoint(self.get(), path); },
          py::arg("path"))
      .def_property_readonly("config", &PyModel::config)
      .def_property_readonly("parameter_count", [](const PyModel& self) { return self.get().parameter_count(); })
      .def("forward", &PyModel::forward, py::arg("face") = py::none(), py::arg("fingerprint") = py::none(),
           py::arg("palmprint") = py::none(), py::arg("voice") = py::none(), "Class logits for one sample.")
      .def("predict", &PyModel::predict, py::arg("face") = py::none(), py::arg("fingerprint") = py::none(),
           py::arg("palmprint") = py::none(), py::arg("voice") = py::none())
      .def(
          "evaluate",
          [](const PyModel& self, const Dataset& data, std::optional<std::vector<std::string>> modalities) {
            const auto combo = modalities ? combo_from(*modalities) : self.get().config().modalities;
            const auto ids = data.ids(SplitSide::Test);
            return metrics_dict(evaluate_classification(self.get(), data, ids, combo));
          },
          py::arg("data"), py::arg("modalities") = py::none())
      .def(
          "verification_scores",
          [](const PyModel& self, const Dataset& data, std::optional<std::vector<std::string>> modalities) {
            const auto combo = modalities ? combo_from(*modalities) : self.get().config().modalities;
            const auto ids = data.ids(SplitSide::Test);
            const auto s = verification_scores(self.get(), data, ids, combo);
            return py::make_tuple(s.genuine, s.impostor);
          },
          py::arg("data"), py::arg("modalities") = py::none());

  m.def(
      "train",
      [](const Dataset& data, const std::vector<std::string>& modalities, std::size_t epochs, std::size_t layers,
         std::size_t batch_size, double learning_rate, std::uint64_t seed) {
        TrainConfig c;
        c.modalities = combo_from(modalities);
        c.epochs = epochs;
        c.layers = layers;
        c.batch_size = batch_size;
        c.optimizer.learning_rate = learning_rate;
        c.seed = seed;
        std::vector<EpochLog> log;
        AuthFormer<float> model = [&] {
          py::gil_scoped_release release;
          return train_new_model<float>(data, c, &log);
        }();
        std::vector<double> losses;
        for (const auto& e : log) losses.push_back(e.mean_loss);
        return py::make_tuple(PyModel(std::move(model)), losses);
      },
      py::arg("data"), py::arg("modalities") = std::vector<std::string>{"face", "fingerprint", "voice"},
      py::arg("epochs") = 30, py::arg("layers") = 2, py::arg("batch_size") = 16, py::arg("learning_rate") = 1e-3,
      py::arg("seed") = 42, "Trains on the train split; returns (model, per-epoch mean losses).");

  m.def(
      "run_gradcheck",
      [](std::size_t seeds, const std::string& filter) {
        GradcheckOptions o;
        o.seeds = seeds;
        o.filter = filter;
        std::vector<std::tuple<std::string, double, bool>> out;
        for (const auto& r : run_gradcheck(o)) out.emplace_back(r.target, r.max_relative_error, r.passed);
        return out;
      },
      py::arg("seeds") = 2, py::arg("filter") = "");
}
