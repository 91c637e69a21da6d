// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "auglab/augment.hpp"
#include "auglab/checkpoint.hpp"
#include "auglab/config.hpp"
#include "auglab/dataset.hpp"
#include "auglab/errors.hpp"
#include "auglab/losses.hpp"
#include "auglab/model.hpp"
#include "auglab/policy.hpp"
#include "auglab/pruning.hpp"
#include "auglab/rng.hpp"
#include "auglab/scheme.hpp"
#include "auglab/selection.hpp"
#include "auglab/tensor.hpp"
#include "auglab/train.hpp"

namespace py = pybind11;
using namespace auglab;

namespace {

Tensor tensor_from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> arr,
                         bool requires_grad) {
  Shape shape(arr.ndim());
  for (int i = 0; i < arr.ndim(); ++i) shape[size_t(i)] = arr.shape(i);
  std::vector<double> data(arr.data(), arr.data() + arr.size());
  Tensor t = Tensor::from_data(std::move(shape), std::move(data));
  t.set_requires_grad(requires_grad);
  return t;
}

py::array_t<double> numpy_from_buffer(const Shape& shape, const std::vector<double>& data) {
  std::vector<py::ssize_t> dims(shape.begin(), shape.end());
  py::array_t<double> arr(dims);
  std::copy(data.begin(), data.end(), arr.mutable_data());
  return arr;
}

Image image_from_numpy(py::array_t<uint8_t, py::array::c_style | py::array::forcecast> arr) {
  if (arr.ndim() != 3) throw ContractError("image arrays must be (h, w, c) uint8");
  Image img(int(arr.shape(0)), int(arr.shape(1)), int(arr.shape(2)));
  std::copy(arr.data(), arr.data() + arr.size(), img.pixels.begin());
  return img;
}

py::array_t<uint8_t> numpy_from_image(const Image& img) {
  py::array_t<uint8_t> arr({py::ssize_t(img.height), py::ssize_t(img.width),
                            py::ssize_t(img.channels)});
  std::copy(img.pixels.begin(), img.pixels.end(), arr.mutable_data());
  return arr;
}

}  // namespace

PYBIND11_MODULE(_auglab, m) {
  m.doc() = "auglab core: tensors with reverse-mode autodiff, RandAugment ops, "
            "L1 pruning, magnitude policies and teacher-filtered selection";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<NumericError>(m, "NumericError");
  py::register_exception<Error>(m, "AuglabError");

  // ---- tensor core ----
  py::class_<Tensor>(m, "Tensor")
      .def(py::init([](py::array_t<double, py::array::c_style | py::array::forcecast> arr,
                       bool requires_grad) { return tensor_from_numpy(arr, requires_grad); }),
           py::arg("array"), py::arg("requires_grad") = false)
      .def_property_readonly("shape", [](const Tensor& t) { return t.shape(); })
      .def_property_readonly("requires_grad", &Tensor::requires_grad)
      .def("numpy", [](const Tensor& t) { return numpy_from_buffer(t.shape(), t.data()); })
      .def("grad", [](const Tensor& t) { return numpy_from_buffer(t.shape(), t.grad()); })
      .def("item", &Tensor::item)
      .def("clone", &Tensor::clone);

  m.def("dense", &dense);
  m.def("conv2d", &conv2d, py::arg("input"), py::arg("kernel"), py::arg("stride") = 1,
        py::arg("pad") = 0);
  m.def("relu", &relu);
  m.def("maxpool2x2", &maxpool2x2);
  m.def("global_avg_pool", &global_avg_pool);
  m.def("log_softmax", &log_softmax);
  m.def("flatten", &flatten);
  m.def("add", &add);
  m.def("mul", &mul);
  m.def("scale", &scale);
  m.def("sum", &sum);
  m.def("backward", &backward);

  py::class_<SgdOptimizer>(m, "SgdOptimizer")
      .def(py::init<double, double>(), py::arg("lr"), py::arg("momentum") = 0.0)
      .def("step",
           [](SgdOptimizer& opt, const std::vector<Tensor>& params) { opt.step(params); });

  m.def("cross_entropy", &cross_entropy);
  m.def("kd_kl", &kd_kl, py::arg("teacher_logits"), py::arg("student_logits"), py::arg("tau"));
  m.def("combined_loss", &combined_loss, py::arg("ce"), py::arg("kl"), py::arg("alpha"));

  // ---- augmentation ----
  py::enum_<AugOpKind>(m, "AugOp")
      .value("Identity", AugOpKind::Identity)
      .value("AutoContrast", AugOpKind::AutoContrast)
      .value("Equalize", AugOpKind::Equalize)
      .value("Rotate", AugOpKind::Rotate)
      .value("Solarize", AugOpKind::Solarize)
      .value("Color", AugOpKind::Color)
      .value("Posterize", AugOpKind::Posterize)
      .value("Contrast", AugOpKind::Contrast)
      .value("Brightness", AugOpKind::Brightness)
      .value("Sharpness", AugOpKind::Sharpness)
      .value("ShearX", AugOpKind::ShearX)
      .value("ShearY", AugOpKind::ShearY)
      .value("TranslateX", AugOpKind::TranslateX)
      .value("TranslateY", AugOpKind::TranslateY);

  m.attr("NUM_AUG_OPS") = kNumAugOps;
  m.attr("MAX_MAGNITUDE") = kMaxMagnitude;

  m.def("apply_op",
        [](py::array_t<uint8_t, py::array::c_style | py::array::forcecast> img, AugOpKind op,
           int magnitude, uint64_t seed) {
          Rng rng(seed);
          return numpy_from_image(apply_op(image_from_numpy(img), op, magnitude, rng));
        },
        py::arg("image"), py::arg("op"), py::arg("magnitude"), py::arg("seed"));
  m.def("randaugment",
        [](py::array_t<uint8_t, py::array::c_style | py::array::forcecast> img, int magnitude,
           uint64_t seed) {
          Rng rng(seed);
          return numpy_from_image(randaugment(image_from_numpy(img), AugPolicy{magnitude}, rng));
        },
        py::arg("image"), py::arg("magnitude"), py::arg("seed"));
  m.def("random_magnitude_augment",
        [](py::array_t<uint8_t, py::array::c_style | py::array::forcecast> img, uint64_t seed) {
          Rng rng(seed);
          MagnitudeDraw draw = random_magnitude_augment(image_from_numpy(img), rng);
          return py::make_tuple(numpy_from_image(draw.image), draw.magnitude);
        },
        py::arg("image"), py::arg("seed"));

  // ---- models ----
  py::class_<BlockSpec>(m, "BlockSpec")
      .def(py::init([](int channels, int stride, bool pool) {
             return BlockSpec{channels, stride, pool};
           }),
           py::arg("channels"), py::arg("stride") = 1, py::arg("pool") = false)
      .def_readwrite("channels", &BlockSpec::channels)
      .def_readwrite("stride", &BlockSpec::stride)
      .def_readwrite("pool", &BlockSpec::pool);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init([](int in_channels, int in_height, int in_width,
                       std::vector<BlockSpec> blocks, int num_classes, int extra_blocks) {
             ModelSpec s;
             s.in_channels = in_channels;
             s.in_height = in_height;
             s.in_width = in_width;
             s.blocks = std::move(blocks);
             s.num_classes = num_classes;
             s.extra_blocks = extra_blocks;
             s.validate();
             return s;
           }),
           py::arg("in_channels"), py::arg("in_height"), py::arg("in_width"), py::arg("blocks"),
           py::arg("num_classes"), py::arg("extra_blocks") = 0)
      .def_readonly("num_classes", &ModelSpec::num_classes)
      .def_readonly("extra_blocks", &ModelSpec::extra_blocks)
      .def("base", &ModelSpec::base);

  py::class_<Model>(m, "Model")
      .def_static("build", &Model::build, py::arg("spec"), py::arg("seed"))
      .def("forward", &Model::forward)
      .def_property_readonly("spec", &Model::spec)
      .def("param_names",
           [](const Model& model) {
             std::vector<std::string> names;
             for (const ParamEntry& p : model.params()) names.push_back(p.name);
             return names;
           })
      .def("param",
           [](const Model& model, const std::string& name) {
             const Tensor t = model.param(name);
             return numpy_from_buffer(t.shape(), t.data());
           })
      .def("trainable", &Model::trainable)
      .def("num_params", &Model::num_params)
      .def("checksum", &Model::checksum)
      .def("clone", &Model::clone)
      .def("save", &Model::save)
      .def("load", &Model::load);

  m.def("attach_extra", &attach_extra, py::arg("base"), py::arg("n_blocks"), py::arg("seed"));
  m.def("detach_extra", &detach_extra, py::arg("enlarged"), py::arg("base_spec"),
        py::arg("head_seed"));
  m.def("transfer_weights", [](const Model& src, Model& dst) {
    const TransferReport r = transfer_weights(src, dst);
    return py::make_tuple(r.copied, r.skipped);
  });

  // ---- pruning ----
  py::class_<PruneState>(m, "PruneState")
      .def_readonly("target_ratio", &PruneState::target_ratio)
      .def("mask",
           [](const PruneState& s, const std::string& name) {
             const std::vector<uint8_t>* m_ = s.find(name);
             if (m_ == nullptr) throw ContractError("no mask named " + name);
             py::array_t<uint8_t> arr(py::ssize_t(m_->size()));
             std::copy(m_->begin(), m_->end(), arr.mutable_data());
             return arr;
           })
      .def("names", [](const PruneState& s) {
        std::vector<std::string> names;
        for (const auto& e : s.masks) names.push_back(e.name);
        return names;
      });

  m.def("l1_prune",
        [](Model& model, double p, const PruneState* prior) { return l1_prune(model, p, prior); },
        py::arg("model"), py::arg("p"), py::arg("prior") = nullptr);
  m.def("pruning_ratio", &pruning_ratio);

  // ---- policy ----
  py::class_<DecaySchedule>(m, "DecaySchedule")
      .def(py::init([](std::vector<std::pair<double, int>> pivots, const std::string& mode) {
             DecaySchedule s;
             for (const auto& [r, m_] : pivots) s.pivots.push_back({r, m_});
             s.mode = mode == "linear" ? DecaySchedule::Mode::Linear : DecaySchedule::Mode::Step;
             s.validate();
             return s;
           }),
           py::arg("pivots"), py::arg("mode") = "step");
  m.def("decay_lookup", &decay_lookup);

  py::class_<ProfileEntry>(m, "ProfileEntry")
      .def_readonly("magnitude", &ProfileEntry::magnitude)
      .def_readonly("val_accuracy", &ProfileEntry::val_accuracy)
      .def_readonly("val_loss", &ProfileEntry::val_loss);
  py::class_<MagnitudeProfile>(m, "MagnitudeProfile")
      .def_readonly("entries", &MagnitudeProfile::entries)
      .def_readonly("baseline_accuracy", &MagnitudeProfile::baseline_accuracy);
  m.def("optimal_magnitude", &optimal_magnitude);
  m.def("maximal_magnitude", &maximal_magnitude);

  // ---- selection ----
  py::class_<SelectionConfig>(m, "SelectionConfig")
      .def(py::init([](int n, double alpha, double beta, double tau) {
             SelectionConfig c{n, alpha, beta, tau};
             c.validate();
             return c;
           }),
           py::arg("n") = 4, py::arg("alpha") = 1.0, py::arg("beta") = 1.0, py::arg("tau") = 4.0)
      .def_readwrite("n", &SelectionConfig::n)
      .def_readwrite("alpha", &SelectionConfig::alpha)
      .def_readwrite("beta", &SelectionConfig::beta)
      .def_readwrite("tau", &SelectionConfig::tau);

  m.def("generate_candidates",
        [](py::array_t<uint8_t, py::array::c_style | py::array::forcecast> img, int n,
           uint64_t seed) {
          Rng rng(seed);
          py::list out;
          for (const Candidate& c : generate_candidates(image_from_numpy(img), n, rng)) {
            out.append(py::make_tuple(numpy_from_image(c.image), c.magnitude));
          }
          return out;
        },
        py::arg("image"), py::arg("n"), py::arg("seed"));
  m.def("select",
        [](const std::vector<py::array_t<uint8_t, py::array::c_style | py::array::forcecast>>&
               candidates,
           int label, const Model& teacher, const Model& student, const SelectionConfig& cfg) {
          std::vector<Image> images;
          images.reserve(candidates.size());
          for (const auto& c : candidates) images.push_back(image_from_numpy(c));
          const SelectionResult r = select(images, label, teacher, student, cfg);
          return py::make_tuple(r.chosen, r.scores);
        },
        py::arg("candidates"), py::arg("label"), py::arg("teacher"), py::arg("student"),
        py::arg("config"));

  // ---- data ----
  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("samples", &SyntheticSpec::samples)
      .def_readwrite("classes", &SyntheticSpec::classes)
      .def_readwrite("channels", &SyntheticSpec::channels)
      .def_readwrite("height", &SyntheticSpec::height)
      .def_readwrite("width", &SyntheticSpec::width)
      .def_readwrite("seed", &SyntheticSpec::seed)
      .def_readwrite("noise", &SyntheticSpec::noise)
      .def_readwrite("jitter", &SyntheticSpec::jitter);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_readonly("labels", &Dataset::labels)
      .def("__len__", &Dataset::size)
      .def("image", [](const Dataset& d, size_t i) { return numpy_from_image(d.images.at(i)); });

  py::class_<SplitDataset>(m, "SplitDataset")
      .def_readonly("train", &SplitDataset::train)
      .def_readonly("val", &SplitDataset::val);

  m.def("make_synthetic", &make_synthetic);
  m.def("split_dataset", &split_dataset, py::arg("dataset"), py::arg("val_fraction"),
        py::arg("seed"));
  m.def("images_to_tensor", [](const Dataset& d, const std::vector<size_t>& indices) {
    std::vector<const Image*> ptrs;
    for (size_t i : indices) ptrs.push_back(&d.images.at(i));
    return images_to_tensor(ptrs);
  });

  py::class_<EvalResult>(m, "EvalResult")
      .def_readonly("accuracy", &EvalResult::accuracy)
      .def_readonly("mean_ce", &EvalResult::mean_ce);
  m.def("evaluate", &evaluate, py::arg("model"), py::arg("data"), py::arg("batch_size") = 64);

  m.def("save_checkpoint", [](const std::string& path, const std::map<std::string, py::array_t<double, py::array::c_style | py::array::forcecast>>& tensors) {
    NamedTensors named;
    for (const auto& [name, arr] : tensors) named.emplace_back(name, tensor_from_numpy(arr, false));
    save_checkpoint(path, named);
  });
  m.def("load_checkpoint", [](const std::string& path) {
    py::dict out;
    for (const auto& [name, tensor] : load_checkpoint(path)) {
      out[py::str(name)] = numpy_from_buffer(tensor.shape(), tensor.data());
    }
    return out;
  });

#ifdef AUGLAB_VERSION
  m.attr("__version__") = AUGLAB_VERSION;
#else
  m.attr("__version__") = "0.1.0";
#endif
}
