// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the main operations. Images are float64 numpy arrays
// of shape (batch, channels, height, width) with values in [0, 1].

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wespe/blur.hpp"
#include "wespe/errors.hpp"
#include "wespe/image.hpp"
#include "wespe/losses.hpp"
#include "wespe/metrics.hpp"
#include "wespe/models.hpp"
#include "wespe/train.hpp"

namespace py = pybind11;
using namespace wespe;

namespace {

Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 4)
        throw ValidationError("expected a 4-D (batch, channels, h, w) array");
    Tensor t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
             static_cast<int>(a.shape(2)), static_cast<int>(a.shape(3)));
    std::copy(a.data(), a.data() + t.size(), t.data());
    return t;
}

py::array_t<double> to_numpy(const Tensor& t) {
    py::array_t<double> a({t.n(), t.c(), t.h(), t.w()});
    std::copy(t.data(), t.data() + t.size(), a.mutable_data());
    return a;
}

BlurKernel kernel_from_weights(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& w) {
    if (w.ndim() != 2 || w.shape(0) != w.shape(1) || w.shape(0) % 2 == 0)
        throw ValidationError("kernel weights must be a square odd-sided 2-D array");
    BlurKernel k;
    k.radius = static_cast<int>(w.shape(0)) / 2;
    k.weights = Tensor(1, 1, static_cast<int>(w.shape(0)),
                       static_cast<int>(w.shape(1)));
    std::copy(w.data(), w.data() + k.weights.size(), k.weights.data());
    return k;
}

}  // namespace

PYBIND11_MODULE(pywespe, m) {
    m.doc() = "Weakly supervised photo enhancement toolkit";

    py::register_exception<ValidationError>(m, "ValidationError",
                                            PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);
    py::register_exception<NumericError>(m, "NumericError",
                                         PyExc_ArithmeticError);

    m.def("load_image",
          [](const std::string& path) { return to_numpy(load_image(path)); },
          py::arg("path"));
    m.def("save_image",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
             const std::string& path) { save_image(from_numpy(img), path); },
          py::arg("image"), py::arg("path"));
    m.def("to_grayscale",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img) {
              return to_numpy(to_grayscale(from_numpy(img)));
          },
          py::arg("image"));

    m.def("make_blur_kernel",
          [](int radius, double amplitude, double sigma, bool sigma_squared) {
              BlurKernel k = make_blur_kernel(radius, amplitude, sigma,
                                              sigma_squared);
              py::array_t<double> w({k.side(), k.side()});
              std::copy(k.weights.data(), k.weights.data() + k.weights.size(),
                        w.mutable_data());
              return w;
          },
          py::arg("radius") = 10, py::arg("amplitude") = 0.053,
          py::arg("sigma") = 3.0, py::arg("sigma_squared") = false);
    m.def("blur",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& weights) {
              return to_numpy(blur(from_numpy(img), kernel_from_weights(weights)));
          },
          py::arg("image"), py::arg("kernel_weights"));

    m.def("psnr",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
              return psnr(from_numpy(a), from_numpy(b));
          });
    m.def("ssim",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
              return ssim(from_numpy(a), from_numpy(b));
          });
    m.def("entropy",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
              return entropy(from_numpy(a));
          });
    m.def("bpp",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
              return bpp(from_numpy(a));
          });
    m.def("tv_loss",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             bool isotropic) { return tv_loss(from_numpy(a), isotropic); },
          py::arg("image"), py::arg("isotropic") = false);
    m.def("total_loss", &total_loss, py::arg("content"), py::arg("color"),
          py::arg("texture"), py::arg("tv"));

    m.def("label_faves",
          [](const std::vector<std::tuple<std::string, long, long>>& records) {
              std::vector<FaveRecord> rs;
              for (const auto& [path, views, faves] : records)
                  rs.push_back({path, views, faves, -1});
              return label_faves(rs);
          },
          py::arg("records"),
          "records: list of (path, views, faves); returns [(path, label)]");

    m.def("enhance",
          [](const std::string& checkpoint,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
             std::optional<int> tile) {
              Generator g = load_generator(checkpoint);
              return to_numpy(enhance(g, from_numpy(img), tile));
          },
          py::arg("checkpoint"), py::arg("image"),
          py::arg("tile") = std::nullopt);

    m.def("train",
          [](const std::string& config_path) {
              return train(TrainConfig::load(config_path));
          },
          py::arg("config_path"), "Runs training; returns the final checkpoint path.");

    m.def("ffs_score",
          [](const std::string& checkpoint,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& img) {
              FfsScorer s = FfsScorer::load(checkpoint);
              return s.score(from_numpy(img));
          },
          py::arg("checkpoint"), py::arg("image"));

    m.def("init_features",
          [](const std::string& path, double width_scale, uint64_t seed) {
              FeatureExtractor::write_archive(
                  path, FeatureExtractor::vgg19_layers(width_scale), seed);
          },
          py::arg("path"), py::arg("width_scale") = 1.0, py::arg("seed") = 0);
}
