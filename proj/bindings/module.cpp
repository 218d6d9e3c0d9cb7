#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "asid/accounting.hpp"
#include "asid/image.hpp"
#include "asid/image_io.hpp"
#include "asid/metrics.hpp"
#include "asid/network.hpp"
#include "asid/ops.hpp"
#include "asid/weight_store.hpp"

namespace py = pybind11;
using namespace asid;

namespace {

// [C,H,W] float64 array in [0,1] <-> Image
Image image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3 || a.shape(0) != 3)
        throw py::value_error("expected a (3, H, W) array");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
}

py::array_t<double> image_to_array(const Image& img) {
    py::array_t<double> out({3, img.height, img.width});
    std::copy(img.data.begin(), img.data.end(), out.mutable_data());
    return out;
}

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<int> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<int>(a.shape(i));
    std::vector<double> values(a.data(), a.data() + a.size());
    return Tensor::from_vector(std::move(values), std::move(shape), Dtype::F64);
}

py::array_t<double> tensor_to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data(), t.data() + t.numel(), out.mutable_data());
    return out;
}

ModelConfig config_from_dict(const py::dict& d) {
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& item : d)
        kv.emplace_back(py::cast<std::string>(item.first),
                        py::cast<std::string>(py::str(item.second)));
    return config_from_updates(kv);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "ASID super-resolution core";

    m.def(
        "upscale",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
           const std::string& weights) {
            const LoadedModel loaded = load_weights(weights);
            const Image in = image_from_array(img);
            const Tensor sr = asid_forward(loaded.config, loaded.params,
                                           image_to_tensor(in, Dtype::F32), true);
            return image_to_array(tensor_to_image(sr));
        },
        py::arg("image"), py::arg("weights"),
        "Upscale a (3,H,W) array in [0,1] with a stored model");

    m.def(
        "upscale_file",
        [](const std::string& input, const std::string& output, const std::string& weights) {
            const LoadedModel loaded = load_weights(weights);
            const Image in = read_image(input);
            const Tensor sr = asid_forward(loaded.config, loaded.params,
                                           image_to_tensor(in, Dtype::F32), true);
            write_image(output, tensor_to_image(sr));
        },
        py::arg("input"), py::arg("output"), py::arg("weights"));

    m.def(
        "build_weights",
        [](const std::string& path, const py::dict& config, std::uint64_t seed) {
            const ModelConfig cfg = config_from_dict(config);
            save_weights(path, cfg, build_model(cfg, seed));
        },
        py::arg("path"), py::arg("config") = py::dict(), py::arg("seed") = 0,
        "Initialize a model and write its weight store");

    m.def(
        "count",
        [](const py::dict& config, int out_h, int out_w) {
            const ModelConfig cfg = config_from_dict(config);
            const CostReport r = count_macs(cfg, out_h, out_w);
            return py::make_tuple(r.params, r.macs);
        },
        py::arg("config") = py::dict(), py::arg("out_h") = 720, py::arg("out_w") = 1280,
        "(params, macs) totals for a config at an output geometry");

    m.def(
        "psnr",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& sr,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& hr,
           int scale) {
            const EvalResult r = evaluate_pair(image_from_array(sr), image_from_array(hr), scale);
            return r.psnr;
        },
        py::arg("sr"), py::arg("hr"), py::arg("scale") = 0);

    m.def(
        "ssim",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& sr,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& hr,
           int scale) {
            const EvalResult r = evaluate_pair(image_from_array(sr), image_from_array(hr), scale);
            return r.ssim;
        },
        py::arg("sr"), py::arg("hr"), py::arg("scale") = 0);

    m.def(
        "bicubic_resize",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
           int out_h, int out_w) {
            return image_to_array(bicubic_resize(image_from_array(img), out_h, out_w));
        },
        py::arg("image"), py::arg("out_h"), py::arg("out_w"));

    m.def(
        "softmax",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, int axis) {
            return tensor_to_array(softmax(tensor_from_array(a), axis));
        },
        py::arg("a"), py::arg("axis") = -1);

    m.def(
        "matmul",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
            return tensor_to_array(matmul(tensor_from_array(a), tensor_from_array(b)));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "conv2d",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
           int stride, int padding, int groups) {
            return tensor_to_array(
                conv2d(tensor_from_array(x), tensor_from_array(w), stride, padding, groups));
        },
        py::arg("x"), py::arg("w"), py::arg("stride") = 1, py::arg("padding") = 0,
        py::arg("groups") = 1);

    m.def("pixel_shuffle",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, int r) {
              return tensor_to_array(pixel_shuffle(tensor_from_array(x), r));
          },
          py::arg("x"), py::arg("r"));
}
