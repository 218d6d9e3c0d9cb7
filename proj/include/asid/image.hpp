#pragma once

#include <vector>

#include "asid/tensor.hpp"

namespace asid {

// RGB image, planar channel-major storage, values in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> data; // size 3*height*width, index (c*height + y)*width + x

    Image() = default;
    Image(int h, int w) : height(h), width(w), data(3LL * h * w, 0.0) {}

    double& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
};

// Single-channel plane on [0,1] (luma, metric inputs).
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Plane() = default;
    Plane(int h, int w) : height(h), width(w), data(1LL * h * w, 0.0) {}

    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }
};

// Cubic convolution kernel with a = -0.5; support (-2, 2).
double cubic_kernel(double x);

// Separable cubic resampling to the exact target size. Downscaling
// stretches the kernel by the scale factor (anti-aliasing); tap weights are
// renormalized to sum to one at every output sample.
Image bicubic_resize(const Image& img, int out_h, int out_w);

// Target size = round(source * factor) per axis.
Image bicubic_resize(const Image& img, double factor);

// Studio-range BT.601 luma: Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255.
Plane rgb_to_y(const Image& img);

// Round to the nearest 8-bit level and clamp, staying on the [0,1] scale.
Image quantize8(const Image& img);

// The 8 dihedral transforms: k % 4 quarter-turns counter-clockwise,
// preceded by a horizontal mirror when k >= 4.
Image dihedral(const Image& img, int k);
int dihedral_inverse(int k);

Image crop(const Image& img, int top, int left, int h, int w);

// Bridges to the [1,3,H,W] tensor layout. tensor_to_image clamps to [0,1].
Tensor image_to_tensor(const Image& img, Dtype dt);
Image tensor_to_image(const Tensor& t);

} // namespace asid
