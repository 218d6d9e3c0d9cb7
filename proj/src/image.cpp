#include "asid/image.hpp"

#include <algorithm>
#include <cmath>

#include "asid/errors.hpp"

namespace asid {

double cubic_kernel(double x) {
    constexpr double a = -0.5;
    const double t = std::abs(x);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
    return 0.0;
}

namespace {

struct Tap {
    int index;
    double weight;
};

// Tap positions and normalized weights for one output coordinate along an
// axis of `in` samples mapped to `out` samples (half-pixel centers).
std::vector<Tap> cubic_taps(int in, int out, int o) {
    const double scale = static_cast<double>(in) / out;
    const double stretch = std::max(1.0, scale); // widen kernel when shrinking
    const double src = (o + 0.5) * scale - 0.5;
    const int lo = static_cast<int>(std::ceil(src - 2.0 * stretch));
    const int hi = static_cast<int>(std::floor(src + 2.0 * stretch));
    std::vector<Tap> taps;
    taps.reserve(hi - lo + 1);
    double total = 0.0;
    for (int i = lo; i <= hi; ++i) {
        const double w = cubic_kernel((src - i) / stretch);
        if (w == 0.0) continue;
        taps.push_back({std::clamp(i, 0, in - 1), w});
        total += w;
    }
    for (Tap& t : taps) t.weight /= total;
    return taps;
}

} // namespace

Image bicubic_resize(const Image& img, int out_h, int out_w) {
    if (img.height < 1 || img.width < 1)
        throw ContractError("cannot resize an empty image");
    if (out_h < 1 || out_w < 1)
        throw ContractError("resize target " + std::to_string(out_w) + "x" +
                            std::to_string(out_h) + " is smaller than one pixel");

    // horizontal pass, then vertical
    std::vector<std::vector<Tap>> cols(out_w);
    for (int x = 0; x < out_w; ++x) cols[x] = cubic_taps(img.width, out_w, x);
    Image mid(img.height, out_w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < out_w; ++x) {
                double v = 0.0;
                for (const Tap& t : cols[x]) v += t.weight * img.at(c, y, t.index);
                mid.at(c, y, x) = v;
            }

    std::vector<std::vector<Tap>> rows(out_h);
    for (int y = 0; y < out_h; ++y) rows[y] = cubic_taps(img.height, out_h, y);
    Image out(out_h, out_w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) {
                double v = 0.0;
                for (const Tap& t : rows[y]) v += t.weight * mid.at(c, t.index, x);
                out.at(c, y, x) = v;
            }
    return out;
}

Image bicubic_resize(const Image& img, double factor) {
    if (factor <= 0.0) throw ContractError("resize factor must be positive");
    const int oh = static_cast<int>(std::llround(img.height * factor));
    const int ow = static_cast<int>(std::llround(img.width * factor));
    return bicubic_resize(img, oh, ow);
}

Plane rgb_to_y(const Image& img) {
    Plane y(img.height, img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            y.at(r, c) = (65.481 * img.at(0, r, c) + 128.553 * img.at(1, r, c) +
                          24.966 * img.at(2, r, c) + 16.0) /
                         255.0;
    return y;
}

Image quantize8(const Image& img) {
    Image out(img.height, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double level = std::clamp(std::round(img.data[i] * 255.0), 0.0, 255.0);
        out.data[i] = level / 255.0;
    }
    return out;
}

Image dihedral(const Image& img, int k) {
    if (k < 0 || k > 7)
        throw ContractError("dihedral transform index " + std::to_string(k) +
                            " out of range 0..7");
    Image cur = img;
    if (k >= 4) {
        Image m(cur.height, cur.width);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < cur.height; ++y)
                for (int x = 0; x < cur.width; ++x)
                    m.at(c, y, x) = cur.at(c, y, cur.width - 1 - x);
        cur = std::move(m);
    }
    for (int r = 0; r < k % 4; ++r) {
        // quarter turn counter-clockwise: (y, x) <- (x, W-1-y) of the source
        Image m(cur.width, cur.height);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < m.height; ++y)
                for (int x = 0; x < m.width; ++x)
                    m.at(c, y, x) = cur.at(c, x, cur.width - 1 - y);
        cur = std::move(m);
    }
    return cur;
}

int dihedral_inverse(int k) {
    if (k < 0 || k > 7)
        throw ContractError("dihedral transform index " + std::to_string(k) +
                            " out of range 0..7");
    return k < 4 ? (4 - k) % 4 : k; // mirrored variants are involutions
}

Image crop(const Image& img, int top, int left, int h, int w) {
    if (top < 0 || left < 0 || h < 1 || w < 1 || top + h > img.height ||
        left + w > img.width)
        throw ContractError("crop " + std::to_string(w) + "x" + std::to_string(h) +
                            "+" + std::to_string(left) + "+" + std::to_string(top) +
                            " leaves the " + std::to_string(img.width) + "x" +
                            std::to_string(img.height) + " image");
    Image out(h, w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, top + y, left + x);
    return out;
}

Tensor image_to_tensor(const Image& img, Dtype dt) {
    return Tensor::from_vector(img.data, {1, 3, img.height, img.width}, dt);
}

Image tensor_to_image(const Tensor& t) {
    if (t.ndim() != 4 || t.dim(0) != 1 || t.dim(1) != 3)
        throw DimensionError("expected a [1,3,H,W] tensor, got " + t.shape_str());
    Image out(t.dim(2), t.dim(3));
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::clamp(t.data()[i], 0.0, 1.0);
    return out;
}

} // namespace asid
