#include "asid/metrics.hpp"

#include <cmath>
#include <vector>

#include "asid/errors.hpp"

namespace asid {

namespace {

void require_same(const Plane& a, const Plane& b) {
    if (a.height != b.height || a.width != b.width)
        throw DimensionError("metric inputs differ: " + std::to_string(a.width) + "x" +
                             std::to_string(a.height) + " vs " +
                             std::to_string(b.width) + "x" + std::to_string(b.height));
    if (a.height < 1 || a.width < 1)
        throw ContractError("metric inputs have zero area");
}

std::vector<double> gaussian11() {
    constexpr int half = 5;
    constexpr double sigma = 1.5;
    std::vector<double> w(11);
    double total = 0.0;
    for (int i = -half; i <= half; ++i) {
        w[i + half] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        total += w[i + half];
    }
    for (double& v : w) v /= total;
    return w;
}

// Separable Gaussian blur, valid region only: output is (H-10) x (W-10).
Plane blur_valid(const Plane& p, const std::vector<double>& k) {
    const int half = 5;
    Plane rows(p.height, p.width - 2 * half);
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < rows.width; ++x) {
            double v = 0.0;
            for (int i = 0; i < 11; ++i) v += k[i] * p.at(y, x + i);
            rows.at(y, x) = v;
        }
    Plane out(p.height - 2 * half, rows.width);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            double v = 0.0;
            for (int i = 0; i < 11; ++i) v += k[i] * rows.at(y + i, x);
            out.at(y, x) = v;
        }
    return out;
}

Plane hadamard(const Plane& a, const Plane& b) {
    Plane out(a.height, a.width);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    return out;
}

} // namespace

double psnr_plane(const Plane& a, const Plane& b) {
    require_same(a, b);
    double sq = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sq += d * d;
    }
    const double mse = sq / static_cast<double>(a.data.size());
    if (mse == 0.0) return kPsnrPerfect;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim_plane(const Plane& a, const Plane& b) {
    require_same(a, b);
    if (a.height < 11 || a.width < 11)
        throw ContractError("SSIM needs at least 11x11 pixels, got " +
                            std::to_string(a.width) + "x" + std::to_string(a.height));
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    const std::vector<double> k = gaussian11();

    const Plane mu_a = blur_valid(a, k);
    const Plane mu_b = blur_valid(b, k);
    const Plane aa = blur_valid(hadamard(a, a), k);
    const Plane bb = blur_valid(hadamard(b, b), k);
    const Plane ab = blur_valid(hadamard(a, b), k);

    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.data.size(); ++i) {
        const double ma = mu_a.data[i], mb = mu_b.data[i];
        const double va = aa.data[i] - ma * ma;
        const double vb = bb.data[i] - mb * mb;
        const double cov = ab.data[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return total / static_cast<double>(mu_a.data.size());
}

EvalResult evaluate_pair(const Image& sr, const Image& hr, int scale) {
    if (sr.height != hr.height || sr.width != hr.width)
        throw DimensionError("evaluation pair differs: " + std::to_string(sr.width) +
                             "x" + std::to_string(sr.height) + " vs " +
                             std::to_string(hr.width) + "x" + std::to_string(hr.height));
    if (scale < 0) throw ContractError("border crop must be non-negative");
    const Plane ya = rgb_to_y(quantize8(sr));
    const Plane yb = rgb_to_y(quantize8(hr));
    const int h = ya.height - 2 * scale;
    const int w = ya.width - 2 * scale;
    if (h < 1 || w < 1)
        throw ContractError("border crop of " + std::to_string(scale) +
                            " leaves no pixels in a " + std::to_string(ya.width) + "x" +
                            std::to_string(ya.height) + " image");
    Plane ca(h, w), cb(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            ca.at(y, x) = ya.at(y + scale, x + scale);
            cb.at(y, x) = yb.at(y + scale, x + scale);
        }
    return {psnr_plane(ca, cb), ssim_plane(ca, cb)};
}

} // namespace asid
