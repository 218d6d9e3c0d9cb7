#pragma once

#include <limits>

#include "asid/image.hpp"

namespace asid {

// Reported when the inputs are identical (MSE = 0).
inline constexpr double kPsnrPerfect = std::numeric_limits<double>::infinity();

// PSNR in dB over [0,1] planes: 10*log10(1/MSE), kPsnrPerfect on zero MSE.
double psnr_plane(const Plane& a, const Plane& b);

// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1; only windows fully inside the planes contribute.
double ssim_plane(const Plane& a, const Plane& b);

struct EvalResult {
    double psnr = 0.0;
    double ssim = 0.0;
};

// Benchmark-convention comparison: quantize both images to 8 bits, take the
// luma channel, shave `scale` pixels from every border, then measure.
EvalResult evaluate_pair(const Image& sr, const Image& hr, int scale);

} // namespace asid
