#include <cmath>
#include <limits>
#include <memory>

#include "asid/ops.hpp"
#include "op_common.hpp"

namespace asid {

using detail::record_binary;
using detail::record_ternary;
using detail::record_unary;
using detail::require_same_dtype;

namespace {

struct ConvGeom {
    int B, Cin, H, W;
    int Cout, icg, k; // icg = in channels per group
    int stride, pad, groups;
    int Ho, Wo;
};

ConvGeom conv_geometry(const Tensor& x, const Tensor& w, int stride, int padding,
                       int groups) {
    if (x.ndim() != 4 || w.ndim() != 4)
        throw DimensionError("conv2d: expected x (B,C,H,W) and w (O,I,k,k), got " +
                             x.shape_str() + " and " + w.shape_str());
    if (stride < 1 || padding < 0 || groups < 1)
        throw ContractError("conv2d: invalid stride/padding/groups");
    ConvGeom g;
    g.B = x.dim(0);
    g.Cin = x.dim(1);
    g.H = x.dim(2);
    g.W = x.dim(3);
    g.Cout = w.dim(0);
    g.icg = w.dim(1);
    g.k = w.dim(2);
    g.stride = stride;
    g.pad = padding;
    g.groups = groups;
    if (w.dim(3) != g.k)
        throw DimensionError("conv2d: kernel must be square, got " + w.shape_str());
    if (g.Cin % groups != 0 || g.Cout % groups != 0)
        throw DimensionError("conv2d: channels " + std::to_string(g.Cin) + "->" +
                             std::to_string(g.Cout) + " not divisible by groups " +
                             std::to_string(groups));
    if (g.icg != g.Cin / groups)
        throw DimensionError("conv2d: weight " + w.shape_str() + " expects " +
                             std::to_string(g.icg * groups) + " input channels, input has " +
                             std::to_string(g.Cin));
    g.Ho = (g.H + 2 * padding - g.k) / stride + 1;
    g.Wo = (g.W + 2 * padding - g.k) / stride + 1;
    if (g.H + 2 * padding < g.k || g.W + 2 * padding < g.k)
        throw ContractError("conv2d: kernel " + std::to_string(g.k) +
                            " exceeds padded input " + x.shape_str());
    return g;
}

// Valid output range [o0, o1] for which i = o*stride - pad + koff lands in [0, n).
inline void valid_out_range(int koff, int n, int out_n, int stride, int pad, int& o0,
                            int& o1) {
    int lo = pad - koff;
    o0 = lo <= 0 ? 0 : (lo + stride - 1) / stride;
    o1 = (n - 1 + pad - koff) / stride;
    if (o1 > out_n - 1) o1 = out_n - 1;
}

Tensor conv2d_value(const Tensor& x, const Tensor& w, const Tensor& bias,
                    const ConvGeom& g) {
    const double* xp = x.data();
    const double* wp = w.data();
    std::vector<double> out(static_cast<long long>(g.B) * g.Cout * g.Ho * g.Wo, 0.0);

    const int ocg = g.Cout / g.groups;
    for (int b = 0; b < g.B; ++b) {
        for (int oc = 0; oc < g.Cout; ++oc) {
            double* oplane = out.data() +
                             (static_cast<long long>(b) * g.Cout + oc) * g.Ho * g.Wo;
            if (bias.defined()) {
                const double bv = bias.data()[oc];
                for (long long i = 0; i < static_cast<long long>(g.Ho) * g.Wo; ++i)
                    oplane[i] = bv;
            }
            const int ic0 = (oc / ocg) * g.icg;
            for (int ic = 0; ic < g.icg; ++ic) {
                const double* xplane =
                    xp + (static_cast<long long>(b) * g.Cin + ic0 + ic) * g.H * g.W;
                const double* wrow =
                    wp + (static_cast<long long>(oc) * g.icg + ic) * g.k * g.k;
                for (int ky = 0; ky < g.k; ++ky) {
                    int oy0, oy1;
                    valid_out_range(ky, g.H, g.Ho, g.stride, g.pad, oy0, oy1);
                    for (int kx = 0; kx < g.k; ++kx) {
                        const double wv = wrow[ky * g.k + kx];
                        if (wv == 0.0) continue;
                        int ox0, ox1;
                        valid_out_range(kx, g.W, g.Wo, g.stride, g.pad, ox0, ox1);
                        for (int oy = oy0; oy <= oy1; ++oy) {
                            const int iy = oy * g.stride - g.pad + ky;
                            const double* xr = xplane + static_cast<long long>(iy) * g.W;
                            double* orow = oplane + static_cast<long long>(oy) * g.Wo;
                            for (int ox = ox0; ox <= ox1; ++ox)
                                orow[ox] += wv * xr[ox * g.stride - g.pad + kx];
                        }
                    }
                }
            }
        }
    }
    return Tensor::from_vector(std::move(out), {g.B, g.Cout, g.Ho, g.Wo}, x.dtype());
}

Tensor conv2d_grad_x(const Tensor& gout, const Tensor& w, const ConvGeom& g, Dtype dt) {
    const double* gp = gout.data();
    const double* wp = w.data();
    std::vector<double> dx(static_cast<long long>(g.B) * g.Cin * g.H * g.W, 0.0);
    const int ocg = g.Cout / g.groups;
    for (int b = 0; b < g.B; ++b)
        for (int oc = 0; oc < g.Cout; ++oc) {
            const double* gplane =
                gp + (static_cast<long long>(b) * g.Cout + oc) * g.Ho * g.Wo;
            const int ic0 = (oc / ocg) * g.icg;
            for (int ic = 0; ic < g.icg; ++ic) {
                double* xplane =
                    dx.data() + (static_cast<long long>(b) * g.Cin + ic0 + ic) * g.H * g.W;
                const double* wrow =
                    wp + (static_cast<long long>(oc) * g.icg + ic) * g.k * g.k;
                for (int ky = 0; ky < g.k; ++ky) {
                    int oy0, oy1;
                    valid_out_range(ky, g.H, g.Ho, g.stride, g.pad, oy0, oy1);
                    for (int kx = 0; kx < g.k; ++kx) {
                        const double wv = wrow[ky * g.k + kx];
                        if (wv == 0.0) continue;
                        int ox0, ox1;
                        valid_out_range(kx, g.W, g.Wo, g.stride, g.pad, ox0, ox1);
                        for (int oy = oy0; oy <= oy1; ++oy) {
                            const int iy = oy * g.stride - g.pad + ky;
                            double* xr = xplane + static_cast<long long>(iy) * g.W;
                            const double* grow = gplane + static_cast<long long>(oy) * g.Wo;
                            for (int ox = ox0; ox <= ox1; ++ox)
                                xr[ox * g.stride - g.pad + kx] += wv * grow[ox];
                        }
                    }
                }
            }
        }
    return Tensor::from_vector(std::move(dx), {g.B, g.Cin, g.H, g.W}, dt);
}

Tensor conv2d_grad_w(const Tensor& gout, const Tensor& x, const ConvGeom& g, Dtype dt) {
    const double* gp = gout.data();
    const double* xp = x.data();
    std::vector<double> dw(static_cast<long long>(g.Cout) * g.icg * g.k * g.k, 0.0);
    const int ocg = g.Cout / g.groups;
    for (int b = 0; b < g.B; ++b)
        for (int oc = 0; oc < g.Cout; ++oc) {
            const double* gplane =
                gp + (static_cast<long long>(b) * g.Cout + oc) * g.Ho * g.Wo;
            const int ic0 = (oc / ocg) * g.icg;
            for (int ic = 0; ic < g.icg; ++ic) {
                const double* xplane =
                    xp + (static_cast<long long>(b) * g.Cin + ic0 + ic) * g.H * g.W;
                double* wrow =
                    dw.data() + (static_cast<long long>(oc) * g.icg + ic) * g.k * g.k;
                for (int ky = 0; ky < g.k; ++ky) {
                    int oy0, oy1;
                    valid_out_range(ky, g.H, g.Ho, g.stride, g.pad, oy0, oy1);
                    for (int kx = 0; kx < g.k; ++kx) {
                        int ox0, ox1;
                        valid_out_range(kx, g.W, g.Wo, g.stride, g.pad, ox0, ox1);
                        double acc = 0.0;
                        for (int oy = oy0; oy <= oy1; ++oy) {
                            const int iy = oy * g.stride - g.pad + ky;
                            const double* xr = xplane + static_cast<long long>(iy) * g.W;
                            const double* grow = gplane + static_cast<long long>(oy) * g.Wo;
                            for (int ox = ox0; ox <= ox1; ++ox)
                                acc += grow[ox] * xr[ox * g.stride - g.pad + kx];
                        }
                        wrow[ky * g.k + kx] += acc;
                    }
                }
            }
        }
    return Tensor::from_vector(std::move(dw), {g.Cout, g.icg, g.k, g.k}, dt);
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int padding, int groups) {
    ConvGeom g = conv_geometry(x, w, stride, padding, groups);
    require_same_dtype(x, w, "conv2d");
    if (bias.defined()) {
        if (bias.ndim() != 1 || bias.dim(0) != g.Cout)
            throw DimensionError("conv2d: bias " + bias.shape_str() + " must have " +
                                 std::to_string(g.Cout) + " entries");
        require_same_dtype(x, bias, "conv2d");
    }
    Tensor value = conv2d_value(x, w, bias, g);
    const Dtype dt = x.dtype();

    auto dx_fn = [w, g, dt](const Tensor& go) { return conv2d_grad_x(go, w, g, dt); };
    auto dw_fn = [x, g, dt](const Tensor& go) { return conv2d_grad_w(go, x, g, dt); };
    if (!bias.defined()) return record_binary(value, x, w, dx_fn, dw_fn);
    auto db_fn = [](const Tensor& go) { return sum(go, {0, 2, 3}, false); };
    return record_ternary(value, x, w, bias, dx_fn, dw_fn, db_fn);
}

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding, int groups) {
    return conv2d(x, w, Tensor{}, stride, padding, groups);
}

Tensor max_pool2d(const Tensor& x, int kernel, int stride) {
    if (x.ndim() != 4)
        throw DimensionError("max_pool2d: expected (B,C,H,W), got " + x.shape_str());
    if (kernel < 1 || stride < 1) throw ContractError("max_pool2d: invalid kernel/stride");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (kernel > H || kernel > W)
        throw ContractError("max_pool2d: kernel " + std::to_string(kernel) +
                            " larger than input " + x.shape_str());
    const int Ho = (H - kernel) / stride + 1;
    const int Wo = (W - kernel) / stride + 1;

    const double* xp = x.data();
    std::vector<double> out(static_cast<long long>(B) * C * Ho * Wo);
    auto argmax = std::make_shared<std::vector<long long>>(out.size());
    long long o = 0;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const double* plane = xp + (static_cast<long long>(b) * C + c) * H * W;
            const long long pbase = (static_cast<long long>(b) * C + c) * H * W;
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox, ++o) {
                    double best = -std::numeric_limits<double>::infinity();
                    long long best_i = 0;
                    for (int ky = 0; ky < kernel; ++ky)
                        for (int kx = 0; kx < kernel; ++kx) {
                            const long long idx =
                                static_cast<long long>(oy * stride + ky) * W + ox * stride +
                                kx;
                            // strict > keeps the first (lowest) index on ties
                            if (plane[idx] > best) {
                                best = plane[idx];
                                best_i = idx;
                            }
                        }
                    out[o] = best;
                    (*argmax)[o] = pbase + best_i;
                }
        }
    Tensor value = Tensor::from_vector(std::move(out), {B, C, Ho, Wo}, x.dtype());

    return record_unary(value, x, [x, argmax](const Tensor& g) {
        const std::vector<double>& gv = g.vec();
        std::vector<double> dx(x.numel(), 0.0);
        for (size_t i = 0; i < gv.size(); ++i) dx[(*argmax)[i]] += gv[i];
        return Tensor::from_vector(std::move(dx), x.shape(), x.dtype());
    });
}

namespace {

struct LerpAxis {
    std::vector<int> i0, i1;
    std::vector<double> w1; // weight of i1; i0 gets 1 - w1
};

LerpAxis lerp_axis(int in_n, int out_n) {
    LerpAxis ax;
    ax.i0.resize(out_n);
    ax.i1.resize(out_n);
    ax.w1.resize(out_n);
    const double scale = static_cast<double>(in_n) / out_n;
    for (int o = 0; o < out_n; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        double f = std::floor(src);
        double w = src - f;
        int a = static_cast<int>(f);
        int b = a + 1;
        if (a < 0) a = 0;
        if (b < 0) b = 0;
        if (a > in_n - 1) a = in_n - 1;
        if (b > in_n - 1) b = in_n - 1;
        ax.i0[o] = a;
        ax.i1[o] = b;
        ax.w1[o] = w;
    }
    return ax;
}

} // namespace

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    if (x.ndim() != 4)
        throw DimensionError("bilinear_resize: expected (B,C,H,W), got " + x.shape_str());
    if (out_h < 1 || out_w < 1)
        throw ContractError("bilinear_resize: output size must be positive");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    auto ay = std::make_shared<LerpAxis>(lerp_axis(H, out_h));
    auto axx = std::make_shared<LerpAxis>(lerp_axis(W, out_w));

    const double* xp = x.data();
    std::vector<double> out(static_cast<long long>(B) * C * out_h * out_w);
    long long o = 0;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const double* plane = xp + (static_cast<long long>(b) * C + c) * H * W;
            for (int oy = 0; oy < out_h; ++oy) {
                const double wy = ay->w1[oy];
                const double* r0 = plane + static_cast<long long>(ay->i0[oy]) * W;
                const double* r1 = plane + static_cast<long long>(ay->i1[oy]) * W;
                for (int ox = 0; ox < out_w; ++ox, ++o) {
                    const double wx = axx->w1[ox];
                    const double top = r0[axx->i0[ox]] * (1 - wx) + r0[axx->i1[ox]] * wx;
                    const double bot = r1[axx->i0[ox]] * (1 - wx) + r1[axx->i1[ox]] * wx;
                    out[o] = top * (1 - wy) + bot * wy;
                }
            }
        }
    Tensor value = Tensor::from_vector(std::move(out), {B, C, out_h, out_w}, x.dtype());

    return record_unary(value, x, [x, ay, axx, out_h, out_w](const Tensor& g) {
        const int B2 = x.dim(0), C2 = x.dim(1), H2 = x.dim(2), W2 = x.dim(3);
        const std::vector<double>& gv = g.vec();
        std::vector<double> dx(x.numel(), 0.0);
        long long o2 = 0;
        for (int b = 0; b < B2; ++b)
            for (int c = 0; c < C2; ++c) {
                double* plane = dx.data() + (static_cast<long long>(b) * C2 + c) * H2 * W2;
                for (int oy = 0; oy < out_h; ++oy) {
                    const double wy = ay->w1[oy];
                    double* r0 = plane + static_cast<long long>(ay->i0[oy]) * W2;
                    double* r1 = plane + static_cast<long long>(ay->i1[oy]) * W2;
                    for (int ox = 0; ox < out_w; ++ox, ++o2) {
                        const double wx = axx->w1[ox];
                        const double gvv = gv[o2];
                        r0[axx->i0[ox]] += gvv * (1 - wy) * (1 - wx);
                        r0[axx->i1[ox]] += gvv * (1 - wy) * wx;
                        r1[axx->i0[ox]] += gvv * wy * (1 - wx);
                        r1[axx->i1[ox]] += gvv * wy * wx;
                    }
                }
            }
        return Tensor::from_vector(std::move(dx), x.shape(), x.dtype());
    });
}

} // namespace asid
