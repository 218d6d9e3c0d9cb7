#include <algorithm>
#include <cmath>

#include "asid/ops.hpp"
#include "op_common.hpp"

namespace asid {

using detail::is_tracked;
using detail::normalize_axis;
using detail::record_binary;
using detail::record_unary;
using detail::require_same_dtype;
using detail::require_same_shape;

namespace {
thread_local OpCounters g_counters;
} // namespace

OpCounters& op_counters() {
    return g_counters;
}

void reset_op_counters() {
    g_counters = OpCounters{};
}

// ---- elementwise arithmetic -------------------------------------------------

namespace {

template <typename F>
Tensor map2(const Tensor& a, const Tensor& b, const char* op, F f) {
    require_same_shape(a, b, op);
    require_same_dtype(a, b, op);
    const std::vector<double>& av = a.vec();
    const std::vector<double>& bv = b.vec();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = f(av[i], bv[i]);
    return Tensor::from_vector(std::move(out), a.shape(), a.dtype());
}

template <typename F>
Tensor map1(const Tensor& a, F f) {
    const std::vector<double>& av = a.vec();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    return Tensor::from_vector(std::move(out), a.shape(), a.dtype());
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor v = map2(a, b, "add", [](double x, double y) { return x + y; });
    return record_binary(v, a, b,
                         [](const Tensor& g) { return g; },
                         [](const Tensor& g) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Tensor v = map2(a, b, "sub", [](double x, double y) { return x - y; });
    return record_binary(v, a, b,
                         [](const Tensor& g) { return g; },
                         [](const Tensor& g) { return neg(g); });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    Tensor v = map2(a, b, "mul", [](double x, double y) { return x * y; });
    return record_binary(v, a, b,
                         [b](const Tensor& g) { return mul(g, b); },
                         [a](const Tensor& g) { return mul(g, a); });
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor v = map1(a, [s](double x) { return x + s; });
    return record_unary(v, a, [](const Tensor& g) { return g; });
}

Tensor mul_scalar(const Tensor& a, double s) {
    Tensor v = map1(a, [s](double x) { return x * s; });
    return record_unary(v, a, [s](const Tensor& g) { return mul_scalar(g, s); });
}

Tensor neg(const Tensor& a) {
    return mul_scalar(a, -1.0);
}

Tensor relu(const Tensor& a) {
    Tensor v = map1(a, [](double x) { return x > 0.0 ? x : 0.0; });
    return record_unary(v, a, [a](const Tensor& g) {
        return mul(g, map1(a, [](double x) { return x > 0.0 ? 1.0 : 0.0; }));
    });
}

namespace {
constexpr double kGeluC0 = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluC1 = 0.044715;
} // namespace

Tensor gelu(const Tensor& a) {
    Tensor v = map1(a, [](double x) {
        double u = kGeluC0 * (x + kGeluC1 * x * x * x);
        return 0.5 * x * (1.0 + std::tanh(u));
    });
    return record_unary(v, a, [a](const Tensor& g) {
        Tensor d = map1(a, [](double x) {
            double u = kGeluC0 * (x + kGeluC1 * x * x * x);
            double th = std::tanh(u);
            double du = kGeluC0 * (1.0 + 3.0 * kGeluC1 * x * x);
            return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
        });
        return mul(g, d);
    });
}

Tensor sigmoid(const Tensor& a) {
    Tensor v = map1(a, [](double x) {
        // split on sign to avoid exp overflow
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
    });
    return record_unary(v, a, [v](const Tensor& g) {
        Tensor d = map1(v, [](double s) { return s * (1.0 - s); });
        return mul(g, d);
    });
}

Tensor abs(const Tensor& a) {
    Tensor v = map1(a, [](double x) { return std::fabs(x); });
    return record_unary(v, a, [a](const Tensor& g) {
        Tensor s = map1(a, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
        return mul(g, s);
    });
}

Tensor add_vec(const Tensor& a, const Tensor& v, int axis) {
    axis = normalize_axis(axis, a.ndim(), "add_vec");
    if (v.ndim() != 1 || v.dim(0) != a.dim(axis))
        throw DimensionError("add_vec: vector " + v.shape_str() +
                             " does not match axis extent " + std::to_string(a.dim(axis)));
    require_same_dtype(a, v, "add_vec");

    long long outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= a.dim(i);
    for (int i = axis + 1; i < a.ndim(); ++i) inner *= a.dim(i);
    const int n = a.dim(axis);

    const std::vector<double>& av = a.vec();
    const std::vector<double>& vv = v.vec();
    std::vector<double> out(av.size());
    long long idx = 0;
    for (long long o = 0; o < outer; ++o)
        for (int c = 0; c < n; ++c)
            for (long long i = 0; i < inner; ++i, ++idx) out[idx] = av[idx] + vv[c];
    Tensor value = Tensor::from_vector(std::move(out), a.shape(), a.dtype());

    return record_binary(value, a, v,
                         [](const Tensor& g) { return g; },
                         [axis](const Tensor& g) {
                             std::vector<int> axes;
                             for (int i = 0; i < g.ndim(); ++i)
                                 if (i != axis) axes.push_back(i);
                             return sum(g, axes, false);
                         });
}

Tensor scale_channels(const Tensor& x, const Tensor& g) {
    if (x.ndim() != 4 || g.ndim() != 2 || x.dim(0) != g.dim(0) || x.dim(1) != g.dim(1))
        throw DimensionError("scale_channels: expected x (B,C,H,W) with gate (B,C), got " +
                             x.shape_str() + " and " + g.shape_str());
    require_same_dtype(x, g, "scale_channels");
    const long long hw = static_cast<long long>(x.dim(2)) * x.dim(3);
    const long long bc = static_cast<long long>(x.dim(0)) * x.dim(1);
    const std::vector<double>& xv = x.vec();
    const std::vector<double>& gv = g.vec();
    std::vector<double> out(xv.size());
    for (long long p = 0; p < bc; ++p) {
        const double s = gv[p];
        for (long long i = 0; i < hw; ++i) out[p * hw + i] = xv[p * hw + i] * s;
    }
    Tensor value = Tensor::from_vector(std::move(out), x.shape(), x.dtype());

    return record_binary(value, x, g,
                         [g](const Tensor& go) { return scale_channels(go, g); },
                         [x, hw, bc](const Tensor& go) {
                             const std::vector<double>& gov = go.vec();
                             const std::vector<double>& xv2 = x.vec();
                             std::vector<double> dg(bc, 0.0);
                             for (long long p = 0; p < bc; ++p) {
                                 double acc = 0.0;
                                 for (long long i = 0; i < hw; ++i)
                                     acc += gov[p * hw + i] * xv2[p * hw + i];
                                 dg[p] = acc;
                             }
                             return Tensor::from_vector(std::move(dg), {x.dim(0), x.dim(1)},
                                                        x.dtype());
                         });
}

// ---- reductions -------------------------------------------------------------

namespace {

std::vector<int> normalize_axes(std::vector<int> axes, int ndim, const char* op) {
    for (int& a : axes) a = normalize_axis(a, ndim, op);
    std::sort(axes.begin(), axes.end());
    if (std::adjacent_find(axes.begin(), axes.end()) != axes.end())
        throw DimensionError(std::string(op) + ": repeated reduction axis");
    return axes;
}

// Maps each flat input index onto the flat index of the reduced output.
struct ReduceMap {
    std::vector<int> in_shape;
    std::vector<bool> reduced;
    std::vector<long long> out_strides; // per input dim; 0 on reduced dims
    std::vector<int> out_shape;

    ReduceMap(const std::vector<int>& shape, const std::vector<int>& axes, bool keepdims) {
        in_shape = shape;
        reduced.assign(shape.size(), false);
        for (int a : axes) reduced[a] = true;
        std::vector<int> kept;
        for (size_t i = 0; i < shape.size(); ++i) {
            if (reduced[i]) {
                if (keepdims) kept.push_back(1);
            } else {
                kept.push_back(shape[i]);
            }
        }
        if (kept.empty()) kept.push_back(1);
        out_shape = kept;

        // strides of the output laid over the input dims
        out_strides.assign(shape.size(), 0);
        long long s = 1;
        for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
            if (!reduced[i]) {
                out_strides[i] = s;
                s *= shape[i];
            }
        }
    }

    long long out_index(long long flat) const {
        long long o = 0;
        for (int i = static_cast<int>(in_shape.size()) - 1; i >= 0; --i) {
            long long c = flat % in_shape[i];
            flat /= in_shape[i];
            o += c * out_strides[i];
        }
        return o;
    }
};

Tensor reduce_impl(const Tensor& a, std::vector<int> axes, bool keepdims, bool take_mean,
                   const char* op) {
    axes = normalize_axes(std::move(axes), a.ndim(), op);
    ReduceMap rm(a.shape(), axes, keepdims);
    long long count = 1;
    for (int ax : axes) count *= a.dim(ax);

    const std::vector<double>& av = a.vec();
    std::vector<double> out(shape_numel(rm.out_shape), 0.0);
    for (long long i = 0; i < static_cast<long long>(av.size()); ++i)
        out[rm.out_index(i)] += av[i];
    if (take_mean)
        for (double& v : out) v /= static_cast<double>(count);
    Tensor value = Tensor::from_vector(std::move(out), rm.out_shape, a.dtype());

    double scale = take_mean ? 1.0 / static_cast<double>(count) : 1.0;
    return record_unary(value, a, [rm, scale, a](const Tensor& g) {
        const std::vector<double>& gv = g.vec();
        std::vector<double> dx(a.numel());
        for (long long i = 0; i < static_cast<long long>(dx.size()); ++i)
            dx[i] = gv[rm.out_index(i)] * scale;
        return Tensor::from_vector(std::move(dx), a.shape(), a.dtype());
    });
}

} // namespace

Tensor sum(const Tensor& a) {
    std::vector<int> axes(a.ndim());
    for (int i = 0; i < a.ndim(); ++i) axes[i] = i;
    return reduce_impl(a, axes, false, false, "sum");
}

Tensor sum(const Tensor& a, std::vector<int> axes, bool keepdims) {
    return reduce_impl(a, std::move(axes), keepdims, false, "sum");
}

Tensor mean(const Tensor& a) {
    std::vector<int> axes(a.ndim());
    for (int i = 0; i < a.ndim(); ++i) axes[i] = i;
    return reduce_impl(a, axes, false, true, "mean");
}

Tensor mean(const Tensor& a, std::vector<int> axes, bool keepdims) {
    return reduce_impl(a, std::move(axes), keepdims, true, "mean");
}

// ---- linear algebra ---------------------------------------------------------

namespace {

Tensor matmul_raw(const Tensor& a, const Tensor& b) {
    if (a.ndim() < 2 || b.ndim() < 2)
        throw DimensionError("matmul: operands must have rank >= 2, got " + a.shape_str() +
                             " and " + b.shape_str());
    require_same_dtype(a, b, "matmul");
    const bool rhs_shared = (b.ndim() == 2 && a.ndim() > 2);
    if (!rhs_shared) {
        if (a.ndim() != b.ndim())
            throw DimensionError("matmul: rank mismatch " + a.shape_str() + " vs " +
                                 b.shape_str());
        for (int i = 0; i < a.ndim() - 2; ++i)
            if (a.dim(i) != b.dim(i))
                throw DimensionError("matmul: batch dims differ, " + a.shape_str() + " vs " +
                                     b.shape_str());
    }
    const int m = a.dim(-2), k = a.dim(-1);
    const int kb = b.dim(-2), n = b.dim(-1);
    if (k != kb)
        throw DimensionError("matmul: inner dims differ, " + a.shape_str() + " vs " +
                             b.shape_str());

    long long batch = 1;
    for (int i = 0; i < a.ndim() - 2; ++i) batch *= a.dim(i);

    std::vector<int> out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);

    const double* ap = a.data();
    const double* bp = b.data();
    std::vector<double> out(batch * m * n, 0.0);
    for (long long t = 0; t < batch; ++t) {
        const double* A = ap + t * static_cast<long long>(m) * k;
        const double* B = rhs_shared ? bp : bp + t * static_cast<long long>(k) * n;
        double* C = out.data() + t * static_cast<long long>(m) * n;
        for (int i = 0; i < m; ++i) {
            const double* Ai = A + static_cast<long long>(i) * k;
            double* Ci = C + static_cast<long long>(i) * n;
            for (int kk = 0; kk < k; ++kk) {
                const double av = Ai[kk];
                if (av == 0.0) continue;
                const double* Bk = B + static_cast<long long>(kk) * n;
                for (int j = 0; j < n; ++j) Ci[j] += av * Bk[j];
            }
        }
    }
    return Tensor::from_vector(std::move(out), out_shape, a.dtype());
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    ++g_counters.matmul_calls;
    Tensor value = matmul_raw(a, b);
    const bool rhs_shared = (b.ndim() == 2 && a.ndim() > 2);
    return record_binary(
        value, a, b,
        [b](const Tensor& g) { return matmul_raw(g, transpose_last2(b)); },
        [a, rhs_shared](const Tensor& g) {
            if (!rhs_shared) return matmul_raw(transpose_last2(a), g);
            // shared 2-D rhs: fold the batch into rows before the product
            const int k = a.dim(-1), n = g.dim(-1);
            Tensor a2 = reshape(a, {static_cast<int>(a.numel() / k), k});
            Tensor g2 = reshape(g, {static_cast<int>(g.numel() / n), n});
            return matmul_raw(transpose_last2(a2), g2);
        });
}

Tensor softmax(const Tensor& a, int axis) {
    ++g_counters.softmax_calls;
    axis = normalize_axis(axis, a.ndim(), "softmax");
    const std::vector<double>& av = a.vec();
    for (double v : av)
        if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");

    long long outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= a.dim(i);
    for (int i = axis + 1; i < a.ndim(); ++i) inner *= a.dim(i);
    const int n = a.dim(axis);

    std::vector<double> out(av.size());
    for (long long o = 0; o < outer; ++o) {
        for (long long in = 0; in < inner; ++in) {
            const long long base = o * n * inner + in;
            double mx = av[base];
            for (int c = 1; c < n; ++c) mx = std::max(mx, av[base + c * inner]);
            double z = 0.0;
            for (int c = 0; c < n; ++c) {
                double e = std::exp(av[base + c * inner] - mx);
                out[base + c * inner] = e;
                z += e;
            }
            for (int c = 0; c < n; ++c) out[base + c * inner] /= z;
        }
    }
    Tensor value = Tensor::from_vector(std::move(out), a.shape(), a.dtype());

    return record_unary(value, a, [value, axis](const Tensor& g) {
        // dx = y * (g - sum(g*y, axis))
        Tensor gy = mul(g, value);
        Tensor s = sum(gy, {axis}, true);
        const std::vector<double>& gv = g.vec();
        const std::vector<double>& yv = value.vec();
        const std::vector<double>& sv = s.vec();
        long long outer2 = 1, inner2 = 1;
        for (int i = 0; i < axis; ++i) outer2 *= g.dim(i);
        for (int i = axis + 1; i < g.ndim(); ++i) inner2 *= g.dim(i);
        const int n2 = g.dim(axis);
        std::vector<double> dx(gv.size());
        for (long long o = 0; o < outer2; ++o)
            for (int c = 0; c < n2; ++c)
                for (long long in = 0; in < inner2; ++in) {
                    long long idx = (o * n2 + c) * inner2 + in;
                    dx[idx] = yv[idx] * (gv[idx] - sv[o * inner2 + in]);
                }
        return Tensor::from_vector(std::move(dx), g.shape(), g.dtype());
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const int c = x.dim(-1);
    if (gamma.ndim() != 1 || beta.ndim() != 1 || gamma.dim(0) != c || beta.dim(0) != c)
        throw DimensionError("layer_norm: gamma/beta must be vectors of length " +
                             std::to_string(c));
    require_same_dtype(x, gamma, "layer_norm");
    require_same_dtype(x, beta, "layer_norm");

    const long long rows = x.numel() / c;
    const std::vector<double>& xv = x.vec();
    const std::vector<double>& gv = gamma.vec();
    const std::vector<double>& bv = beta.vec();

    std::vector<double> xhat(xv.size());
    std::vector<double> inv_std(rows);
    std::vector<double> out(xv.size());
    for (long long r = 0; r < rows; ++r) {
        const double* row = xv.data() + r * c;
        double mu = 0.0;
        for (int i = 0; i < c; ++i) mu += row[i];
        mu /= c;
        double var = 0.0;
        for (int i = 0; i < c; ++i) {
            double d = row[i] - mu;
            var += d * d;
        }
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int i = 0; i < c; ++i) {
            double h = (row[i] - mu) * is;
            xhat[r * c + i] = h;
            out[r * c + i] = h * gv[i] + bv[i];
        }
    }
    Tensor value = Tensor::from_vector(std::move(out), x.shape(), x.dtype());
    Tensor xhat_t = Tensor::from_vector(std::move(xhat), x.shape(), x.dtype());

    return detail::record_ternary(
        value, x, gamma, beta,
        [xhat_t, gamma, inv_std, c, rows](const Tensor& g) {
            // dx = is * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
            const std::vector<double>& gv2 = g.vec();
            const std::vector<double>& hv = xhat_t.vec();
            const std::vector<double>& gam = gamma.vec();
            std::vector<double> dx(gv2.size());
            for (long long r = 0; r < rows; ++r) {
                double m1 = 0.0, m2 = 0.0;
                for (int i = 0; i < c; ++i) {
                    double dh = gv2[r * c + i] * gam[i];
                    m1 += dh;
                    m2 += dh * hv[r * c + i];
                }
                m1 /= c;
                m2 /= c;
                for (int i = 0; i < c; ++i) {
                    double dh = gv2[r * c + i] * gam[i];
                    dx[r * c + i] = inv_std[r] * (dh - m1 - hv[r * c + i] * m2);
                }
            }
            return Tensor::from_vector(std::move(dx), g.shape(), g.dtype());
        },
        [xhat_t, c](const Tensor& g) {
            const std::vector<double>& gv2 = g.vec();
            const std::vector<double>& hv = xhat_t.vec();
            std::vector<double> dg(c, 0.0);
            const long long rows2 = g.numel() / c;
            for (long long r = 0; r < rows2; ++r)
                for (int i = 0; i < c; ++i) dg[i] += gv2[r * c + i] * hv[r * c + i];
            return Tensor::from_vector(std::move(dg), {c}, g.dtype());
        },
        [c](const Tensor& g) {
            const std::vector<double>& gv2 = g.vec();
            std::vector<double> db(c, 0.0);
            const long long rows2 = g.numel() / c;
            for (long long r = 0; r < rows2; ++r)
                for (int i = 0; i < c; ++i) db[i] += gv2[r * c + i];
            return Tensor::from_vector(std::move(db), {c}, g.dtype());
        });
}

Tensor clamp01(const Tensor& x) {
    Tensor v = map1(x, [](double a) { return a < 0.0 ? 0.0 : (a > 1.0 ? 1.0 : a); });
    return record_unary(v, x, [x](const Tensor& g) {
        Tensor inside = map1(x, [](double a) { return (a >= 0.0 && a <= 1.0) ? 1.0 : 0.0; });
        return mul(g, inside);
    });
}

} // namespace asid
