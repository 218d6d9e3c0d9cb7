#include <memory>

#include "asid/ops.hpp"
#include "op_common.hpp"

namespace asid {

using detail::normalize_axis;
using detail::record_unary;
using detail::require_same_dtype;

namespace {

// out[i] = x[map[i]]. The gradient scatter-adds back through the map, which
// also covers non-injective maps (reflection padding).
Tensor take(const Tensor& x, std::shared_ptr<const std::vector<long long>> map,
            std::vector<int> out_shape) {
    const std::vector<double>& xv = x.vec();
    std::vector<double> out(map->size());
    for (size_t i = 0; i < map->size(); ++i) out[i] = xv[(*map)[i]];
    Tensor value = Tensor::from_vector(std::move(out), std::move(out_shape), x.dtype());
    return record_unary(value, x, [x, map](const Tensor& g) {
        const std::vector<double>& gv = g.vec();
        std::vector<double> dx(x.numel(), 0.0);
        for (size_t i = 0; i < map->size(); ++i) dx[(*map)[i]] += gv[i];
        return Tensor::from_vector(std::move(dx), x.shape(), x.dtype());
    });
}

} // namespace

Tensor reshape(const Tensor& a, std::vector<int> shape) {
    Tensor value = a.detached().with_shape(std::move(shape));
    return record_unary(value, a,
                        [a](const Tensor& g) { return g.detached().with_shape(a.shape()); });
}

Tensor permute(const Tensor& a, const std::vector<int>& order) {
    const int nd = a.ndim();
    if (static_cast<int>(order.size()) != nd)
        throw DimensionError("permute: order length " + std::to_string(order.size()) +
                             " does not match rank " + std::to_string(nd));
    std::vector<bool> seen(nd, false);
    for (int o : order) {
        if (o < 0 || o >= nd || seen[o])
            throw DimensionError("permute: order is not a permutation of axes");
        seen[o] = true;
    }

    std::vector<int> out_shape(nd);
    for (int i = 0; i < nd; ++i) out_shape[i] = a.dim(order[i]);
    std::vector<long long> in_strides = detail::row_major_strides(a.shape());

    auto map = std::make_shared<std::vector<long long>>(a.numel());
    std::vector<int> coord(nd, 0);
    for (long long i = 0; i < a.numel(); ++i) {
        long long src = 0;
        for (int d = 0; d < nd; ++d) src += static_cast<long long>(coord[d]) * in_strides[order[d]];
        (*map)[i] = src;
        for (int d = nd - 1; d >= 0; --d) {
            if (++coord[d] < out_shape[d]) break;
            coord[d] = 0;
        }
    }
    return take(a, map, out_shape);
}

Tensor transpose_last2(const Tensor& a) {
    if (a.ndim() < 2)
        throw DimensionError("transpose_last2: rank must be >= 2, got " + a.shape_str());
    std::vector<int> order(a.ndim());
    for (int i = 0; i < a.ndim(); ++i) order[i] = i;
    std::swap(order[a.ndim() - 2], order[a.ndim() - 1]);
    return permute(a, order);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    const Tensor& first = parts.front();
    axis = normalize_axis(axis, first.ndim(), "concat");
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.ndim() != first.ndim())
            throw DimensionError("concat: rank mismatch " + p.shape_str() + " vs " +
                                 first.shape_str());
        require_same_dtype(p, first, "concat");
        for (int d = 0; d < first.ndim(); ++d)
            if (d != axis && p.dim(d) != first.dim(d))
                throw DimensionError("concat: shape mismatch " + p.shape_str() + " vs " +
                                     first.shape_str() + " outside axis " +
                                     std::to_string(axis));
        total += p.dim(axis);
    }

    std::vector<int> out_shape = first.shape();
    out_shape[axis] = total;
    long long outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= first.dim(i);
    for (int i = axis + 1; i < first.ndim(); ++i) inner *= first.dim(i);

    std::vector<double> out(shape_numel(out_shape));
    long long off = 0;
    for (const Tensor& p : parts) {
        const std::vector<double>& pv = p.vec();
        const long long block = static_cast<long long>(p.dim(axis)) * inner;
        for (long long o = 0; o < outer; ++o)
            std::copy(pv.begin() + o * block, pv.begin() + (o + 1) * block,
                      out.begin() + o * total * inner + off);
        off += block;
    }
    Tensor value = Tensor::from_vector(std::move(out), out_shape, first.dtype());

    Tape* tp = Tape::active();
    bool any = false;
    for (const Tensor& p : parts) any = any || detail::is_tracked(p, tp);
    if (!any) return value;

    std::vector<int> nodes(parts.size(), -1);
    std::vector<int> widths(parts.size());
    for (size_t i = 0; i < parts.size(); ++i) {
        if (detail::is_tracked(parts[i], tp)) nodes[i] = parts[i].node();
        widths[i] = parts[i].dim(axis);
    }
    return tp->attach(value, [nodes, widths, axis](const Tensor& g, Tape& t) {
        std::vector<Tensor> slices = split(g, axis, widths);
        for (size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i] >= 0) t.accumulate(nodes[i], slices[i]);
    });
}

std::vector<Tensor> split(const Tensor& a, int axis, const std::vector<int>& widths) {
    axis = normalize_axis(axis, a.ndim(), "split");
    int total = 0;
    for (int w : widths) {
        if (w <= 0) throw DimensionError("split: widths must be positive");
        total += w;
    }
    if (total != a.dim(axis))
        throw DimensionError("split: widths sum to " + std::to_string(total) +
                             " but axis extent is " + std::to_string(a.dim(axis)));

    long long inner = 1;
    for (int i = axis + 1; i < a.ndim(); ++i) inner *= a.dim(i);

    std::vector<Tensor> out;
    long long off = 0;
    for (int w : widths) {
        std::vector<int> shape = a.shape();
        shape[axis] = w;
        auto map = std::make_shared<std::vector<long long>>(shape_numel(shape));
        const long long block = w * inner;
        const long long stride = static_cast<long long>(a.dim(axis)) * inner;
        for (long long i = 0; i < static_cast<long long>(map->size()); ++i)
            (*map)[i] = (i / block) * stride + off + i % block;
        out.push_back(take(a, map, shape));
        off += block;
    }
    return out;
}

Tensor pixel_shuffle(const Tensor& x, int r) {
    if (x.ndim() != 4)
        throw DimensionError("pixel_shuffle: expected (B,C,H,W), got " + x.shape_str());
    const int B = x.dim(0), C_in = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (r < 1 || C_in % (r * r) != 0)
        throw DimensionError("pixel_shuffle: channels " + std::to_string(C_in) +
                             " not divisible by r^2 = " + std::to_string(r * r));
    const int C = C_in / (r * r);
    auto map = std::make_shared<std::vector<long long>>(x.numel());
    long long i = 0;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H * r; ++y)
                for (int xx = 0; xx < W * r; ++xx, ++i) {
                    const int dy = y % r, iy = y / r, dx = xx % r, ix = xx / r;
                    const long long ch = static_cast<long long>(c) * r * r + dy * r + dx;
                    (*map)[i] = ((static_cast<long long>(b) * C_in + ch) * H + iy) * W + ix;
                }
    return take(x, map, {B, C, H * r, W * r});
}

Tensor pixel_unshuffle(const Tensor& x, int r) {
    if (x.ndim() != 4)
        throw DimensionError("pixel_unshuffle: expected (B,C,H,W), got " + x.shape_str());
    const int B = x.dim(0), C = x.dim(1), Hr = x.dim(2), Wr = x.dim(3);
    if (r < 1 || Hr % r != 0 || Wr % r != 0)
        throw DimensionError("pixel_unshuffle: spatial dims " + x.shape_str() +
                             " not divisible by r = " + std::to_string(r));
    const int H = Hr / r, W = Wr / r;
    auto map = std::make_shared<std::vector<long long>>(x.numel());
    long long i = 0;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx)
                    for (int y = 0; y < H; ++y)
                        for (int xx = 0; xx < W; ++xx, ++i)
                            (*map)[i] = ((static_cast<long long>(b) * C + c) * Hr + y * r + dy) *
                                            Wr +
                                        xx * r + dx;
    return take(x, map, {B, C * r * r, H, W});
}

namespace {

void check_partition(const Tensor& x, int size, const char* op) {
    if (x.ndim() != 4)
        throw DimensionError(std::string(op) + ": expected (B,C,H,W), got " + x.shape_str());
    if (size < 1 || x.dim(2) % size != 0 || x.dim(3) % size != 0)
        throw ContractError(std::string(op) + ": spatial dims " + x.shape_str() +
                            " not divisible by " + std::to_string(size));
}

} // namespace

Tensor partition_meso(const Tensor& x, int P) {
    check_partition(x, P, "partition_meso");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int nty = H / P, ntx = W / P;
    auto map = std::make_shared<std::vector<long long>>(x.numel());
    long long i = 0;
    for (int b = 0; b < B; ++b)
        for (int ty = 0; ty < nty; ++ty)
            for (int tx = 0; tx < ntx; ++tx)
                for (int py = 0; py < P; ++py)
                    for (int px = 0; px < P; ++px)
                        for (int c = 0; c < C; ++c, ++i)
                            (*map)[i] = ((static_cast<long long>(b) * C + c) * H + ty * P + py) *
                                            W +
                                        tx * P + px;
    return take(x, map, {B * nty * ntx, P * P, C});
}

Tensor departition_meso(const Tensor& w, int P, int B, int C, int H, int W) {
    const int nty = H / P, ntx = W / P;
    if (w.ndim() != 3 || w.dim(0) != B * nty * ntx || w.dim(1) != P * P || w.dim(2) != C)
        throw DimensionError("departition_meso: windows " + w.shape_str() +
                             " do not match geometry B=" + std::to_string(B) +
                             " C=" + std::to_string(C) + " H=" + std::to_string(H) +
                             " W=" + std::to_string(W) + " P=" + std::to_string(P));
    auto map = std::make_shared<std::vector<long long>>(w.numel());
    long long i = 0;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x, ++i) {
                    const long long win =
                        (static_cast<long long>(b) * nty + y / P) * ntx + x / P;
                    const long long tok = static_cast<long long>(y % P) * P + x % P;
                    (*map)[i] = (win * P * P + tok) * C + c;
                }
    return take(w, map, {B, C, H, W});
}

Tensor partition_global(const Tensor& x, int G) {
    check_partition(x, G, "partition_global");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int gh = H / G, gw = W / G; // grid strides == number of groups per axis
    auto map = std::make_shared<std::vector<long long>>(x.numel());
    long long i = 0;
    for (int b = 0; b < B; ++b)
        for (int a = 0; a < gh; ++a)
            for (int bb = 0; bb < gw; ++bb)
                for (int gy = 0; gy < G; ++gy)
                    for (int gx = 0; gx < G; ++gx)
                        for (int c = 0; c < C; ++c, ++i)
                            (*map)[i] = ((static_cast<long long>(b) * C + c) * H + gy * gh + a) *
                                            W +
                                        gx * gw + bb;
    return take(x, map, {B * gh * gw, G * G, C});
}

Tensor departition_global(const Tensor& w, int G, int B, int C, int H, int W) {
    const int gh = H / G, gw = W / G;
    if (w.ndim() != 3 || w.dim(0) != B * gh * gw || w.dim(1) != G * G || w.dim(2) != C)
        throw DimensionError("departition_global: windows " + w.shape_str() +
                             " do not match geometry B=" + std::to_string(B) +
                             " C=" + std::to_string(C) + " H=" + std::to_string(H) +
                             " W=" + std::to_string(W) + " G=" + std::to_string(G));
    auto map = std::make_shared<std::vector<long long>>(w.numel());
    long long i = 0;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x, ++i) {
                    const long long win =
                        (static_cast<long long>(b) * gh + y % gh) * gw + x % gw;
                    const long long tok = static_cast<long long>(y / gh) * G + x / gw;
                    (*map)[i] = (win * G * G + tok) * C + c;
                }
    return take(w, map, {B, C, H, W});
}

Tensor reflect_pad2d(const Tensor& x, int top, int bottom, int left, int right) {
    if (x.ndim() != 4)
        throw DimensionError("reflect_pad2d: expected (B,C,H,W), got " + x.shape_str());
    if (top < 0 || bottom < 0 || left < 0 || right < 0)
        throw ContractError("reflect_pad2d: negative padding");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (top >= H || bottom >= H || left >= W || right >= W)
        throw ContractError("reflect_pad2d: padding must be smaller than the image, got " +
                            x.shape_str());
    const int Ho = H + top + bottom, Wo = W + left + right;
    auto reflect = [](int v, int n) {
        if (v < 0) return -v;
        if (v >= n) return 2 * (n - 1) - v;
        return v;
    };
    auto map = std::make_shared<std::vector<long long>>(
        static_cast<long long>(B) * C * Ho * Wo);
    long long i = 0;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < Ho; ++y)
                for (int xx = 0; xx < Wo; ++xx, ++i) {
                    const int sy = reflect(y - top, H);
                    const int sx = reflect(xx - left, W);
                    (*map)[i] = ((static_cast<long long>(b) * C + c) * H + sy) * W + sx;
                }
    return take(x, map, {B, C, Ho, Wo});
}

Tensor crop2d(const Tensor& x, int top, int left, int height, int width) {
    if (x.ndim() != 4)
        throw DimensionError("crop2d: expected (B,C,H,W), got " + x.shape_str());
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > H ||
        left + width > W)
        throw ContractError("crop2d: region out of bounds for " + x.shape_str());
    auto map = std::make_shared<std::vector<long long>>(
        static_cast<long long>(B) * C * height * width);
    long long i = 0;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < height; ++y)
                for (int xx = 0; xx < width; ++xx, ++i)
                    (*map)[i] = ((static_cast<long long>(b) * C + c) * H + top + y) * W + left +
                                xx;
    return take(x, map, {B, C, height, width});
}

} // namespace asid
