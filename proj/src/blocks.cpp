#include "asid/blocks.hpp"

#include <algorithm>

#include "asid/errors.hpp"
#include "asid/ops.hpp"

namespace asid {

Tensor se_forward(const Tensor& f, const ParamMap& p, const std::string& prefix) {
    if (f.ndim() != 4)
        throw DimensionError("se_forward: expected (B,C,H,W), got " + f.shape_str());
    Tensor pooled = mean(f, {2, 3}, false); // [B, C]
    Tensor z = add_vec(matmul(pooled, param(p, prefix + ".fc1.weight")),
                       param(p, prefix + ".fc1.bias"), -1);
    z = relu(z);
    z = add_vec(matmul(z, param(p, prefix + ".fc2.weight")),
                param(p, prefix + ".fc2.bias"), -1);
    return scale_channels(f, sigmoid(z));
}

Tensor lm_forward(const Tensor& f, const ParamMap& p, const std::string& prefix,
                  const ModelConfig& cfg) {
    (void)cfg;
    const int C = f.dim(1);
    Tensor y = conv2d(f, param(p, prefix + ".pw.weight"), param(p, prefix + ".pw.bias"),
                      1, 0, 1);
    y = conv2d(y, param(p, prefix + ".dw.weight"), param(p, prefix + ".dw.bias"), 1, 1, C);
    y = gelu(y);
    y = se_forward(y, p, prefix + ".se");
    return add(y, f);
}

Tensor esa_forward(const Tensor& f, const ParamMap& p, const std::string& prefix) {
    if (f.ndim() != 4)
        throw DimensionError("esa_forward: expected (B,C,H,W), got " + f.shape_str());
    const int H = f.dim(2), W = f.dim(3);

    Tensor c1 = conv2d(f, param(p, prefix + ".conv1.weight"),
                       param(p, prefix + ".conv1.bias"), 1, 0, 1);
    Tensor skip = conv2d(c1, param(p, prefix + ".conv_f.weight"),
                         param(p, prefix + ".conv_f.bias"), 1, 0, 1);

    Tensor s = conv2d(c1, param(p, prefix + ".conv2.weight"),
                      param(p, prefix + ".conv2.bias"), 2, 0, 1);
    // the 7x7/stride-3 pool shrinks to the map when the map is already tiny
    const int k = std::min({7, s.dim(2), s.dim(3)});
    Tensor t = max_pool2d(s, k, 3);
    t = relu(conv2d(t, param(p, prefix + ".conv_max.weight"),
                    param(p, prefix + ".conv_max.bias"), 1, 1, 1));
    t = relu(conv2d(t, param(p, prefix + ".conv3.weight"),
                    param(p, prefix + ".conv3.bias"), 1, 1, 1));
    t = conv2d(t, param(p, prefix + ".conv3b.weight"), param(p, prefix + ".conv3b.bias"),
               1, 1, 1);
    t = bilinear_resize(t, H, W);

    Tensor m = conv2d(add(t, skip), param(p, prefix + ".conv4.weight"),
                      param(p, prefix + ".conv4.bias"), 1, 0, 1);
    return mul(f, sigmoid(m));
}

Tensor idb_forward(const Tensor& f_in, const ParamMap& p, const ModelConfig& cfg,
                   int block, AttentionRegistry& registry, AttentionSink* sink) {
    if (f_in.ndim() != 4 || f_in.dim(1) != cfg.channels)
        throw DimensionError("idb_forward: expected (B," + std::to_string(cfg.channels) +
                             ",H,W), got " + f_in.shape_str());
    const std::string base = "body.block" + std::to_string(block);
    const std::vector<int> widths = unit_widths(cfg);
    const int r = cfg.refined_width;

    Tensor x = f_in;
    std::vector<Tensor> refined;
    for (int i = 1; i <= cfg.units; ++i) {
        const std::string unit = base + ".unit" + std::to_string(i);
        Tensor t = lm_forward(x, p, unit + ".lm", cfg);

        SamResult s;
        if (sam_is_producer(cfg, block, i)) {
            s = sam_forward(t, p, unit + ".sam", cfg, true, nullptr, block, i, sink);
            if (cfg.share_mode != ShareMode::None)
                registry.publish(block, i, s.produced);
        } else {
            const AttentionEntry& shared = registry.fetch(block, i);
            s = sam_forward(t, p, unit + ".sam", cfg, false, &shared, block, i, sink);
        }

        if (i < cfg.units && r > 0) {
            std::vector<Tensor> parts = split(s.out, 1, {r, widths[i - 1] - r});
            refined.push_back(parts[0]);
            x = parts[1];
        } else {
            x = s.out;
        }
    }

    Tensor fused;
    if (r > 0) {
        refined.push_back(x);
        Tensor cat = concat(refined, 1);
        fused = conv2d(cat, param(p, base + ".fuse.weight"), param(p, base + ".fuse.bias"),
                       1, 0, 1);
    } else {
        fused = x;
    }

    Tensor y = cam_forward(fused, p, base + ".cam", cfg, block, sink);
    y = add(y, f_in);
    return esa_forward(y, p, base + ".esa");
}

} // namespace asid
