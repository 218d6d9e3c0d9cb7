#include "asid/network.hpp"

#include <cmath>
#include <random>

#include "asid/blocks.hpp"
#include "asid/errors.hpp"
#include "asid/ops.hpp"

namespace asid {

namespace {

struct SpecBuilder {
    std::vector<ParamSpec> specs;

    void conv(const std::string& name, int out, int in, int k, int groups = 1) {
        specs.push_back({name + ".weight", {out, in / groups, k, k}, InitKind::ConvFanIn});
        specs.push_back({name + ".bias", {out}, InitKind::Zero});
    }
    void proj(const std::string& name, int in, int out) {
        specs.push_back({name + ".weight", {in, out}, InitKind::TruncNormal});
        specs.push_back({name + ".bias", {out}, InitKind::Zero});
    }
    void norm(const std::string& name, int c) {
        specs.push_back({name + ".gamma", {c}, InitKind::One});
        specs.push_back({name + ".beta", {c}, InitKind::Zero});
    }

    void attention_level(const std::string& prefix, const ModelConfig& cfg, int c,
                         bool with_qk, int qk_out) {
        norm(prefix + ".ln1", c);
        if (with_qk) {
            proj(prefix + ".q", c, qk_out);
            proj(prefix + ".k", c, qk_out);
        }
        proj(prefix + ".v", c, c);
        norm(prefix + ".ln2", c);
        const int h = ffn_hidden(cfg, c);
        proj(prefix + ".ffn1", c, h);
        proj(prefix + ".ffn2", h, c);
    }
};

} // namespace

std::vector<ParamSpec> enumerate_params(const ModelConfig& cfg) {
    validate(cfg);
    SpecBuilder b;
    const int C = cfg.channels;

    b.conv("head", C, 3, 3);

    const std::vector<int> widths = unit_widths(cfg);
    for (int blk = 1; blk <= cfg.blocks; ++blk) {
        const std::string base = "body.block" + std::to_string(blk);
        for (int i = 1; i <= cfg.units; ++i) {
            const std::string unit = base + ".unit" + std::to_string(i);
            const int w = widths[i - 1];

            b.conv(unit + ".lm.pw", w, w, 1);
            b.conv(unit + ".lm.dw", w, w, 3, w);
            const int wr = se_bottleneck(cfg, w);
            b.proj(unit + ".lm.se.fc1", w, wr);
            b.proj(unit + ".lm.se.fc2", wr, w);

            const bool producer = sam_is_producer(cfg, blk, i);
            const int d = qk_dim(cfg, w);
            b.attention_level(unit + ".sam.meso", cfg, w, producer, d);
            b.attention_level(unit + ".sam.global", cfg, w, producer, d);
        }
        if (cfg.refined_width > 0) b.conv(base + ".fuse", C, C, 1);
        b.attention_level(base + ".cam.meso", cfg, C, true, C);
        b.attention_level(base + ".cam.global", cfg, C, true, C);

        const int f = esa_width(C);
        b.conv(base + ".esa.conv1", f, C, 1);
        b.conv(base + ".esa.conv_f", f, f, 1);
        b.conv(base + ".esa.conv2", f, f, 3);
        b.conv(base + ".esa.conv_max", f, f, 3);
        b.conv(base + ".esa.conv3", f, f, 3);
        b.conv(base + ".esa.conv3b", f, f, 3);
        b.conv(base + ".esa.conv4", C, f, 1);
    }

    b.conv("tail", C, C, 3);
    b.conv("up", 3 * cfg.scale * cfg.scale, C, 3);
    return b.specs;
}

namespace {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<double> init_values(const ParamSpec& spec, std::uint64_t seed) {
    const long long n = shape_numel(spec.shape);
    std::vector<double> v(n);
    switch (spec.init) {
        case InitKind::Zero:
            return v;
        case InitKind::One:
            std::fill(v.begin(), v.end(), 1.0);
            return v;
        case InitKind::TruncNormal: {
            std::mt19937_64 rng(seed ^ fnv1a64(spec.name));
            std::normal_distribution<double> dist(0.0, 0.02);
            for (double& x : v) {
                do {
                    x = dist(rng);
                } while (std::fabs(x) > 0.04); // resample outside 2 std
            }
            return v;
        }
        case InitKind::ConvFanIn: {
            long long fan_in = 1;
            for (size_t i = 1; i < spec.shape.size(); ++i) fan_in *= spec.shape[i];
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            std::mt19937_64 rng(seed ^ fnv1a64(spec.name));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (double& x : v) x = dist(rng);
            return v;
        }
    }
    return v;
}

} // namespace

ParamMap build_model(const ModelConfig& cfg, std::uint64_t seed, Dtype dt) {
    ParamMap params;
    for (const ParamSpec& spec : enumerate_params(cfg))
        params[spec.name] = Tensor::from_vector(init_values(spec, seed), spec.shape, dt);
    return params;
}

Tensor asid_forward(const ModelConfig& cfg, const ParamMap& p, const Tensor& input,
                    bool inference, AttentionSink* sink, ForwardStats* stats) {
    if (input.ndim() != 4 || input.dim(1) != 3)
        throw DimensionError("asid_forward: expected (B,3,H,W), got " + input.shape_str());
    const int B = input.dim(0), H = input.dim(2), W = input.dim(3);
    const int L = pad_multiple(cfg);
    const int Hp = (H + L - 1) / L * L;
    const int Wp = (W + L - 1) / L * L;

    Tensor x = input;
    if (Hp != H || Wp != W) x = reflect_pad2d(x, 0, Hp - H, 0, Wp - W);

    Tensor f0 = conv2d(x, param(p, "head.weight"), param(p, "head.bias"), 1, 1, 1);

    AttentionRegistry registry(cfg);
    Tensor f = f0;
    for (int blk = 1; blk <= cfg.blocks; ++blk)
        f = idb_forward(f, p, cfg, blk, registry, sink);
    if (stats) stats->attention_entries = registry.entry_count();

    Tensor fd = conv2d(f, param(p, "tail.weight"), param(p, "tail.bias"), 1, 1, 1);
    Tensor u = add(f0, fd);

    Tensor y = conv2d(u, param(p, "up.weight"), param(p, "up.bias"), 1, 1, 1);
    y = pixel_shuffle(y, cfg.scale);

    if (Hp != H || Wp != W) y = crop2d(y, 0, 0, cfg.scale * H, cfg.scale * W);
    if (inference) y = clamp01(y);
    (void)B;
    return y;
}

} // namespace asid
