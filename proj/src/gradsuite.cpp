#include "asid/gradsuite.hpp"

#include <cmath>
#include <random>

#include "asid/blocks.hpp"
#include "asid/gradcheck.hpp"
#include "asid/network.hpp"
#include "asid/ops.hpp"

namespace asid {

namespace {

Tensor rnd(std::vector<int> shape, std::uint64_t seed, double lo = -1.0,
           double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = dist(rng);
    return Tensor::from_vector(std::move(v), std::move(shape), Dtype::F64);
}

// Uniform values pushed away from zero, for ops with a kink there.
Tensor rnd_off_zero(std::vector<int> shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = sign(rng) ? dist(rng) : -dist(rng);
    return Tensor::from_vector(std::move(v), std::move(shape), Dtype::F64);
}

// Fixed pseudo-random weights decouple the coordinates of `t` in the scalar
// loss, so sign errors cannot cancel inside a plain sum.
Tensor probe_loss(const Tensor& t, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.25, 1.75);
    std::vector<double> w(t.numel());
    for (double& x : w) x = dist(rng);
    return sum(mul(t, Tensor::from_vector(std::move(w), t.shape(), Dtype::F64)));
}

// Parameter names under `prefix` from a built model, in map order.
std::vector<std::string> names_under(const ParamMap& params, const std::string& prefix) {
    std::vector<std::string> names;
    for (const auto& [name, t] : params)
        if (name.rfind(prefix, 0) == 0) names.push_back(name);
    return names;
}

struct SuiteBuilder {
    std::vector<GradSuiteCase> cases;

    void run(const std::string& name, const ScalarFn& fn,
             const std::vector<Tensor>& inputs, int probes = 0) {
        GradCheckOptions opts;
        opts.max_probes_per_input = probes;
        cases.push_back({name, gradcheck_max_rel_error(fn, inputs, opts)});
    }

    // Unary op with a dense loss on its output.
    void unary(const std::string& name, Tensor (*op)(const Tensor&), Tensor input) {
        run(name,
            [op](const std::vector<Tensor>& in) { return probe_loss(op(in[0]), 11); },
            {std::move(input)});
    }
};

ModelConfig micro_idb_config() {
    ModelConfig cfg;
    cfg.blocks = 1;
    cfg.channels = 16;
    cfg.refined_width = 4;
    cfg.units = 3;
    cfg.meso = 2;
    cfg.global = 2;
    return cfg;
}

ModelConfig micro_e2e_config() {
    ModelConfig cfg;
    cfg.blocks = 2;
    cfg.channels = 8;
    cfg.refined_width = 2;
    cfg.units = 3;
    cfg.meso = 2;
    cfg.global = 2;
    return cfg;
}

// fn over [input, params...] rebuilt into a map each call.
ScalarFn with_params(std::vector<std::string> names,
                     std::function<Tensor(const Tensor&, const ParamMap&)> body) {
    return [names = std::move(names),
            body = std::move(body)](const std::vector<Tensor>& in) {
        ParamMap map;
        for (std::size_t i = 0; i < names.size(); ++i) map[names[i]] = in[i + 1];
        return body(in[0], map);
    };
}

std::vector<Tensor> gather_inputs(const Tensor& x, const ParamMap& params,
                                  const std::vector<std::string>& names) {
    std::vector<Tensor> inputs{x};
    for (const std::string& n : names) inputs.push_back(params.at(n));
    return inputs;
}

} // namespace

std::vector<GradSuiteCase> run_gradient_suite(bool include_end_to_end) {
    SuiteBuilder s;

    // elementwise
    s.run("add", [](const std::vector<Tensor>& in) {
        return probe_loss(add(in[0], in[1]), 3);
    }, {rnd({2, 3, 4}, 1), rnd({2, 3, 4}, 2)});
    s.run("sub", [](const std::vector<Tensor>& in) {
        return probe_loss(sub(in[0], in[1]), 3);
    }, {rnd({2, 3, 4}, 3), rnd({2, 3, 4}, 4)});
    s.run("mul", [](const std::vector<Tensor>& in) {
        return probe_loss(mul(in[0], in[1]), 3);
    }, {rnd({2, 3, 4}, 5), rnd({2, 3, 4}, 6)});
    s.run("add_scalar", [](const std::vector<Tensor>& in) {
        return probe_loss(add_scalar(in[0], 0.37), 3);
    }, {rnd({3, 4}, 7)});
    s.run("mul_scalar", [](const std::vector<Tensor>& in) {
        return probe_loss(mul_scalar(in[0], -1.7), 3);
    }, {rnd({3, 4}, 8)});
    s.unary("neg", neg, rnd({3, 4}, 9));
    s.unary("relu", relu, rnd_off_zero({3, 5}, 10));
    s.unary("gelu", gelu, rnd({3, 5}, 11));
    s.unary("sigmoid", sigmoid, rnd({3, 5}, 12));
    s.unary("abs", abs, rnd_off_zero({3, 5}, 13));
    s.run("clamp01", [](const std::vector<Tensor>& in) {
        return probe_loss(clamp01(in[0]), 3);
    }, {rnd({3, 5}, 14, 0.05, 0.95)});

    s.run("add_vec_channel", [](const std::vector<Tensor>& in) {
        return probe_loss(add_vec(in[0], in[1], 1), 5);
    }, {rnd({2, 3, 4, 5}, 15), rnd({3}, 16)});
    s.run("add_vec_last", [](const std::vector<Tensor>& in) {
        return probe_loss(add_vec(in[0], in[1], -1), 5);
    }, {rnd({2, 3, 4}, 17), rnd({4}, 18)});
    s.run("scale_channels", [](const std::vector<Tensor>& in) {
        return probe_loss(scale_channels(in[0], in[1]), 5);
    }, {rnd({2, 3, 4, 5}, 19), rnd({2, 3}, 20)});

    // reductions
    s.run("sum_all", [](const std::vector<Tensor>& in) { return sum(in[0]); },
          {rnd({2, 3, 4}, 21)});
    s.run("sum_axes", [](const std::vector<Tensor>& in) {
        return probe_loss(sum(in[0], {0, 2}, false), 5);
    }, {rnd({2, 3, 4}, 22)});
    s.run("mean_all", [](const std::vector<Tensor>& in) { return mean(in[0]); },
          {rnd({2, 3, 4}, 23)});
    s.run("mean_axes_keepdims", [](const std::vector<Tensor>& in) {
        return probe_loss(mean(in[0], {2, 3}, true), 5);
    }, {rnd({2, 3, 4, 5}, 24)});

    // linear algebra
    s.run("matmul_batched", [](const std::vector<Tensor>& in) {
        return probe_loss(matmul(in[0], in[1]), 5);
    }, {rnd({2, 3, 4}, 25), rnd({2, 4, 5}, 26)});
    s.run("matmul_shared_rhs", [](const std::vector<Tensor>& in) {
        return probe_loss(matmul(in[0], in[1]), 5);
    }, {rnd({2, 3, 4}, 27), rnd({4, 5}, 28)});
    s.run("softmax_last", [](const std::vector<Tensor>& in) {
        return probe_loss(softmax(in[0], -1), 5);
    }, {rnd({2, 3, 4}, 29, -2.0, 2.0)});
    s.run("softmax_axis1", [](const std::vector<Tensor>& in) {
        return probe_loss(softmax(in[0], 1), 5);
    }, {rnd({2, 3, 4}, 30, -2.0, 2.0)});
    s.run("layer_norm", [](const std::vector<Tensor>& in) {
        return probe_loss(layer_norm(in[0], in[1], in[2]), 5);
    }, {rnd({2, 3, 5}, 31), rnd({5}, 32, 0.5, 1.5), rnd({5}, 33)});

    // shape ops
    s.run("reshape", [](const std::vector<Tensor>& in) {
        return probe_loss(reshape(in[0], {4, 6}), 5);
    }, {rnd({2, 3, 4}, 34)});
    s.run("permute", [](const std::vector<Tensor>& in) {
        return probe_loss(permute(in[0], {2, 0, 1}), 5);
    }, {rnd({2, 3, 4}, 35)});
    s.run("transpose_last2", [](const std::vector<Tensor>& in) {
        return probe_loss(transpose_last2(in[0]), 5);
    }, {rnd({2, 3, 4}, 36)});
    s.run("concat", [](const std::vector<Tensor>& in) {
        return probe_loss(concat({in[0], in[1], in[2]}, 1), 5);
    }, {rnd({2, 2, 3}, 37), rnd({2, 1, 3}, 38), rnd({2, 3, 3}, 39)});
    s.run("split", [](const std::vector<Tensor>& in) {
        std::vector<Tensor> parts = split(in[0], 1, {2, 1, 3});
        return add(add(probe_loss(parts[0], 6), probe_loss(parts[1], 7)),
                   probe_loss(parts[2], 8));
    }, {rnd({2, 6, 3}, 40)});
    s.run("pixel_shuffle", [](const std::vector<Tensor>& in) {
        return probe_loss(pixel_shuffle(in[0], 2), 5);
    }, {rnd({1, 8, 3, 4}, 41)});
    s.run("pixel_unshuffle", [](const std::vector<Tensor>& in) {
        return probe_loss(pixel_unshuffle(in[0], 2), 5);
    }, {rnd({1, 2, 6, 8}, 42)});
    s.run("partition_meso", [](const std::vector<Tensor>& in) {
        return probe_loss(partition_meso(in[0], 2), 5);
    }, {rnd({1, 3, 4, 6}, 43)});
    s.run("departition_meso", [](const std::vector<Tensor>& in) {
        return probe_loss(departition_meso(in[0], 2, 1, 3, 4, 6), 5);
    }, {rnd({6, 4, 3}, 44)});
    s.run("partition_global", [](const std::vector<Tensor>& in) {
        return probe_loss(partition_global(in[0], 2), 5);
    }, {rnd({1, 3, 4, 6}, 45)});
    s.run("departition_global", [](const std::vector<Tensor>& in) {
        return probe_loss(departition_global(in[0], 2, 1, 3, 4, 6), 5);
    }, {rnd({6, 4, 3}, 46)});
    s.run("reflect_pad2d", [](const std::vector<Tensor>& in) {
        return probe_loss(reflect_pad2d(in[0], 1, 2, 2, 1), 5);
    }, {rnd({1, 2, 4, 5}, 47)});
    s.run("crop2d", [](const std::vector<Tensor>& in) {
        return probe_loss(crop2d(in[0], 1, 2, 3, 2), 5);
    }, {rnd({1, 2, 5, 5}, 48)});

    // convolution & resampling
    s.run("conv2d_pad1", [](const std::vector<Tensor>& in) {
        return probe_loss(conv2d(in[0], in[1], in[2], 1, 1, 1), 5);
    }, {rnd({2, 3, 5, 5}, 49), rnd({4, 3, 3, 3}, 50), rnd({4}, 51)});
    s.run("conv2d_stride2_nopad", [](const std::vector<Tensor>& in) {
        return probe_loss(conv2d(in[0], in[1], in[2], 2, 0, 1), 5);
    }, {rnd({1, 3, 7, 7}, 52), rnd({2, 3, 3, 3}, 53), rnd({2}, 54)});
    s.run("conv2d_depthwise", [](const std::vector<Tensor>& in) {
        return probe_loss(conv2d(in[0], in[1], in[2], 1, 1, 4), 5);
    }, {rnd({1, 4, 5, 5}, 55), rnd({4, 1, 3, 3}, 56), rnd({4}, 57)});
    s.run("conv2d_1x1_nobias", [](const std::vector<Tensor>& in) {
        return probe_loss(conv2d(in[0], in[1], 1, 0, 1), 5);
    }, {rnd({2, 3, 4, 4}, 58), rnd({5, 3, 1, 1}, 59)});
    s.run("max_pool2d", [](const std::vector<Tensor>& in) {
        return probe_loss(max_pool2d(in[0], 2, 2), 5);
    }, {rnd({1, 2, 6, 6}, 60)});
    s.run("bilinear_down", [](const std::vector<Tensor>& in) {
        return probe_loss(bilinear_resize(in[0], 3, 4), 5);
    }, {rnd({1, 2, 6, 8}, 61)});
    s.run("bilinear_up", [](const std::vector<Tensor>& in) {
        return probe_loss(bilinear_resize(in[0], 7, 9), 5);
    }, {rnd({1, 2, 3, 4}, 62)});

    // composite blocks, weights from the deterministic initializer
    {
        const ModelConfig cfg = micro_idb_config();
        const ParamMap params = build_model(cfg, 1234, Dtype::F64);
        const std::string lm = "body.block1.unit1.lm";
        auto lm_names = names_under(params, lm + ".");
        s.run("lm_block",
              with_params(lm_names, [lm, cfg](const Tensor& x, const ParamMap& p) {
                  return probe_loss(lm_forward(x, p, lm, cfg), 63);
              }),
              gather_inputs(rnd({1, 16, 4, 4}, 64), params, lm_names), 40);

        const std::string se = lm + ".se";
        auto se_names = names_under(params, se + ".");
        s.run("se_block",
              with_params(se_names, [se](const Tensor& x, const ParamMap& p) {
                  return probe_loss(se_forward(x, p, se), 65);
              }),
              gather_inputs(rnd({2, 16, 3, 3}, 66), params, se_names), 40);

        const std::string esa = "body.block1.esa";
        auto esa_names = names_under(params, esa + ".");
        s.run("esa_block",
              with_params(esa_names, [esa](const Tensor& x, const ParamMap& p) {
                  return probe_loss(esa_forward(x, p, esa), 67);
              }),
              gather_inputs(rnd({1, 16, 8, 8}, 68), params, esa_names), 30);

        const std::string cam = "body.block1.cam";
        auto cam_names = names_under(params, cam + ".");
        s.run("cam_block",
              with_params(cam_names, [cam, cfg](const Tensor& x, const ParamMap& p) {
                  return probe_loss(cam_forward(x, p, cam, cfg, 1), 69);
              }),
              gather_inputs(rnd({1, 16, 4, 4}, 70), params, cam_names), 30);

        const std::string sam = "body.block1.unit1.sam";
        auto sam_names = names_under(params, sam + ".");
        s.run("sam_producer",
              with_params(sam_names, [sam, cfg](const Tensor& x, const ParamMap& p) {
                  return probe_loss(
                      sam_forward(x, p, sam, cfg, true, nullptr, 1, 1).out, 71);
              }),
              gather_inputs(rnd({1, 16, 4, 4}, 72), params, sam_names), 30);

        auto idb_names = names_under(params, "body.block1.");
        s.run("idb_block",
              with_params(idb_names, [cfg](const Tensor& x, const ParamMap& p) {
                  AttentionRegistry registry(cfg);
                  return probe_loss(idb_forward(x, p, cfg, 1, registry), 73);
              }),
              gather_inputs(rnd({1, 16, 8, 8}, 74), params, idb_names), 12);
    }

    // consumer loss must reach the producer's Q,K through the shared matrices
    {
        const ModelConfig cfg = micro_e2e_config();
        const ParamMap params = build_model(cfg, 4321, Dtype::F64);
        const std::string prod = "body.block1.unit1.sam";
        const std::string cons = "body.block2.unit1.sam";
        auto names = names_under(params, prod + ".");
        auto cons_names = names_under(params, cons + ".");
        names.insert(names.end(), cons_names.begin(), cons_names.end());
        s.run("sam_shared_path",
              with_params(names, [prod, cons, cfg](const Tensor& x, const ParamMap& p) {
                  SamResult pr = sam_forward(x, p, prod, cfg, true, nullptr, 1, 1);
                  Tensor out =
                      sam_forward(x, p, cons, cfg, false, &pr.produced, 2, 1).out;
                  return probe_loss(out, 75);
              }),
              gather_inputs(rnd({1, 8, 4, 4}, 76), params, names), 30);
    }

    if (include_end_to_end) {
        const ModelConfig cfg = micro_e2e_config();
        const ParamMap params = build_model(cfg, 555, Dtype::F64);
        std::vector<std::string> names;
        for (const auto& [name, t] : params) names.push_back(name);
        s.run("model_end_to_end",
              with_params(names, [cfg](const Tensor& x, const ParamMap& p) {
                  return probe_loss(asid_forward(cfg, p, x, false), 77);
              }),
              gather_inputs(rnd({1, 3, 8, 8}, 78, 0.0, 1.0), params, names), 6);
    }

    return s.cases;
}

} // namespace asid
