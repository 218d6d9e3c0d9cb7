#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "asid/autograd.hpp"
#include "asid/errors.hpp"
#include "asid/network.hpp"
#include "asid/ops.hpp"
#include "asid/trainer.hpp"
#include "asid/weight_store.hpp"

using namespace asid;

namespace {

ModelConfig micro_config() {
    ModelConfig cfg;
    cfg.blocks = 2;
    cfg.channels = 8;
    cfg.refined_width = 2;
    cfg.units = 3;
    cfg.meso = 2;
    cfg.global = 2;
    return cfg;
}

Image noise_image(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Image img(h, w);
    for (double& v : img.data) v = dist(rng);
    return img;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (long long i = 0; i < a.numel(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

std::string temp_path(const char* name) {
    return std::string("/tmp/asid_test_") + std::to_string(::getpid()) + "_" + name;
}

} // namespace

TEST_CASE("learning rate halves on the epoch schedule") {
    TrainConfig tc;
    tc.lr0 = 5e-4;
    tc.halve_period = 250;
    CHECK(lr_at(tc, 0) == doctest::Approx(5e-4).epsilon(1e-15));
    CHECK(lr_at(tc, 249) == doctest::Approx(5e-4).epsilon(1e-15));
    CHECK(lr_at(tc, 250) == doctest::Approx(2.5e-4).epsilon(1e-15));
    CHECK(lr_at(tc, 499) == doctest::Approx(2.5e-4).epsilon(1e-15));
    CHECK(lr_at(tc, 500) == doctest::Approx(1.25e-4).epsilon(1e-15));

    TrainConfig bad = tc;
    bad.loss = "l3";
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = tc;
    bad.batch = 0;
    CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("first adam step matches the closed form") {
    // p = 1, g = 1: m = 0.1, v = 0.001, bias correction makes m_hat = v_hat = 1,
    // so the update is exactly -lr / (1 + eps')
    ParamMap params;
    params["w"] = Tensor::from_vector({1.0}, {1}, Dtype::F64);
    std::map<std::string, Tensor> grads;
    grads["w"] = Tensor::from_vector({1.0}, {1}, Dtype::F64);
    AdamState state = init_adam(params);
    TrainConfig tc;
    adam_step(params, grads, state, tc, 0.01);
    CHECK(state.step == 1);
    CHECK(state.m.at("w").at({0}) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(state.v.at("w").at({0}) == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(params.at("w").at({0}) == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
}

TEST_CASE("zero gradients leave parameters in place while moments decay") {
    ParamMap params;
    params["w"] = Tensor::from_vector({2.0, -3.0}, {2}, Dtype::F64);
    std::map<std::string, Tensor> grads;
    grads["w"] = Tensor::zeros({2}, Dtype::F64);
    AdamState state = init_adam(params);
    TrainConfig tc;
    for (int i = 0; i < 3; ++i) adam_step(params, grads, state, tc, 0.1);
    CHECK(params.at("w").at({0}) == 2.0);
    CHECK(params.at("w").at({1}) == -3.0);
    CHECK(state.m.at("w").at({0}) == 0.0);
    CHECK(state.step == 3);
}

TEST_CASE("non-finite gradients abort with the parameter name") {
    ParamMap params;
    params["body.block1.fuse.weight"] = Tensor::from_vector({1.0}, {1}, Dtype::F64);
    std::map<std::string, Tensor> grads;
    grads["body.block1.fuse.weight"] =
        Tensor::from_vector({std::numeric_limits<double>::quiet_NaN()}, {1}, Dtype::F64);
    AdamState state = init_adam(params);
    TrainConfig tc;
    bool threw = false;
    try {
        adam_step(params, grads, state, tc, 0.01);
    } catch (const NumericError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("body.block1.fuse.weight") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("a training step is deterministic and reduces the loss") {
    const ModelConfig cfg = micro_config();
    const TrainConfig tc;
    const Tensor lr_batch = image_to_tensor(noise_image(8, 8, 1), Dtype::F64);
    const Tensor hr_batch = image_to_tensor(noise_image(16, 16, 2), Dtype::F64);

    ParamMap p1 = build_model(cfg, 5, Dtype::F64);
    ParamMap p2 = build_model(cfg, 5, Dtype::F64);
    AdamState s1 = init_adam(p1), s2 = init_adam(p2);
    const double l1a = train_step(cfg, p1, s1, tc, lr_batch, hr_batch, 1e-4);
    const double l2a = train_step(cfg, p2, s2, tc, lr_batch, hr_batch, 1e-4);
    CHECK(l1a == l2a);
    for (const auto& [name, t] : p1) CHECK(bitwise_equal(t, p2.at(name)));

    // keep stepping on the same batch: the loss must come down
    double last = l1a;
    for (int i = 0; i < 5; ++i) last = train_step(cfg, p1, s1, tc, lr_batch, hr_batch, 1e-3);
    CHECK(last < l1a);
}

TEST_CASE("shared-attention gradients reach the producer projections") {
    // InterGroup: only block 1 owns Q/K; a loss on the full model must send
    // gradient back through the shared matrices into those projections
    const ModelConfig cfg = micro_config();
    ParamMap params = build_model(cfg, 9, Dtype::F64);
    const Tensor x = image_to_tensor(noise_image(8, 8, 3), Dtype::F64);

    Tape tape;
    ParamMap tracked;
    for (const auto& [name, t] : params) tracked[name] = tape.watch(t);
    const Tensor y = asid_forward(cfg, tracked, x, false);
    const Tensor loss = mean(mul(y, y));
    tape.backward(loss);
    for (const char* name : {"body.block1.unit1.sam.meso.q.weight",
                             "body.block1.unit1.sam.global.k.weight",
                             "body.block1.unit2.sam.meso.q.weight"}) {
        const Tensor g = tape.grad(tracked.at(name));
        REQUIRE(g.defined());
        double norm = 0.0;
        for (long long i = 0; i < g.numel(); ++i) norm += std::abs(g.data()[i]);
        CHECK(norm > 0.0);
    }
}

TEST_CASE("optimizer state round trips through the sidecar") {
    const ModelConfig cfg = micro_config();
    ParamMap params = build_model(cfg, 11, Dtype::F64);
    AdamState state = init_adam(params);
    const TrainConfig tc;
    const Tensor lr_b = image_to_tensor(noise_image(8, 8, 4), Dtype::F64);
    const Tensor hr_b = image_to_tensor(noise_image(16, 16, 5), Dtype::F64);
    for (int i = 0; i < 2; ++i) train_step(cfg, params, state, tc, lr_b, hr_b, 1e-4);

    const std::string path = temp_path("opt.bin");
    save_optimizer(path, state);
    const AdamState back = load_optimizer(path, params);
    CHECK(back.step == state.step);
    for (const auto& [name, t] : state.m) CHECK(bitwise_equal(t, back.m.at(name)));
    for (const auto& [name, t] : state.v) CHECK(bitwise_equal(t, back.v.at(name)));

    ParamMap other;
    other["w"] = Tensor::zeros({2}, Dtype::F64);
    CHECK_THROWS_AS(load_optimizer(path, other), StoreError);
    std::remove(path.c_str());
}

TEST_CASE("train loop logs, checkpoints and stays resumable") {
    const ModelConfig cfg = micro_config();
    ParamMap params = build_model(cfg, 13, Dtype::F32);

    std::vector<Image> refs = {noise_image(32, 32, 6), noise_image(32, 32, 7)};
    PatchSampler data(refs, cfg.scale, 8, true, 21);

    TrainConfig tc;
    tc.batch = 2;
    tc.epochs = 2;
    tc.steps_per_epoch = 3;
    tc.lr0 = 1e-4;
    tc.checkpoint_path = temp_path("ckpt.bin");
    tc.log_path = temp_path("log.csv");

    const TrainResult r = train_loop(cfg, params, data, tc);
    CHECK(r.steps == 6);
    CHECK(std::isfinite(r.final_loss));

    // log: header plus one row per step
    std::ifstream log(tc.log_path);
    REQUIRE(log.good());
    std::string line;
    std::getline(log, line);
    CHECK(line == "step,epoch,lr,loss");
    int rows = 0;
    while (std::getline(log, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6);

    // checkpoint holds the final parameters and a matching sidecar
    const LoadedModel loaded = load_weights(tc.checkpoint_path);
    for (const auto& [name, t] : params) CHECK(bitwise_equal(t, loaded.params.at(name)));
    const AdamState resumed = load_optimizer(tc.checkpoint_path + ".opt", params);
    CHECK(resumed.step == 6);

    std::remove(tc.checkpoint_path.c_str());
    std::remove((tc.checkpoint_path + ".opt").c_str());
    std::remove(tc.log_path.c_str());
}

TEST_CASE("two identical loops produce bitwise-identical weights") {
    const ModelConfig cfg = micro_config();
    TrainConfig tc;
    tc.batch = 2;
    tc.epochs = 1;
    tc.steps_per_epoch = 4;
    tc.lr0 = 2e-4;
    tc.seed = 77;

    auto run = [&]() {
        ParamMap params = build_model(cfg, 15, Dtype::F32);
        std::vector<Image> refs = {noise_image(32, 32, 8)};
        PatchSampler data(refs, cfg.scale, 8, true, tc.seed);
        train_loop(cfg, params, data, tc);
        return params;
    };
    const ParamMap a = run();
    const ParamMap b = run();
    for (const auto& [name, t] : a) CHECK(bitwise_equal(t, b.at(name)));
}
