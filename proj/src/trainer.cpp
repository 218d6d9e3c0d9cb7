#include "asid/trainer.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "asid/autograd.hpp"
#include "asid/errors.hpp"
#include "asid/network.hpp"
#include "asid/ops.hpp"
#include "asid/weight_store.hpp"

namespace asid {

void validate(const TrainConfig& tc) {
    if (tc.batch < 1) throw ConfigError("batch must be at least 1");
    if (tc.epochs < 1) throw ConfigError("epochs must be at least 1");
    if (tc.steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be at least 1");
    if (tc.lr0 <= 0.0) throw ConfigError("lr0 must be positive");
    if (tc.halve_period < 1) throw ConfigError("halve_period must be at least 1");
    if (tc.beta1 < 0.0 || tc.beta1 >= 1.0 || tc.beta2 < 0.0 || tc.beta2 >= 1.0)
        throw ConfigError("betas must lie in [0,1)");
    if (tc.eps <= 0.0) throw ConfigError("eps must be positive");
    if (tc.loss != "l1" && tc.loss != "l2")
        throw ConfigError("loss must be 'l1' or 'l2', got '" + tc.loss + "'");
    if (tc.checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

double lr_at(const TrainConfig& tc, int epoch) {
    if (epoch < 0) throw ContractError("epoch must be non-negative");
    return tc.lr0 * std::pow(0.5, epoch / tc.halve_period);
}

AdamState init_adam(const ParamMap& params) {
    AdamState state;
    for (const auto& [name, t] : params) {
        state.m[name] = Tensor::zeros(t.shape(), Dtype::F64);
        state.v[name] = Tensor::zeros(t.shape(), Dtype::F64);
    }
    return state;
}

void adam_step(ParamMap& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, const TrainConfig& tc, double lr) {
    if (lr <= 0.0) throw ContractError("learning rate must be positive");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(state.step));

    for (auto& [name, p] : params) {
        const auto git = grads.find(name);
        if (git == grads.end())
            throw ContractError("no gradient supplied for parameter '" + name + "'");
        const Tensor& g = git->second;
        if (g.shape() != p.shape())
            throw DimensionError("gradient for '" + name + "' has shape " +
                                 g.shape_str() + ", parameter is " + p.shape_str());
        const long long n = p.numel();
        std::vector<double> m(n), v(n), out(n);
        const double* gd = g.data();
        const double* md = state.m[name].data();
        const double* vd = state.v[name].data();
        const double* pd = p.data();
        for (long long i = 0; i < n; ++i) {
            if (!std::isfinite(gd[i]))
                throw NumericError("non-finite gradient in parameter '" + name + "'");
            m[i] = tc.beta1 * md[i] + (1.0 - tc.beta1) * gd[i];
            v[i] = tc.beta2 * vd[i] + (1.0 - tc.beta2) * gd[i] * gd[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            out[i] = pd[i] - lr * mhat / (std::sqrt(vhat) + tc.eps);
        }
        state.m[name] = Tensor::from_vector(std::move(m), p.shape(), Dtype::F64);
        state.v[name] = Tensor::from_vector(std::move(v), p.shape(), Dtype::F64);
        p = Tensor::from_vector(std::move(out), p.shape(), p.dtype());
    }
}

double train_step(const ModelConfig& cfg, ParamMap& params, AdamState& state,
                  const TrainConfig& tc, const Tensor& lr_batch,
                  const Tensor& hr_batch, double lr) {
    double loss_value = 0.0;
    std::map<std::string, Tensor> grads;
    {
        Tape tape;
        ParamMap tracked;
        for (const auto& [name, t] : params) tracked[name] = tape.watch(t);
        const Tensor out = asid_forward(cfg, tracked, lr_batch, false);
        const Tensor diff = sub(out, hr_batch);
        const Tensor loss = tc.loss == "l1" ? mean(abs(diff)) : mean(mul(diff, diff));
        loss_value = loss.item();
        tape.backward(loss);
        for (const auto& [name, t] : tracked) grads[name] = tape.grad(t);
    }
    if (!std::isfinite(loss_value))
        throw NumericError("training diverged: loss is non-finite");
    adam_step(params, grads, state, tc, lr);
    return loss_value;
}

namespace {

void checkpoint(const ModelConfig& cfg, const ParamMap& params, const AdamState& state,
                const TrainConfig& tc) {
    if (tc.checkpoint_path.empty()) return;
    save_weights(tc.checkpoint_path, cfg, params);
    save_optimizer(tc.checkpoint_path + ".opt", state);
}

} // namespace

TrainResult train_loop(const ModelConfig& cfg, ParamMap& params, PatchSampler& data,
                       const TrainConfig& tc, AdamState* resume) {
    validate(tc);
    validate(cfg);
    AdamState state = resume ? std::move(*resume) : init_adam(params);
    const Dtype dt = params.empty() ? Dtype::F32 : params.begin()->second.dtype();

    std::ofstream log;
    if (!tc.log_path.empty()) {
        log.open(tc.log_path);
        if (!log) throw DataError("cannot write training log '" + tc.log_path + "'");
        log << "step,epoch,lr,loss\n";
    }

    TrainResult result;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const double lr = lr_at(tc, epoch);
        for (int s = 0; s < tc.steps_per_epoch; ++s) {
            const auto [lrb, hrb] = data.next_batch(tc.batch, dt);
            result.final_loss = train_step(cfg, params, state, tc, lrb, hrb, lr);
            result.steps += 1;
            if (log) {
                std::ostringstream line;
                line << result.steps << "," << epoch << "," << lr << ","
                     << result.final_loss;
                log << line.str() << "\n";
            }
        }
        if (tc.checkpoint_every > 0 && (epoch + 1) % tc.checkpoint_every == 0)
            checkpoint(cfg, params, state, tc);
    }
    checkpoint(cfg, params, state, tc);
    return result;
}

namespace {

constexpr char kOptMagic[8] = {'A', 'S', 'I', 'D', 'O', 'S', '0', '1'};

template <typename T>
void wr(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T rd(std::istream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw StoreError(std::string("corrupt optimizer state: truncated ") + what);
    return v;
}

} // namespace

void save_optimizer(const std::string& path, const AdamState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write optimizer state '" + path + "'");
    out.write(kOptMagic, sizeof kOptMagic);
    wr<std::uint64_t>(out, static_cast<std::uint64_t>(state.step));
    wr<std::uint32_t>(out, static_cast<std::uint32_t>(state.m.size()));
    for (const auto& [name, m] : state.m) {
        const Tensor& v = state.v.at(name);
        wr<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        wr<std::uint64_t>(out, static_cast<std::uint64_t>(m.numel()));
        for (long long i = 0; i < m.numel(); ++i) wr<double>(out, m.data()[i]);
        for (long long i = 0; i < v.numel(); ++i) wr<double>(out, v.data()[i]);
    }
    if (!out) throw DataError("write failed for optimizer state '" + path + "'");
}

AdamState load_optimizer(const std::string& path, const ParamMap& reference) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open optimizer state '" + path + "'");
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kOptMagic, sizeof magic) != 0)
        throw StoreError("corrupt optimizer state: bad magic in '" + path + "'");

    AdamState state;
    state.step = static_cast<long long>(rd<std::uint64_t>(in, "step"));
    const auto count = rd<std::uint32_t>(in, "entry count");
    if (count != reference.size())
        throw StoreError("optimizer state holds " + std::to_string(count) +
                         " entries, model has " + std::to_string(reference.size()));
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = rd<std::uint16_t>(in, "name");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw StoreError("corrupt optimizer state: truncated name");
        const auto ref = reference.find(name);
        if (ref == reference.end())
            throw StoreError("optimizer state names unknown parameter '" + name + "'");
        const auto n = rd<std::uint64_t>(in, "element count");
        if (static_cast<long long>(n) != ref->second.numel())
            throw StoreError("optimizer state for '" + name + "' has " +
                             std::to_string(n) + " elements, parameter has " +
                             std::to_string(ref->second.numel()));
        std::vector<double> m(n), v(n);
        for (auto& x : m) x = rd<double>(in, "moment data");
        for (auto& x : v) x = rd<double>(in, "moment data");
        state.m[name] = Tensor::from_vector(std::move(m), ref->second.shape(), Dtype::F64);
        state.v[name] = Tensor::from_vector(std::move(v), ref->second.shape(), Dtype::F64);
    }
    return state;
}

} // namespace asid
