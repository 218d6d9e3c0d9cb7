#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "asid/config.hpp"
#include "asid/params.hpp"
#include "asid/sampler.hpp"

namespace asid {

struct TrainConfig {
    int batch = 16;
    int epochs = 10;
    int steps_per_epoch = 50;
    double lr0 = 5e-4;
    int halve_period = 250; // epochs between learning-rate halvings
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    std::string loss = "l1";        // "l1" or "l2"
    int checkpoint_every = 0;       // epochs; 0 = final checkpoint only
    std::string checkpoint_path;    // weight store; optimizer sidecar adds ".opt"
    std::string log_path;           // CSV (step,epoch,lr,loss); empty disables
};

void validate(const TrainConfig& tc);

// lr0 * 0.5^floor(epoch / halve_period)
double lr_at(const TrainConfig& tc, int epoch);

struct AdamState {
    long long step = 0;
    std::map<std::string, Tensor> m, v; // f64 moments, shaped like the params
};

AdamState init_adam(const ParamMap& params);

// Standard bias-corrected ADAM update, in place. A non-finite gradient
// aborts and names the offending parameter.
void adam_step(ParamMap& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, const TrainConfig& tc, double lr);

// One optimization step on a fixed batch: forward, loss, backward, update.
// Returns the batch loss.
double train_step(const ModelConfig& cfg, ParamMap& params, AdamState& state,
                  const TrainConfig& tc, const Tensor& lr_batch,
                  const Tensor& hr_batch, double lr);

struct TrainResult {
    int steps = 0;
    double final_loss = 0.0;
};

// Full loop: epochs x steps_per_epoch batches from the sampler, with the
// step learning-rate schedule, CSV logging, and periodic checkpoints. A
// non-finite loss aborts; checkpoints already written stay on disk. Pass a
// loaded optimizer state to resume a run; it is consumed.
TrainResult train_loop(const ModelConfig& cfg, ParamMap& params, PatchSampler& data,
                       const TrainConfig& tc, AdamState* resume = nullptr);

// Optimizer sidecar, so an interrupted run can resume exactly.
void save_optimizer(const std::string& path, const AdamState& state);
AdamState load_optimizer(const std::string& path, const ParamMap& reference);

} // namespace asid
