#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asid/attention.hpp"
#include "asid/config.hpp"
#include "asid/params.hpp"
#include "asid/tensor.hpp"

namespace asid {

enum class InitKind { TruncNormal, ConvFanIn, Zero, One };

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
    InitKind init;
};

// Every parameter of the model, in canonical order: head, blocks (units with
// LM + SAM, fuse, CAM, ESA), tail, upsampler. This list is the single source
// of truth — initialization, serialization checks and parameter accounting
// all walk it.
std::vector<ParamSpec> enumerate_params(const ModelConfig& cfg);

// Deterministic initialization: every tensor gets its own RNG seeded from
// (seed, name), so the result is independent of construction order.
// Truncated normal (std 0.02, cut at 2 std) for projections, fan-in uniform
// for convolutions, zeros for biases, ones for norm gains.
ParamMap build_model(const ModelConfig& cfg, std::uint64_t seed, Dtype dt = Dtype::F32);

struct ForwardStats {
    int attention_entries = 0; // registry size after the pass
};

// Full model: shallow conv -> N IDBs (registry-mediated attention sharing)
// -> deep conv -> global residual -> upsampler conv + pixel shuffle. Inputs
// are reflect-padded to the partition multiple and the output cropped back.
// `inference` clamps the output to [0,1]; training leaves it free.
Tensor asid_forward(const ModelConfig& cfg, const ParamMap& params, const Tensor& input,
                    bool inference, AttentionSink* sink = nullptr,
                    ForwardStats* stats = nullptr);

} // namespace asid
