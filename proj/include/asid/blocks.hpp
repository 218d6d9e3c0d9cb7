#pragma once

#include <string>

#include "asid/attention.hpp"
#include "asid/config.hpp"
#include "asid/params.hpp"
#include "asid/tensor.hpp"

namespace asid {

// Squeeze-and-excitation gate: global average pool -> bottleneck MLP ->
// sigmoid -> per-channel rescale.
Tensor se_forward(const Tensor& f, const ParamMap& params, const std::string& prefix);

// Local module: pixel-wise conv -> depth-wise 3x3 conv -> activation ->
// SE gate -> residual add.
Tensor lm_forward(const Tensor& f, const ParamMap& params, const std::string& prefix,
                  const ModelConfig& cfg);

// Enhanced spatial attention: reduce 1x1 -> strided 3x3 -> max-pool ->
// conv stack -> bilinear upsample -> add reduced skip -> restore 1x1 ->
// sigmoid gate on the input.
Tensor esa_forward(const Tensor& f, const ParamMap& params, const std::string& prefix);

// Information distillation block: per unit LM then SAM (attention produced
// or fetched via the registry), channel split keeping `refined_width`
// channels aside; concat + 1x1 fuse, CAM, residual, ESA.
Tensor idb_forward(const Tensor& f_in, const ParamMap& params, const ModelConfig& cfg,
                   int block, AttentionRegistry& registry, AttentionSink* sink = nullptr);

} // namespace asid
