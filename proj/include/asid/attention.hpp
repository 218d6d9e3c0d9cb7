#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "asid/config.hpp"
#include "asid/params.hpp"
#include "asid/tensor.hpp"

namespace asid {

// One depth's spatial attention matrices. Their shapes depend only on image
// geometry and P/G — never on channel width — which is what lets narrower
// consumer units reuse them unchanged.
struct AttentionEntry {
    Tensor meso;   // [nWindows, P^2, P^2]
    Tensor global; // [nGroups,  G^2, G^2]
    bool defined() const { return meso.defined() && global.defined(); }
};

// Producer SAMs publish here; consumers fetch according to the share mode
// (InterGroup: block 1 feeds all later blocks at matching depth; IntraGroup:
// depth 1 of each block feeds its deeper units). One registry lives for the
// duration of one model forward.
class AttentionRegistry {
  public:
    explicit AttentionRegistry(const ModelConfig& cfg) : cfg_(&cfg) {}

    void publish(int block, int depth, AttentionEntry entry);
    const AttentionEntry& fetch(int block, int depth) const;
    int entry_count() const { return static_cast<int>(entries_.size()); }

  private:
    const ModelConfig* cfg_;
    std::map<std::pair<int, int>, AttentionEntry> entries_;
};

// Attention matrices observed during a forward pass (export/visualization).
struct CapturedAttention {
    int block = 0;
    int depth = 0;          // 0 for CAM (which has no sharing depth)
    std::string module;     // "sam" or "cam"
    std::string level;      // "meso" or "global"
    Tensor matrix;
};
using AttentionSink = std::vector<CapturedAttention>;

struct SamResult {
    Tensor out;              // same shape as the input feature
    AttentionEntry produced; // only set by producers
};

// Spatial attention: meso level (P x P tiles) then global level (G x G
// strided grid), each as pre-norm QKV attention with a residual FFN. In
// consumer mode `shared` supplies the attention matrices; the module owns no
// Q/K weights and performs no softmax or affinity computation. block/depth
// only label errors and captures.
SamResult sam_forward(const Tensor& f, const ParamMap& params, const std::string& prefix,
                      const ModelConfig& cfg, bool producer, const AttentionEntry* shared,
                      int block, int depth, AttentionSink* sink = nullptr);

// Channel attention: the same two-level structure with the affinity
// transposed to C x C and applied along the channel axis. Never shared.
Tensor cam_forward(const Tensor& f, const ParamMap& params, const std::string& prefix,
                   const ModelConfig& cfg, int block, AttentionSink* sink = nullptr);

// Parameter names of one SAM/CAM attention level under `prefix`
// (prefix.ln1.*, prefix.q.*, ... as built by the network enumerator).
std::vector<std::string> attention_level_param_names(const std::string& prefix,
                                                     bool with_qk);

} // namespace asid
