#include "asid/attention.hpp"

#include <cmath>

#include "asid/errors.hpp"
#include "asid/ops.hpp"

namespace asid {

const Tensor& param(const ParamMap& p, const std::string& name) {
    auto it = p.find(name);
    if (it == p.end()) throw ContractError("missing parameter '" + name + "'");
    return it->second;
}

void AttentionRegistry::publish(int block, int depth, AttentionEntry entry) {
    if (depth < 1 || depth > cfg_->units)
        throw ContractError("attention publish at depth " + std::to_string(depth) +
                            " outside 1.." + std::to_string(cfg_->units));
    entries_[{block, depth}] = std::move(entry);
}

const AttentionEntry& AttentionRegistry::fetch(int block, int depth) const {
    if (depth < 1 || depth > cfg_->units)
        throw ContractError("attention fetch at depth " + std::to_string(depth) +
                            " outside 1.." + std::to_string(cfg_->units));
    auto [src_block, src_depth] = sam_share_source(*cfg_, block, depth);
    auto it = entries_.find({src_block, src_depth});
    if (it == entries_.end())
        throw ShareError("block " + std::to_string(block) + " depth " +
                         std::to_string(depth) + " fetched attention before block " +
                         std::to_string(src_block) + " depth " + std::to_string(src_depth) +
                         " published it");
    return it->second;
}

namespace {

Tensor linear(const Tensor& x, const ParamMap& p, const std::string& prefix) {
    return add_vec(matmul(x, param(p, prefix + ".weight")), param(p, prefix + ".bias"), -1);
}

Tensor pre_norm(const Tensor& x, const ParamMap& p, const std::string& prefix) {
    return layer_norm(x, param(p, prefix + ".gamma"), param(p, prefix + ".beta"));
}

Tensor ffn_block(const Tensor& u, const ParamMap& p, const std::string& prefix) {
    Tensor z = pre_norm(u, p, prefix + ".ln2");
    z = linear(z, p, prefix + ".ffn1");
    z = gelu(z);
    z = linear(z, p, prefix + ".ffn2");
    return add(u, z);
}

// One spatial attention level over token windows [nW, T, C]. The attention
// matrix is either computed here (producer) or supplied (consumer); the
// apply path after that point is the same code for both, which is what the
// bitwise sharing guarantee rests on.
struct LevelOut {
    Tensor out;
    Tensor attention;
};

LevelOut sam_level(const Tensor& tokens, const ParamMap& p, const std::string& prefix,
                   const Tensor* shared, int block, int depth, const char* level) {
    Tensor t = pre_norm(tokens, p, prefix + ".ln1");
    Tensor A;
    if (shared) {
        const int T = tokens.dim(1);
        if (shared->ndim() != 3 || shared->dim(0) != tokens.dim(0) || shared->dim(1) != T ||
            shared->dim(2) != T)
            throw ShareError("shared " + std::string(level) + " matrices " +
                             shared->shape_str() + " do not fit block " +
                             std::to_string(block) + " depth " + std::to_string(depth) +
                             " windows " + tokens.shape_str());
        A = *shared;
    } else {
        Tensor q = linear(t, p, prefix + ".q");
        Tensor k = linear(t, p, prefix + ".k");
        const double s = 1.0 / std::sqrt(static_cast<double>(q.dim(-1)));
        A = softmax(mul_scalar(matmul(q, transpose_last2(k)), s), -1);
    }
    Tensor v = linear(t, p, prefix + ".v");
    Tensor u = add(matmul(A, v), tokens);
    return {ffn_block(u, p, prefix), A};
}

// Channel attention level: affinity C x C from transposed projections,
// applied along the channel axis.
Tensor cam_level(const Tensor& tokens, const ParamMap& p, const std::string& prefix,
                 AttentionSink* sink, int block, const char* level) {
    Tensor t = pre_norm(tokens, p, prefix + ".ln1");
    Tensor q = linear(t, p, prefix + ".q");
    Tensor k = linear(t, p, prefix + ".k");
    Tensor v = linear(t, p, prefix + ".v");
    const double s = 1.0 / std::sqrt(static_cast<double>(tokens.dim(1)));
    Tensor A = softmax(mul_scalar(matmul(transpose_last2(q), k), s), -1); // [nW, C, C]
    if (sink) sink->push_back({block, 0, "cam", level, A.detached()});
    Tensor u = add(matmul(v, transpose_last2(A)), tokens);
    return ffn_block(u, p, prefix);
}

} // namespace

SamResult sam_forward(const Tensor& f, const ParamMap& params, const std::string& prefix,
                      const ModelConfig& cfg, bool producer, const AttentionEntry* shared,
                      int block, int depth, AttentionSink* sink) {
    if (f.ndim() != 4)
        throw DimensionError("sam_forward: expected (B,C,H,W), got " + f.shape_str());
    if (producer == (shared != nullptr))
        throw ContractError("sam_forward: producer takes no shared entry, consumer requires one");
    const int B = f.dim(0), C = f.dim(1), H = f.dim(2), W = f.dim(3);

    SamResult r;

    Tensor meso_tokens = partition_meso(f, cfg.meso);
    LevelOut m = sam_level(meso_tokens, params, prefix + ".meso",
                           shared ? &shared->meso : nullptr, block, depth, "meso");
    Tensor mid = departition_meso(m.out, cfg.meso, B, C, H, W);

    Tensor glob_tokens = partition_global(mid, cfg.global);
    LevelOut g = sam_level(glob_tokens, params, prefix + ".global",
                           shared ? &shared->global : nullptr, block, depth, "global");
    r.out = departition_global(g.out, cfg.global, B, C, H, W);

    if (producer) {
        r.produced.meso = m.attention;
        r.produced.global = g.attention;
        if (sink) {
            sink->push_back({block, depth, "sam", "meso", m.attention.detached()});
            sink->push_back({block, depth, "sam", "global", g.attention.detached()});
        }
    }
    return r;
}

Tensor cam_forward(const Tensor& f, const ParamMap& params, const std::string& prefix,
                   const ModelConfig& cfg, int block, AttentionSink* sink) {
    if (f.ndim() != 4)
        throw DimensionError("cam_forward: expected (B,C,H,W), got " + f.shape_str());
    const int B = f.dim(0), C = f.dim(1), H = f.dim(2), W = f.dim(3);

    Tensor meso_tokens = partition_meso(f, cfg.meso);
    Tensor m = cam_level(meso_tokens, params, prefix + ".meso", sink, block, "meso");
    Tensor mid = departition_meso(m, cfg.meso, B, C, H, W);

    Tensor glob_tokens = partition_global(mid, cfg.global);
    Tensor g = cam_level(glob_tokens, params, prefix + ".global", sink, block, "global");
    return departition_global(g, cfg.global, B, C, H, W);
}

std::vector<std::string> attention_level_param_names(const std::string& prefix,
                                                     bool with_qk) {
    std::vector<std::string> names = {prefix + ".ln1.gamma", prefix + ".ln1.beta"};
    if (with_qk) {
        names.push_back(prefix + ".q.weight");
        names.push_back(prefix + ".q.bias");
        names.push_back(prefix + ".k.weight");
        names.push_back(prefix + ".k.bias");
    }
    for (const char* n : {".v.weight", ".v.bias", ".ln2.gamma", ".ln2.beta", ".ffn1.weight",
                          ".ffn1.bias", ".ffn2.weight", ".ffn2.bias"})
        names.push_back(prefix + n);
    return names;
}

} // namespace asid
