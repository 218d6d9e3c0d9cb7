#pragma once

#include <string>
#include <vector>

#include "asid/config.hpp"
#include "asid/params.hpp"

namespace asid {

// Hierarchical cost breakdown. Leaves carry intrinsic counts; every parent
// total is the sum of its children. `macs` is zero when no evaluation
// geometry was supplied (parameter-only reports).
struct CostReport {
    std::string name;
    long long params = 0;
    long long macs = 0;
    std::vector<CostReport> children;
};

// Parameter tree for the architecture, independent of geometry.
CostReport count_params(const ModelConfig& cfg);

// Parameter and multiply-add tree for producing an out_h x out_w output.
// The body is evaluated at the padded low-resolution geometry
// (out / scale, rounded up to the partition multiple). Conventions:
// one multiply-add = one MAC; softmax, activations, layer norm,
// elementwise adds, pooling, and interpolation count as zero.
CostReport count_macs(const ModelConfig& cfg, int out_h, int out_w);

// Total stored elements across a weight map; equals the tree total.
long long param_element_count(const ParamMap& params);

struct AblationRow {
    std::string label;
    ModelConfig config;
    long long params = 0;
    long long macs = 0;
};

// The five ablation variants (baseline, distillation units only, +attention
// sharing, +channel split, full model) and the two sharing-scope variants,
// each costed at the given output geometry.
struct AblationTables {
    std::vector<AblationRow> variants;
    std::vector<AblationRow> sharing;
};

AblationTables ablation_sweep(int out_h, int out_w);

std::string report_text(const CostReport& report);
std::string report_csv(const CostReport& report);
std::string ablation_text(const AblationTables& tables);
std::string ablation_csv(const AblationTables& tables);

} // namespace asid
