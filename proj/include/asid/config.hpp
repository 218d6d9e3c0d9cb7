#pragma once

#include <map>
#include <string>
#include <vector>

namespace asid {

enum class ShareMode { InterGroup, IntraGroup, None };

const char* share_mode_name(ShareMode m);
ShareMode parse_share_mode(const std::string& s);

// All architectural hyperparameters. The numeric defaults are the calibrated
// configuration whose parameter/MAC totals the accounting tests pin down.
struct ModelConfig {
    int blocks = 3;         // number of IDBs (N)
    int channels = 48;      // feature width (C)
    int refined_width = 12; // channels split off per unit (r); 0 disables the split
    int units = 3;          // distillation units per block (u)
    int meso = 8;           // meso partition size (P)
    int global = 8;         // global grid size (G)
    int scale = 2;          // upscaling factor, one of {2,3,4}
    ShareMode share_mode = ShareMode::InterGroup;
    double ffn_ratio = 1.0;  // FFN hidden width = round(ffn_ratio * c)
    int se_ratio = 2;        // SE bottleneck = max(1, c / se_ratio)
    double qk_ratio = 0.625; // Q/K projection width = round(qk_ratio * c)
    std::string variant = "asid"; // "asid" or "baseline"
};

void validate(const ModelConfig& cfg); // throws ConfigError naming the violation

// Channel width of each distillation unit: C, C-r, C-2r, ...
std::vector<int> unit_widths(const ModelConfig& cfg);

int qk_dim(const ModelConfig& cfg, int width);
int ffn_hidden(const ModelConfig& cfg, int width);
int se_bottleneck(const ModelConfig& cfg, int width);
int esa_width(int channels); // reduced ESA branch width (fixed C/2)

// Whether the SAM at (block, depth) computes its own attention (owns Q,K),
// and where a consumer fetches shared matrices from. Both 1-based.
bool sam_is_producer(const ModelConfig& cfg, int block, int depth);
std::pair<int, int> sam_share_source(const ModelConfig& cfg, int block, int depth);

// Inputs are reflect-padded to this multiple before the block stack.
int pad_multiple(const ModelConfig& cfg);

// Flat key=value config format. Keys are exactly the ModelConfig field
// names; '#' starts a comment; unknown keys are rejected. The `variant` key
// is applied first as a preset (baseline: channels=52, units=1,
// refined_width=0, share_mode=None), then explicit keys override it.
ModelConfig config_from_updates(const std::vector<std::pair<std::string, std::string>>& kv);
std::vector<std::pair<std::string, std::string>> parse_config_pairs(const std::string& text);
ModelConfig parse_config_text(const std::string& text);
ModelConfig load_config_file(const std::string& path);
std::string serialize_config(const ModelConfig& cfg);

} // namespace asid
