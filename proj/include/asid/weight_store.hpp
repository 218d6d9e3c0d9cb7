#pragma once

#include <string>

#include "asid/config.hpp"
#include "asid/params.hpp"

namespace asid {

// Versioned binary container: magic, config echo (the flat key=value text),
// then name -> (shape, 32-bit little-endian reals) in map order. Every model
// parameter appears exactly once; save -> load is bitwise identity for f32
// models.
void save_weights(const std::string& path, const ModelConfig& cfg, const ParamMap& params);

struct LoadedModel {
    ModelConfig config;
    ParamMap params;
};

// Validates the magic/version, the config echo, and every tensor shape
// against the config's parameter enumeration; any inconsistency or
// truncation raises StoreError.
LoadedModel load_weights(const std::string& path, Dtype dt = Dtype::F32);

// StoreError naming the first differing field when two configs disagree
// (e.g. a x2 store loaded for a x4 run).
void require_config_match(const ModelConfig& requested, const ModelConfig& stored);

} // namespace asid
