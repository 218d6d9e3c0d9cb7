#pragma once

#include <map>
#include <string>

#include "asid/tensor.hpp"

namespace asid {

// Name-indexed model parameters. std::map keeps iteration deterministic,
// which fixes the serialization and accounting order.
using ParamMap = std::map<std::string, Tensor>;

const Tensor& param(const ParamMap& p, const std::string& name);

} // namespace asid
