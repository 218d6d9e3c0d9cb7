#pragma once

#include <string>
#include <vector>

namespace asid {

struct GradSuiteCase {
    std::string name;
    double max_rel_error = 0.0;
};

// Finite-difference checks for every differentiable op, the composite
// blocks, the shared-attention path, and a micro end-to-end model, all in
// 64-bit with deterministic inputs. Larger cases probe an even subsample of
// coordinates to stay fast.
std::vector<GradSuiteCase> run_gradient_suite(bool include_end_to_end = true);

} // namespace asid
