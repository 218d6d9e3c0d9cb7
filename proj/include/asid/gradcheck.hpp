#pragma once

#include <functional>
#include <vector>

#include "asid/tensor.hpp"

namespace asid {

// A differentiable scalar function of several tensors. The harness calls it
// twice per probed element (no tape) and once under a tape for the analytic
// gradients, so it must be deterministic.
using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckOptions {
    double step = 1e-5;
    double min_step = 1e-8; // floor of the step refinement ladder
    // Probe at most this many elements per input (0 = all), spread evenly —
    // keeps end-to-end model checks inside the time budget.
    int max_probes_per_input = 0;
};

// Central finite differences in 64-bit against the tape's analytic gradient.
// Returns the worst relative error, |ga - gn| / max(1, |ga|, |gn|). Probes
// that disagree are re-measured with smaller steps down to min_step before
// they count, which filters kink crossings without masking wrong gradients.
double gradcheck_max_rel_error(const ScalarFn& fn, const std::vector<Tensor>& inputs,
                               const GradCheckOptions& opts = {});

} // namespace asid
