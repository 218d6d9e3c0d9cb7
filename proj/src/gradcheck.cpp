#include "asid/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "asid/autograd.hpp"
#include "asid/errors.hpp"

namespace asid {

namespace {

Tensor with_element(const Tensor& t, long long index, double value) {
    std::vector<double> v = t.vec();
    v[index] = value;
    return Tensor::from_vector(std::move(v), t.shape(), t.dtype());
}

} // namespace

double gradcheck_max_rel_error(const ScalarFn& fn, const std::vector<Tensor>& inputs,
                               const GradCheckOptions& opts) {
    for (const Tensor& t : inputs)
        if (t.dtype() != Dtype::F64)
            throw ContractError("gradcheck runs in 64-bit; got an f32 input");

    // analytic gradients
    std::vector<Tensor> analytic;
    {
        Tape tape;
        std::vector<Tensor> tracked;
        tracked.reserve(inputs.size());
        for (const Tensor& t : inputs) tracked.push_back(tape.watch(t));
        Tensor loss = fn(tracked);
        tape.backward(loss);
        for (const Tensor& t : tracked) analytic.push_back(tape.grad(t));
    }

    double worst = 0.0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        const Tensor& t = inputs[i];
        const long long n = t.numel();
        long long stride = 1;
        if (opts.max_probes_per_input > 0 && n > opts.max_probes_per_input)
            stride = n / opts.max_probes_per_input;
        for (long long j = 0; j < n; j += stride) {
            const double x0 = t.vec()[j];
            const double ga = analytic[i].vec()[j];
            auto rel_at = [&](double h) {
                std::vector<Tensor> args = inputs;
                args[i] = with_element(t, j, x0 + h);
                const double fp = fn(args).item();
                args[i] = with_element(t, j, x0 - h);
                const double fm = fn(args).item();
                const double gn = (fp - fm) / (2.0 * h);
                return std::fabs(ga - gn) / std::max({1.0, std::fabs(ga), std::fabs(gn)});
            };
            // The difference quotient converges to the true derivative as the
            // step shrinks, so a disagreement that melts away under
            // refinement is measurement error (a kink of relu/max inside the
            // probe window), while a wrong analytic gradient survives it.
            double h = opts.step;
            double rel = rel_at(h);
            while (rel > 1e-6 && h > opts.min_step) {
                h /= 10.0;
                rel = std::min(rel, rel_at(h));
            }
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace asid
