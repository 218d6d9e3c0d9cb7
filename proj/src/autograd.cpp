#include "asid/autograd.hpp"

#include <atomic>

#include "asid/errors.hpp"

namespace asid {

namespace {
thread_local Tape* g_active_tape = nullptr;
thread_local bool g_recording = true;
std::atomic<std::uint64_t> g_next_tape_id{1};
} // namespace

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {
    if (g_active_tape)
        throw ContractError("a gradient tape is already active on this thread");
    g_active_tape = this;
}

Tape::~Tape() {
    if (g_active_tape == this) g_active_tape = nullptr;
}

Tape* Tape::active() {
    if (!g_recording) return nullptr;
    return g_active_tape;
}

bool Tape::tracked_here(const Tensor& t) const {
    return t.has_node() && t.tape_id() == id_;
}

Tensor Tape::watch(const Tensor& t) {
    if (tracked_here(t)) return t;
    nodes_.push_back(Node{BackwardFn{}, t.shape(), t.dtype()});
    Tensor out = t;
    out.tape_id_ = id_;
    out.node_ = static_cast<int>(nodes_.size()) - 1;
    return out;
}

Tensor Tape::attach(const Tensor& value, BackwardFn back) {
    nodes_.push_back(Node{std::move(back), value.shape(), value.dtype()});
    Tensor out = value;
    out.tape_id_ = id_;
    out.node_ = static_cast<int>(nodes_.size()) - 1;
    return out;
}

void Tape::accumulate(int node, const Tensor& g) {
    if (node < 0 || node >= size())
        throw ContractError("gradient accumulation into unknown tape node");
    const Node& n = nodes_[node];
    if (g.shape() != n.shape)
        throw DimensionError("gradient shape " + g.shape_str() +
                             " does not match node shape " + shape_to_string(n.shape));
    Tensor& slot = grads_[node];
    if (!slot.defined()) {
        slot = g.detached();
        return;
    }
    const std::vector<double>& a = slot.vec();
    const std::vector<double>& b = g.vec();
    std::vector<double> sum(a.size());
    for (size_t i = 0; i < a.size(); ++i) sum[i] = a[i] + b[i];
    slot = Tensor::from_vector(std::move(sum), n.shape, n.dtype);
}

void Tape::backward(const Tensor& loss) {
    if (ran_backward_)
        throw ContractError("backward() already ran on this tape; use a fresh tape");
    if (!tracked_here(loss))
        throw ContractError("backward() requires a loss recorded on this tape");
    if (loss.numel() != 1)
        throw ContractError("backward() requires a scalar loss, got " + loss.shape_str());

    grads_.assign(nodes_.size(), Tensor{});
    grads_[loss.node()] = Tensor::full(loss.shape(), 1.0, loss.dtype());

    NoGradScope no_recording;
    for (int i = loss.node(); i >= 0; --i) {
        if (!grads_[i].defined() || !nodes_[i].back) continue;
        nodes_[i].back(grads_[i], *this);
    }
    ran_backward_ = true;
}

Tensor Tape::grad(const Tensor& t) const {
    if (!ran_backward_)
        throw ContractError("grad() called before backward()");
    if (!tracked_here(t))
        throw ContractError("grad() of a tensor that is not tracked on this tape");
    const Tensor& g = grads_[t.node()];
    if (!g.defined()) return Tensor::zeros(t.shape(), t.dtype());
    return g;
}

NoGradScope::NoGradScope() : previous_(g_recording) {
    g_recording = false;
}

NoGradScope::~NoGradScope() {
    g_recording = previous_;
}

bool NoGradScope::recording_enabled() {
    return g_recording;
}

} // namespace asid
