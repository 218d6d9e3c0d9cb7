#pragma once

#include <functional>
#include <vector>

#include "asid/tensor.hpp"

namespace asid {

class Tape;

// Backward closure of one recorded op: receives the gradient of the loss
// w.r.t. the op's output and accumulates into the op's parents via
// Tape::accumulate.
using BackwardFn = std::function<void(const Tensor& grad_out, Tape& tape)>;

// Reverse-mode tape. Construction makes it the active tape for this thread
// (nesting is rejected); ops record onto the active tape whenever at least
// one input is tracked on it. Nodes are appended in execution order, so the
// node list is already topologically sorted and backward() is a single
// reverse sweep visiting each node once.
class Tape {
  public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    // Registers a leaf and returns a tracked alias of `t` (shared storage).
    Tensor watch(const Tensor& t);

    // Records an interior node; returns a tracked alias of `value`.
    Tensor attach(const Tensor& value, BackwardFn back);

    // Runs the reverse sweep from a scalar loss. A second call without a
    // fresh tape is rejected.
    void backward(const Tensor& loss);

    // Gradient of the loss w.r.t. a tracked tensor; zeros if no gradient
    // reached it. Only valid after backward().
    Tensor grad(const Tensor& t) const;

    // Adds `g` into the gradient slot of node `node` (used by closures).
    void accumulate(int node, const Tensor& g);

    std::uint64_t id() const { return id_; }
    int size() const { return static_cast<int>(nodes_.size()); }

  private:
    struct Node {
        BackwardFn back; // empty for leaves
        std::vector<int> shape;
        Dtype dtype;
    };

    bool tracked_here(const Tensor& t) const;

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool ran_backward_ = false;
    std::uint64_t id_;
};

// Temporarily disables recording on the active tape (inference, and the
// internals of the backward sweep itself).
class NoGradScope {
  public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

    static bool recording_enabled();

  private:
    bool previous_;
};

} // namespace asid
