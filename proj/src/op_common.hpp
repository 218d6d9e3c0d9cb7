#pragma once

// Private helpers shared by the op translation units: tape-recording
// plumbing and index arithmetic.

#include <functional>
#include <utility>
#include <vector>

#include "asid/autograd.hpp"
#include "asid/errors.hpp"
#include "asid/tensor.hpp"

namespace asid::detail {

inline bool is_tracked(const Tensor& t, const Tape* tp) {
    return tp && t.has_node() && t.tape_id() == tp->id();
}

using GradFn = std::function<Tensor(const Tensor& grad_out)>;

// Attaches a node whose backward routes da(g) into a. No-op when nothing is
// recording (inference, or inside a backward sweep).
inline Tensor record_unary(const Tensor& value, const Tensor& a, GradFn da) {
    Tape* tp = Tape::active();
    if (!is_tracked(a, tp)) return value;
    int na = a.node();
    return tp->attach(value, [na, da = std::move(da)](const Tensor& g, Tape& t) {
        t.accumulate(na, da(g));
    });
}

inline Tensor record_binary(const Tensor& value, const Tensor& a, const Tensor& b,
                            GradFn da, GradFn db) {
    Tape* tp = Tape::active();
    bool ta = is_tracked(a, tp), tb = is_tracked(b, tp);
    if (!ta && !tb) return value;
    int na = ta ? a.node() : -1;
    int nb = tb ? b.node() : -1;
    return tp->attach(value, [na, nb, da = std::move(da), db = std::move(db)](
                                 const Tensor& g, Tape& t) {
        if (na >= 0) t.accumulate(na, da(g));
        if (nb >= 0) t.accumulate(nb, db(g));
    });
}

inline Tensor record_ternary(const Tensor& value, const Tensor& a, const Tensor& b,
                             const Tensor& c, GradFn da, GradFn db, GradFn dc) {
    Tape* tp = Tape::active();
    bool ta = is_tracked(a, tp), tb = is_tracked(b, tp), tc = is_tracked(c, tp);
    if (!ta && !tb && !tc) return value;
    int na = ta ? a.node() : -1;
    int nb = tb ? b.node() : -1;
    int nc = tc ? c.node() : -1;
    return tp->attach(value, [na, nb, nc, da = std::move(da), db = std::move(db),
                              dc = std::move(dc)](const Tensor& g, Tape& t) {
        if (na >= 0) t.accumulate(na, da(g));
        if (nb >= 0) t.accumulate(nb, db(g));
        if (nc >= 0) t.accumulate(nc, dc(g));
    });
}

inline std::vector<long long> row_major_strides(const std::vector<int>& shape) {
    std::vector<long long> s(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
        s[i] = s[i + 1] * shape[i + 1];
    return s;
}

inline int normalize_axis(int axis, int ndim, const char* op) {
    if (axis < 0) axis += ndim;
    if (axis < 0 || axis >= ndim)
        throw DimensionError(std::string(op) + ": axis out of range for rank " +
                             std::to_string(ndim));
    return axis;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
}

inline void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dtype() != b.dtype())
        throw ContractError(std::string(op) + ": dtype mismatch " +
                            dtype_name(a.dtype()) + " vs " + dtype_name(b.dtype()));
}

} // namespace asid::detail
