#pragma once

#include <vector>

#include "asid/autograd.hpp"
#include "asid/tensor.hpp"

namespace asid {

// Thread-local instrumentation. softmax_calls is what the attention-sharing
// tests assert on: a consumer forward must not trigger any.
struct OpCounters {
    long long softmax_calls = 0;
    long long matmul_calls = 0;
};
OpCounters& op_counters();
void reset_op_counters();

// ---- elementwise arithmetic -------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a); // tanh approximation
Tensor sigmoid(const Tensor& a);
Tensor abs(const Tensor& a); // subgradient 0 at 0

// Broadcasts a vector along every axis except `axis` (conv bias at axis 1,
// token-space bias at the last axis).
Tensor add_vec(const Tensor& a, const Tensor& v, int axis);
// x[B,C,H,W] scaled per (batch, channel) by g[B,C] — the SE gate.
Tensor scale_channels(const Tensor& x, const Tensor& g);

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& a);                       // to scalar shape (1)
Tensor sum(const Tensor& a, std::vector<int> axes, bool keepdims);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, std::vector<int> axes, bool keepdims);

// ---- linear algebra ---------------------------------------------------------

// Batched matrix product [.., m, k] x [.., k, n]. Equal leading dims, or a
// 2-D right-hand side broadcast across the left's batch (the linear-layer
// case; its gradient reduces over the batch).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& a, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5); // over the last axis

// ---- shape ops --------------------------------------------------------------

Tensor reshape(const Tensor& a, std::vector<int> shape); // shares storage
Tensor permute(const Tensor& a, const std::vector<int>& order); // materializes
Tensor transpose_last2(const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts, int axis);
std::vector<Tensor> split(const Tensor& a, int axis, const std::vector<int>& widths);

// Sub-pixel rearrangement: [B, C*r^2, H, W] <-> [B, C, rH, rW].
Tensor pixel_shuffle(const Tensor& x, int r);
Tensor pixel_unshuffle(const Tensor& x, int r);

// Window partitions used by the attention levels. Meso groups each P x P
// tile into a window; global gathers a G x G grid of pixels strided
// (H/G, W/G) apart. Both are pure index permutations:
//   [B, C, H, W] -> [B*nWindows, tokens, C], tokens = P^2 or G^2.
Tensor partition_meso(const Tensor& x, int P);
Tensor departition_meso(const Tensor& w, int P, int B, int C, int H, int W);
Tensor partition_global(const Tensor& x, int G);
Tensor departition_global(const Tensor& w, int G, int B, int C, int H, int W);

Tensor reflect_pad2d(const Tensor& x, int top, int bottom, int left, int right);
Tensor crop2d(const Tensor& x, int top, int left, int height, int width);

// ---- convolution & resampling ----------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride, int padding, int groups);
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding, int groups);

Tensor max_pool2d(const Tensor& x, int kernel, int stride); // valid padding
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w); // align_corners=false

// Inference-only range clamp (gradient passes through inside the range).
Tensor clamp01(const Tensor& x);

} // namespace asid
