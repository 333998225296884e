#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fedoras/rng.hpp"
#include "fedoras/tensor.hpp"

namespace fedoras {

enum class OpType {
    Identity,
    Zero,
    Dense,
    Conv1x1,
    Conv3x3,
    DWSepConv,
    AvgPool,
    AffineNorm,
};

/// One candidate (or fixed) operator. `out` is the number of output
/// features/channels for Dense/Conv kinds; shape-preserving kinds ignore it
/// and emit as many channels as they receive. DWSepConv is a depthwise
/// k x k stage followed by a pointwise bottleneck whose width is
/// round(expansion * channels).
struct OperatorKind {
    OpType type = OpType::Identity;
    int out = 0;            // Dense/Conv1x1/Conv3x3 output features (0 = same as input)
    int kernel = 3;         // DWSepConv kernel, 1 or 3
    double expansion = 1.0; // DWSepConv intermediate width ratio
    int window = 2;         // AvgPool window
    int stride = 1;         // used by fixed reduction convs only

    bool operator==(const OperatorKind&) const = default;
};

const char* op_type_name(OpType t);
std::string op_name(const OperatorKind& op);

/// Trainable scalar group: value, accumulated gradient and SGD momentum
/// buffer always share one shape.
struct Parameter {
    Tensor value;
    Tensor grad;
    Tensor momentum;

    explicit Parameter(Tensor v)
        : value(std::move(v)), grad(Tensor(value.shape)), momentum(Tensor(value.shape)) {}
    Parameter() = default;
};

using ParamSet = std::vector<Parameter>;

struct OpCost {
    std::int64_t params = 0;
    std::int64_t flops = 0;
};

// ---- low-level primitives -------------------------------------------------

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      int stride, int pad, int groups);
void conv2d_backward(const Tensor& x, const Tensor& w, int stride, int pad, int groups,
                     const Tensor& gy, Tensor& gx, Tensor& gw, Tensor& gb);

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);
void dense_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                    Tensor& gx, Tensor& gw, Tensor& gb);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& gy);

Tensor affine_forward(const Tensor& x, const Tensor& scale, const Tensor& bias);
void affine_backward(const Tensor& x, const Tensor& scale, const Tensor& gy,
                     Tensor& gx, Tensor& gscale, Tensor& gbias);

Tensor avgpool_same_forward(const Tensor& x, int window);
Tensor avgpool_same_backward(const Tensor& x, int window, const Tensor& gy);

Tensor global_avgpool_forward(const Tensor& x);
Tensor global_avgpool_backward(const std::vector<int>& x_shape, const Tensor& gy);

/// Mean softmax cross-entropy over the batch; grad is w.r.t. logits.
struct LossResult {
    double loss;
    Tensor grad;
};
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

std::vector<int> argmax_rows(const Tensor& logits);

// ---- operator-level API ---------------------------------------------------

/// Shape the operator's parameter tensors for `in_ch` input channels
/// (or input features for Dense), He fan-in init for weights.
ParamSet init_params(const OperatorKind& op, int in_ch, Rng& rng);

int op_out_channels(const OperatorKind& op, int in_ch);
std::vector<int> op_output_shape(const OperatorKind& op, const std::vector<int>& in_shape);

Tensor op_forward(const OperatorKind& op, const ParamSet& params, const Tensor& input);

/// Accumulates parameter gradients into `params` and returns the input
/// gradient. Recomputes intermediate activations from `input`.
Tensor op_backward(const OperatorKind& op, ParamSet& params, const Tensor& input,
                   const Tensor& upstream_grad);

/// Exact trainable-parameter and per-sample FLOP counts (1 MAC = 2 FLOPs,
/// bias adds not counted, elementwise ops counted once per element).
/// `input_shape` excludes the batch dimension: [C,H,W] or [F].
OpCost op_cost(const OperatorKind& op, const std::vector<int>& input_shape);

/// One SGD-with-momentum step over a parameter group. Optional global-norm
/// gradient clipping; gradients are zeroed afterwards. Throws on non-finite
/// gradients.
void sgd_step(const std::vector<Parameter*>& params, double lr, double momentum,
              std::optional<double> clip_norm = std::nullopt);

std::int64_t param_count(const ParamSet& ps);

}  // namespace fedoras
