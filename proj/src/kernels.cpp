#include "fedoras/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace fedoras {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

void check_4d(const Tensor& x, const char* who) {
    require(x.shape.size() == 4, std::string(who) + ": expected NCHW input, got shape " + shape_str(x.shape));
}

int dw_mid_channels(const OperatorKind& op, int in_ch) {
    int m = static_cast<int>(std::llround(op.expansion * in_ch));
    if (m < 1)
        throw ContractError("DWSepConv: expansion " + std::to_string(op.expansion) +
                            " x " + std::to_string(in_ch) + " channels rounds below 1");
    return m;
}

}  // namespace

const char* op_type_name(OpType t) {
    switch (t) {
        case OpType::Identity: return "identity";
        case OpType::Zero: return "zero";
        case OpType::Dense: return "dense";
        case OpType::Conv1x1: return "conv1x1";
        case OpType::Conv3x3: return "conv3x3";
        case OpType::DWSepConv: return "dwsep";
        case OpType::AvgPool: return "avgpool";
        case OpType::AffineNorm: return "affine";
    }
    return "?";
}

std::string op_name(const OperatorKind& op) {
    std::string s = op_type_name(op.type);
    if (op.type == OpType::DWSepConv)
        s += std::to_string(op.kernel) + "_e" + std::to_string(op.expansion).substr(0, 3);
    if (op.type == OpType::AvgPool) s += std::to_string(op.window);
    return s;
}

// ---- conv -----------------------------------------------------------------

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      int stride, int pad, int groups) {
    check_4d(x, "conv2d");
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(0), Cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    require(Ci % groups == 0 && Co % groups == 0, "conv2d: channels not divisible by groups");
    require(Cg == Ci / groups,
            "conv2d: weight expects " + std::to_string(Cg) + " channels/group, input has " +
                std::to_string(Ci / groups));
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    Tensor y({N, Co, Ho, Wo});

    const int co_per_g = Co / groups;
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            const int g = co / co_per_g;
            const double bias = b.data.empty() ? 0.0 : b.data[co];
            for (int ho = 0; ho < Ho; ++ho) {
                for (int wo = 0; wo < Wo; ++wo) {
                    double acc = bias;
                    for (int cg = 0; cg < Cg; ++cg) {
                        const int ci = g * Cg + cg;
                        const double* xp = &x.data[((static_cast<std::size_t>(n) * Ci + ci) * H) * W];
                        const double* wp = &w.data[((static_cast<std::size_t>(co) * Cg + cg) * kh) * kw];
                        for (int i = 0; i < kh; ++i) {
                            const int hi = ho * stride - pad + i;
                            if (hi < 0 || hi >= H) continue;
                            for (int j = 0; j < kw; ++j) {
                                const int wi = wo * stride - pad + j;
                                if (wi < 0 || wi >= W) continue;
                                acc += xp[hi * W + wi] * wp[i * kw + j];
                            }
                        }
                    }
                    y.data[((static_cast<std::size_t>(n) * Co + co) * Ho + ho) * Wo + wo] = acc;
                }
            }
        }
    }
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, int stride, int pad, int groups,
                     const Tensor& gy, Tensor& gx, Tensor& gw, Tensor& gb) {
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(0), Cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int Ho = gy.dim(2), Wo = gy.dim(3);
    gx = Tensor(x.shape);
    gw = Tensor(w.shape);
    gb = Tensor({Co});

    const int co_per_g = Co / groups;
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            const int g = co / co_per_g;
            for (int ho = 0; ho < Ho; ++ho) {
                for (int wo = 0; wo < Wo; ++wo) {
                    const double gyv =
                        gy.data[((static_cast<std::size_t>(n) * Co + co) * Ho + ho) * Wo + wo];
                    if (gyv == 0.0) continue;
                    gb.data[co] += gyv;
                    for (int cg = 0; cg < Cg; ++cg) {
                        const int ci = g * Cg + cg;
                        const double* xp = &x.data[((static_cast<std::size_t>(n) * Ci + ci) * H) * W];
                        double* gxp = &gx.data[((static_cast<std::size_t>(n) * Ci + ci) * H) * W];
                        const double* wp = &w.data[((static_cast<std::size_t>(co) * Cg + cg) * kh) * kw];
                        double* gwp = &gw.data[((static_cast<std::size_t>(co) * Cg + cg) * kh) * kw];
                        for (int i = 0; i < kh; ++i) {
                            const int hi = ho * stride - pad + i;
                            if (hi < 0 || hi >= H) continue;
                            for (int j = 0; j < kw; ++j) {
                                const int wi = wo * stride - pad + j;
                                if (wi < 0 || wi >= W) continue;
                                gwp[i * kw + j] += gyv * xp[hi * W + wi];
                                gxp[hi * W + wi] += gyv * wp[i * kw + j];
                            }
                        }
                    }
                }
            }
        }
    }
}

// ---- dense ----------------------------------------------------------------

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.shape.size() == 2, "dense: expected [N,F] input, got " + shape_str(x.shape));
    const int N = x.dim(0), F = x.dim(1), O = w.dim(0);
    require(w.dim(1) == F, "dense: weight expects " + std::to_string(w.dim(1)) +
                               " features, input has " + std::to_string(F));
    Tensor y({N, O});
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o) {
            double acc = b.data.empty() ? 0.0 : b.data[o];
            const double* xp = &x.data[static_cast<std::size_t>(n) * F];
            const double* wp = &w.data[static_cast<std::size_t>(o) * F];
            for (int f = 0; f < F; ++f) acc += xp[f] * wp[f];
            y.data[static_cast<std::size_t>(n) * O + o] = acc;
        }
    return y;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                    Tensor& gx, Tensor& gw, Tensor& gb) {
    const int N = x.dim(0), F = x.dim(1), O = w.dim(0);
    gx = Tensor(x.shape);
    gw = Tensor(w.shape);
    gb = Tensor({O});
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o) {
            const double g = gy.data[static_cast<std::size_t>(n) * O + o];
            if (g == 0.0) continue;
            gb.data[o] += g;
            const double* xp = &x.data[static_cast<std::size_t>(n) * F];
            const double* wp = &w.data[static_cast<std::size_t>(o) * F];
            double* gxp = &gx.data[static_cast<std::size_t>(n) * F];
            double* gwp = &gw.data[static_cast<std::size_t>(o) * F];
            for (int f = 0; f < F; ++f) {
                gwp[f] += g * xp[f];
                gxp[f] += g * wp[f];
            }
        }
}

// ---- elementwise ----------------------------------------------------------

Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& gy) {
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i)
        if (x.data[i] <= 0.0) gx.data[i] = 0.0;
    return gx;
}

Tensor affine_forward(const Tensor& x, const Tensor& scale, const Tensor& bias) {
    check_4d(x, "affine");
    const int N = x.dim(0), C = x.dim(1);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    require(scale.numel() == C, "affine: scale size != channels");
    Tensor y = x;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            double* p = &y.data[(static_cast<std::size_t>(n) * C + c) * hw];
            const double s = scale.data[c], b = bias.data[c];
            for (std::size_t i = 0; i < hw; ++i) p[i] = p[i] * s + b;
        }
    return y;
}

void affine_backward(const Tensor& x, const Tensor& scale, const Tensor& gy,
                     Tensor& gx, Tensor& gscale, Tensor& gbias) {
    const int N = x.dim(0), C = x.dim(1);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    gx = Tensor(x.shape);
    gscale = Tensor({C});
    gbias = Tensor({C});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * hw;
            const double s = scale.data[c];
            for (std::size_t i = 0; i < hw; ++i) {
                const double g = gy.data[base + i];
                gx.data[base + i] = g * s;
                gscale.data[c] += g * x.data[base + i];
                gbias.data[c] += g;
            }
        }
}

// ---- pooling --------------------------------------------------------------

Tensor avgpool_same_forward(const Tensor& x, int window) {
    check_4d(x, "avgpool");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int pad = (window - 1) / 2;
    const double inv = 1.0 / (window * window);
    Tensor y(x.shape);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * H * W;
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    double acc = 0.0;
                    for (int i = 0; i < window; ++i) {
                        const int hi = h - pad + i;
                        if (hi < 0 || hi >= H) continue;
                        for (int j = 0; j < window; ++j) {
                            const int wi = w - pad + j;
                            if (wi < 0 || wi >= W) continue;
                            acc += x.data[base + hi * W + wi];
                        }
                    }
                    y.data[base + h * W + w] = acc * inv;
                }
        }
    return y;
}

Tensor avgpool_same_backward(const Tensor& x, int window, const Tensor& gy) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int pad = (window - 1) / 2;
    const double inv = 1.0 / (window * window);
    Tensor gx(x.shape);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * H * W;
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double g = gy.data[base + h * W + w] * inv;
                    for (int i = 0; i < window; ++i) {
                        const int hi = h - pad + i;
                        if (hi < 0 || hi >= H) continue;
                        for (int j = 0; j < window; ++j) {
                            const int wi = w - pad + j;
                            if (wi < 0 || wi >= W) continue;
                            gx.data[base + hi * W + wi] += g;
                        }
                    }
                }
        }
    return gx;
}

Tensor global_avgpool_forward(const Tensor& x) {
    check_4d(x, "global_avgpool");
    const int N = x.dim(0), C = x.dim(1);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    Tensor y({N, C});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double* p = &x.data[(static_cast<std::size_t>(n) * C + c) * hw];
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += p[i];
            y.data[static_cast<std::size_t>(n) * C + c] = acc / static_cast<double>(hw);
        }
    return y;
}

Tensor global_avgpool_backward(const std::vector<int>& x_shape, const Tensor& gy) {
    const int N = x_shape[0], C = x_shape[1];
    const std::size_t hw = static_cast<std::size_t>(x_shape[2]) * x_shape[3];
    Tensor gx(x_shape);
    const double inv = 1.0 / static_cast<double>(hw);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double g = gy.data[static_cast<std::size_t>(n) * C + c] * inv;
            double* p = &gx.data[(static_cast<std::size_t>(n) * C + c) * hw];
            for (std::size_t i = 0; i < hw; ++i) p[i] = g;
        }
    return gx;
}

// ---- loss -----------------------------------------------------------------

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    const int N = logits.dim(0), C = logits.dim(1);
    require(static_cast<int>(labels.size()) == N, "loss: labels/batch size mismatch");
    Tensor grad(logits.shape);
    double total = 0.0;
    for (int n = 0; n < N; ++n) {
        const double* z = &logits.data[static_cast<std::size_t>(n) * C];
        double* g = &grad.data[static_cast<std::size_t>(n) * C];
        double zmax = z[0];
        for (int c = 1; c < C; ++c) zmax = std::max(zmax, z[c]);
        double sum = 0.0;
        for (int c = 0; c < C; ++c) sum += std::exp(z[c] - zmax);
        const double logsum = std::log(sum) + zmax;
        total += logsum - z[labels[static_cast<std::size_t>(n)]];
        for (int c = 0; c < C; ++c) {
            double p = std::exp(z[c] - logsum);
            g[c] = (p - (c == labels[static_cast<std::size_t>(n)] ? 1.0 : 0.0)) / N;
        }
    }
    return {total / N, std::move(grad)};
}

std::vector<int> argmax_rows(const Tensor& logits) {
    const int N = logits.dim(0), C = logits.dim(1);
    std::vector<int> out(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        const double* z = &logits.data[static_cast<std::size_t>(n) * C];
        int best = 0;
        for (int c = 1; c < C; ++c)
            if (z[c] > z[best]) best = c;
        out[static_cast<std::size_t>(n)] = best;
    }
    return out;
}

// ---- operator-level -------------------------------------------------------

int op_out_channels(const OperatorKind& op, int in_ch) {
    switch (op.type) {
        case OpType::Dense:
        case OpType::Conv1x1:
        case OpType::Conv3x3:
            return op.out > 0 ? op.out : in_ch;
        default:
            return in_ch;
    }
}

std::vector<int> op_output_shape(const OperatorKind& op, const std::vector<int>& in_shape) {
    if (op.type == OpType::Dense) {
        require(in_shape.size() == 1, "dense: expected [F] input shape");
        return {op_out_channels(op, in_shape[0])};
    }
    require(in_shape.size() == 3, std::string(op_type_name(op.type)) + ": expected [C,H,W] input shape");
    const int C = in_shape[0], H = in_shape[1], W = in_shape[2];
    const int out_ch = op_out_channels(op, C);
    if ((op.type == OpType::Conv3x3 || op.type == OpType::Conv1x1) && op.stride > 1) {
        const int k = op.type == OpType::Conv3x3 ? 3 : 1;
        const int pad = k / 2;
        return {out_ch, (H + 2 * pad - k) / op.stride + 1, (W + 2 * pad - k) / op.stride + 1};
    }
    return {out_ch, H, W};
}

ParamSet init_params(const OperatorKind& op, int in_ch, Rng& rng) {
    auto he_tensor = [&](std::vector<int> shape, int fan_in) {
        Tensor t(shape);
        const double s = std::sqrt(2.0 / fan_in);
        for (double& v : t.data) v = rng.normal(0.0, s);
        return t;
    };
    ParamSet ps;
    switch (op.type) {
        case OpType::Identity:
        case OpType::Zero:
        case OpType::AvgPool:
            break;
        case OpType::Dense: {
            const int out = op_out_channels(op, in_ch);
            ps.emplace_back(he_tensor({out, in_ch}, in_ch));
            ps.emplace_back(Tensor({out}));
            break;
        }
        case OpType::Conv1x1: {
            const int out = op_out_channels(op, in_ch);
            ps.emplace_back(he_tensor({out, in_ch, 1, 1}, in_ch));
            ps.emplace_back(Tensor({out}));
            break;
        }
        case OpType::Conv3x3: {
            const int out = op_out_channels(op, in_ch);
            ps.emplace_back(he_tensor({out, in_ch, 3, 3}, 9 * in_ch));
            ps.emplace_back(Tensor({out}));
            break;
        }
        case OpType::DWSepConv: {
            const int k = op.kernel, m = dw_mid_channels(op, in_ch);
            ps.emplace_back(he_tensor({in_ch, 1, k, k}, k * k));
            ps.emplace_back(Tensor({in_ch}));
            ps.emplace_back(he_tensor({m, in_ch, 1, 1}, in_ch));
            ps.emplace_back(Tensor({m}));
            ps.emplace_back(he_tensor({in_ch, m, 1, 1}, m));
            ps.emplace_back(Tensor({in_ch}));
            break;
        }
        case OpType::AffineNorm: {
            ps.emplace_back(Tensor({in_ch}, 1.0));
            ps.emplace_back(Tensor({in_ch}));
            break;
        }
    }
    return ps;
}

Tensor op_forward(const OperatorKind& op, const ParamSet& params, const Tensor& input) {
    switch (op.type) {
        case OpType::Identity:
            return input;
        case OpType::Zero:
            return Tensor(input.shape);
        case OpType::Dense:
            return dense_forward(input, params[0].value, params[1].value);
        case OpType::Conv1x1:
            return conv2d_forward(input, params[0].value, params[1].value, op.stride, 0, 1);
        case OpType::Conv3x3:
            return conv2d_forward(input, params[0].value, params[1].value, op.stride, 1, 1);
        case OpType::DWSepConv: {
            const int C = input.dim(1);
            Tensor a = conv2d_forward(input, params[0].value, params[1].value, 1, op.kernel / 2, C);
            Tensor r = relu_forward(a);
            Tensor b = conv2d_forward(r, params[2].value, params[3].value, 1, 0, 1);
            Tensor r2 = relu_forward(b);
            return conv2d_forward(r2, params[4].value, params[5].value, 1, 0, 1);
        }
        case OpType::AvgPool:
            return avgpool_same_forward(input, op.window);
        case OpType::AffineNorm:
            return affine_forward(input, params[0].value, params[1].value);
    }
    throw ContractError("op_forward: unknown operator");
}

Tensor op_backward(const OperatorKind& op, ParamSet& params, const Tensor& input,
                   const Tensor& upstream_grad) {
    auto add_into = [](Tensor& dst, const Tensor& src) {
        for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
    };
    switch (op.type) {
        case OpType::Identity:
            return upstream_grad;
        case OpType::Zero:
            return Tensor(input.shape);
        case OpType::Dense: {
            Tensor gx, gw, gb;
            dense_backward(input, params[0].value, upstream_grad, gx, gw, gb);
            add_into(params[0].grad, gw);
            add_into(params[1].grad, gb);
            return gx;
        }
        case OpType::Conv1x1: {
            Tensor gx, gw, gb;
            conv2d_backward(input, params[0].value, op.stride, 0, 1, upstream_grad, gx, gw, gb);
            add_into(params[0].grad, gw);
            add_into(params[1].grad, gb);
            return gx;
        }
        case OpType::Conv3x3: {
            Tensor gx, gw, gb;
            conv2d_backward(input, params[0].value, op.stride, 1, 1, upstream_grad, gx, gw, gb);
            add_into(params[0].grad, gw);
            add_into(params[1].grad, gb);
            return gx;
        }
        case OpType::DWSepConv: {
            const int C = input.dim(1);
            const int pad = op.kernel / 2;
            Tensor a = conv2d_forward(input, params[0].value, params[1].value, 1, pad, C);
            Tensor r = relu_forward(a);
            Tensor b = conv2d_forward(r, params[2].value, params[3].value, 1, 0, 1);
            Tensor r2 = relu_forward(b);

            Tensor g_r2, gw2, gb2;
            conv2d_backward(r2, params[4].value, 1, 0, 1, upstream_grad, g_r2, gw2, gb2);
            Tensor g_b = relu_backward(b, g_r2);
            Tensor g_r, gw1, gb1;
            conv2d_backward(r, params[2].value, 1, 0, 1, g_b, g_r, gw1, gb1);
            Tensor g_a = relu_backward(a, g_r);
            Tensor gx, gw0, gb0;
            conv2d_backward(input, params[0].value, 1, pad, C, g_a, gx, gw0, gb0);
            add_into(params[0].grad, gw0);
            add_into(params[1].grad, gb0);
            add_into(params[2].grad, gw1);
            add_into(params[3].grad, gb1);
            add_into(params[4].grad, gw2);
            add_into(params[5].grad, gb2);
            return gx;
        }
        case OpType::AvgPool:
            return avgpool_same_backward(input, op.window, upstream_grad);
        case OpType::AffineNorm: {
            Tensor gx, gs, gb;
            affine_backward(input, params[0].value, upstream_grad, gx, gs, gb);
            add_into(params[0].grad, gs);
            add_into(params[1].grad, gb);
            return gx;
        }
    }
    throw ContractError("op_backward: unknown operator");
}

OpCost op_cost(const OperatorKind& op, const std::vector<int>& in_shape) {
    OpCost c;
    if (op.type == OpType::Dense) {
        const std::int64_t F = in_shape[0], O = op_out_channels(op, static_cast<int>(F));
        c.params = F * O + O;
        c.flops = 2 * F * O;
        return c;
    }
    if (op.type == OpType::Identity || op.type == OpType::Zero) return c;

    const std::int64_t C = in_shape[0];
    const auto out_shape = op_output_shape(op, in_shape);
    const std::int64_t Ho = out_shape[1], Wo = out_shape[2];
    const std::int64_t hw_out = Ho * Wo;
    switch (op.type) {
        case OpType::Conv1x1: {
            const std::int64_t O = op_out_channels(op, static_cast<int>(C));
            c.params = C * O + O;
            c.flops = 2 * C * O * hw_out;
            break;
        }
        case OpType::Conv3x3: {
            const std::int64_t O = op_out_channels(op, static_cast<int>(C));
            c.params = 9 * C * O + O;
            c.flops = 2 * 9 * C * O * hw_out;
            break;
        }
        case OpType::DWSepConv: {
            const std::int64_t k = op.kernel;
            const std::int64_t M = dw_mid_channels(op, static_cast<int>(C));
            c.params = k * k * C + C + C * M + M + M * C + C;
            // depthwise + two pointwise convs, plus the two internal ReLUs
            c.flops = 2 * k * k * C * hw_out + 2 * C * M * hw_out + 2 * M * C * hw_out +
                      C * hw_out + M * hw_out;
            break;
        }
        case OpType::AvgPool:
            c.flops = static_cast<std::int64_t>(op.window) * op.window * C * hw_out;
            break;
        case OpType::AffineNorm:
            c.params = 2 * C;
            c.flops = 2 * C * hw_out;
            break;
        default:
            break;
    }
    return c;
}

void sgd_step(const std::vector<Parameter*>& params, double lr, double momentum,
              std::optional<double> clip_norm) {
    require(lr > 0.0, "sgd_step: lr must be positive");
    require(momentum >= 0.0 && momentum < 1.0, "sgd_step: momentum must be in [0,1)");

    double sq = 0.0;
    for (const Parameter* p : params)
        for (double g : p->grad.data) {
            if (!std::isfinite(g)) throw ContractError("sgd_step: non-finite gradient, step aborted");
            sq += g * g;
        }
    double scale = 1.0;
    if (clip_norm) {
        const double norm = std::sqrt(sq);
        if (norm > *clip_norm && norm > 0.0) scale = *clip_norm / norm;
    }
    for (Parameter* p : params) {
        for (std::size_t i = 0; i < p->value.data.size(); ++i) {
            const double g = p->grad.data[i] * scale;
            p->momentum.data[i] = momentum * p->momentum.data[i] + g;
            p->value.data[i] -= lr * p->momentum.data[i];
            p->grad.data[i] = 0.0;
        }
    }
}

std::int64_t param_count(const ParamSet& ps) {
    std::int64_t n = 0;
    for (const Parameter& p : ps) n += p.value.numel();
    return n;
}

}  // namespace fedoras
