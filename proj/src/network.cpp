#include "fedoras/network.hpp"

#include <algorithm>

namespace fedoras {

namespace {

struct SlotTrace {
    Tensor input;          // slot input
    Tensor pre_post;       // searchable: candidate output (post-affine input)
    Tensor pre_relu;       // stem/reduction/searchable: affine output before relu
};

// Shared forward walk; when `trace` is non-null every slot input (and the
// intermediates needed for backward) is recorded.
Tensor walk_forward(const SearchSpace& sp, const PathParams& pp, const Path& path,
                    const Tensor& input, std::vector<SlotTrace>* trace) {
    Tensor x = input;
    if (trace) trace->resize(sp.slots.size());
    for (std::size_t s = 0; s < sp.slots.size(); ++s) {
        const Slot& slot = sp.slots[s];
        if (trace) (*trace)[s].input = x;
        switch (slot.kind) {
            case SlotKind::Stem:
            case SlotKind::Reduction: {
                const ParamSet& ps = *pp.fixed[s];
                Tensor y = op_forward(slot.fixed_op, ps, x);
                // affine params are appended after the conv's weight/bias
                Tensor a = affine_forward(y, ps[2].value, ps[3].value);
                if (trace) {
                    (*trace)[s].pre_post = std::move(y);
                    (*trace)[s].pre_relu = a;
                }
                x = relu_forward(a);
                break;
            }
            case SlotKind::Searchable: {
                const int l = slot.layer_index;
                const OperatorKind& op =
                    sp.layers[static_cast<std::size_t>(l)]
                        .candidates[static_cast<std::size_t>(path.choices[static_cast<std::size_t>(l)])];
                const ParamSet& ps = *pp.layer[static_cast<std::size_t>(l)];
                const ParamSet& post = *pp.post[static_cast<std::size_t>(l)];
                Tensor y = op_forward(op, ps, x);
                Tensor a = affine_forward(y, post[0].value, post[1].value);
                if (trace) {
                    (*trace)[s].pre_post = std::move(y);
                    (*trace)[s].pre_relu = a;
                }
                x = relu_forward(a);
                break;
            }
            case SlotKind::GlobalPool:
                x = global_avgpool_forward(x);
                break;
            case SlotKind::Classifier:
                x = dense_forward(x, (*pp.fixed[s])[0].value, (*pp.fixed[s])[1].value);
                break;
        }
    }
    return x;
}

}  // namespace

Tensor net_forward(const SearchSpace& sp, const PathParams& pp, const Path& path,
                   const Tensor& input) {
    return walk_forward(sp, pp, path, input, nullptr);
}

double net_train_batch(const SearchSpace& sp, const PathParams& pp, const Path& path,
                       const Tensor& input, const std::vector<int>& labels) {
    std::vector<SlotTrace> trace;
    Tensor logits = walk_forward(sp, pp, path, input, &trace);
    LossResult lr = softmax_cross_entropy(logits, labels);

    Tensor g = std::move(lr.grad);
    for (std::size_t si = sp.slots.size(); si-- > 0;) {
        const Slot& slot = sp.slots[si];
        SlotTrace& t = trace[si];
        switch (slot.kind) {
            case SlotKind::Classifier: {
                ParamSet& ps = *pp.fixed[si];
                Tensor gx, gw, gb;
                dense_backward(t.input, ps[0].value, g, gx, gw, gb);
                for (std::size_t i = 0; i < gw.data.size(); ++i) ps[0].grad.data[i] += gw.data[i];
                for (std::size_t i = 0; i < gb.data.size(); ++i) ps[1].grad.data[i] += gb.data[i];
                g = std::move(gx);
                break;
            }
            case SlotKind::GlobalPool:
                g = global_avgpool_backward(t.input.shape, g);
                break;
            case SlotKind::Stem:
            case SlotKind::Reduction: {
                ParamSet& ps = *pp.fixed[si];
                Tensor g_aff = relu_backward(t.pre_relu, g);
                Tensor g_pre, gs, gb;
                affine_backward(t.pre_post, ps[2].value, g_aff, g_pre, gs, gb);
                for (std::size_t i = 0; i < gs.data.size(); ++i) ps[2].grad.data[i] += gs.data[i];
                for (std::size_t i = 0; i < gb.data.size(); ++i) ps[3].grad.data[i] += gb.data[i];
                ParamSet conv_only{ps[0], ps[1]};
                Tensor gx = op_backward(slot.fixed_op, conv_only, t.input, g_pre);
                for (std::size_t i = 0; i < conv_only[0].grad.data.size(); ++i)
                    ps[0].grad.data[i] = conv_only[0].grad.data[i];
                for (std::size_t i = 0; i < conv_only[1].grad.data.size(); ++i)
                    ps[1].grad.data[i] = conv_only[1].grad.data[i];
                g = std::move(gx);
                break;
            }
            case SlotKind::Searchable: {
                const int l = slot.layer_index;
                const OperatorKind& op =
                    sp.layers[static_cast<std::size_t>(l)]
                        .candidates[static_cast<std::size_t>(path.choices[static_cast<std::size_t>(l)])];
                ParamSet& ps = *pp.layer[static_cast<std::size_t>(l)];
                ParamSet& post = *pp.post[static_cast<std::size_t>(l)];
                Tensor g_aff = relu_backward(t.pre_relu, g);
                Tensor g_pre, gs, gb;
                affine_backward(t.pre_post, post[0].value, g_aff, g_pre, gs, gb);
                for (std::size_t i = 0; i < gs.data.size(); ++i) post[0].grad.data[i] += gs.data[i];
                for (std::size_t i = 0; i < gb.data.size(); ++i) post[1].grad.data[i] += gb.data[i];
                g = op_backward(op, ps, t.input, g_pre);
                break;
            }
        }
    }
    return lr.loss;
}

Tensor stack_batch(const std::vector<Tensor>& inputs, const std::vector<int>& indices,
                   int begin, int end) {
    const Tensor& first = inputs[static_cast<std::size_t>(indices[static_cast<std::size_t>(begin)])];
    std::vector<int> shape = first.shape;
    shape.insert(shape.begin(), end - begin);
    Tensor batch(shape);
    const std::size_t per = first.data.size();
    for (int i = begin; i < end; ++i) {
        const Tensor& t = inputs[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])];
        std::copy(t.data.begin(), t.data.end(),
                  batch.data.begin() + static_cast<std::ptrdiff_t>(per * (i - begin)));
    }
    return batch;
}

double net_accuracy(const SearchSpace& sp, const PathParams& pp, const Path& path,
                    const std::vector<Tensor>& inputs, const std::vector<int>& labels,
                    const std::vector<int>& indices, int chunk) {
    if (indices.empty()) return 0.0;
    std::int64_t correct = 0;
    for (int begin = 0; begin < static_cast<int>(indices.size()); begin += chunk) {
        const int end = std::min<int>(begin + chunk, static_cast<int>(indices.size()));
        Tensor batch = stack_batch(inputs, indices, begin, end);
        Tensor logits = net_forward(sp, pp, path, batch);
        std::vector<int> pred = argmax_rows(logits);
        for (int i = begin; i < end; ++i)
            if (pred[static_cast<std::size_t>(i - begin)] ==
                labels[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])])
                ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

}  // namespace fedoras
