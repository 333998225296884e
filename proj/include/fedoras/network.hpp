#pragma once

#include "fedoras/space.hpp"

namespace fedoras {

/// Logits [N, classes] for a batch run along `path` with the bound params.
Tensor net_forward(const SearchSpace& space, const PathParams& pp, const Path& path,
                   const Tensor& input);

/// Forward + backward for one batch; gradients are accumulated into the
/// bound parameters. Returns the mean loss.
double net_train_batch(const SearchSpace& space, const PathParams& pp, const Path& path,
                       const Tensor& input, const std::vector<int>& labels);

/// Mean zero-one accuracy over `indices` of (inputs, labels), evaluated in
/// chunks; read-only on the parameters.
double net_accuracy(const SearchSpace& space, const PathParams& pp, const Path& path,
                    const std::vector<Tensor>& inputs, const std::vector<int>& labels,
                    const std::vector<int>& indices, int chunk = 64);

/// Stack per-sample [C,H,W] tensors into one [N,C,H,W] batch.
Tensor stack_batch(const std::vector<Tensor>& inputs, const std::vector<int>& indices,
                   int begin, int end);

}  // namespace fedoras
