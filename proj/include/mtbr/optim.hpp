#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mtbr/tensor.hpp"

namespace mtbr {

// θ ← θ − lr·g, no momentum.
void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads, double lr);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

// Bias-corrected Adam. Moment buffers are created on the first call.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace mtbr
