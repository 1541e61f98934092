#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aistk/tensor.hpp"

namespace aistk::nn {

struct AdamState {
    Tensor m, v;
    std::int64_t t = 0;

    AdamState() = default;
    explicit AdamState(const std::vector<int>& shape)
        : m(Tensor::zeros(shape)), v(Tensor::zeros(shape)) {}
};

/// One Adam step with bias correction. Throws NumericError on a non-finite
/// gradient. lr = 0 leaves the parameter bit-identical.
void adam_update(Tensor& param, const Tensor& grad, AdamState& state, double lr,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Convenience wrapper holding one AdamState per parameter tensor.
struct AdamOptimizer {
    double lr;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<AdamState> states;

    explicit AdamOptimizer(double lr_) : lr(lr_) {}

    void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);
};

}  // namespace aistk::nn
