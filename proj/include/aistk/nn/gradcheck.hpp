#pragma once

#include <functional>
#include <span>
#include <string>

#include "aistk/rng.hpp"
#include "aistk/tensor.hpp"

namespace aistk::nn {

struct GradCheckEntry {
    Tensor* param;
    const Tensor* grad;  // analytic dLoss/dparam, already computed
    std::string name;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    double worst_analytic = 0.0;
    double worst_fd = 0.0;
};

/// Central finite differences against the supplied analytic gradients over a
/// random subset of entries per tensor. loss_fn must recompute the loss from
/// the current parameter values and be deterministic (stochastic inputs
/// frozen). Relative error uses max(|analytic|, |fd|, denom_floor) as the
/// denominator so that true-zero gradients do not blow up on FD noise.
GradCheckReport gradient_check(const std::function<double()>& loss_fn,
                               std::span<const GradCheckEntry> entries, Rng& rng,
                               int samples_per_tensor = 8, double epsilon = 1e-5,
                               double denom_floor = 1e-2);

}  // namespace aistk::nn
