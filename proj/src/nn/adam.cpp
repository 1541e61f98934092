#include "aistk/nn/adam.hpp"

#include <cmath>

#include "aistk/errors.hpp"

namespace aistk::nn {

void adam_update(Tensor& param, const Tensor& grad, AdamState& state, double lr, double beta1,
                 double beta2, double eps) {
    if (!param.same_shape(grad)) throw ShapeError("adam_update: param/grad shape mismatch");
    if (state.m.size() == 0) state = AdamState(param.shape);
    if (!state.m.same_shape(param)) throw ShapeError("adam_update: state shape mismatch");
    if (!grad.all_finite()) throw NumericError("adam_update: non-finite gradient");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::int64_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

void AdamOptimizer::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
    if (params.size() != grads.size()) throw ShapeError("AdamOptimizer: params/grads count");
    if (states.empty()) {
        states.reserve(params.size());
        for (const Tensor* p : params) states.emplace_back(p->shape);
    }
    if (states.size() != params.size()) throw ShapeError("AdamOptimizer: state count");
    for (std::size_t i = 0; i < params.size(); ++i)
        adam_update(*params[i], *grads[i], states[i], lr, beta1, beta2, eps);
}

}  // namespace aistk::nn
