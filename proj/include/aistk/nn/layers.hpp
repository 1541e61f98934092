#pragma once

#include <span>
#include <vector>

#include "aistk/rng.hpp"
#include "aistk/tensor.hpp"

namespace aistk::nn {

enum class Activation { identity, relu, sigmoid, tanh, softplus };

double apply_activation(Activation act, double pre);
/// Derivative d(act)/d(pre) expressed from the pre-activation and the output.
double activation_deriv(Activation act, double pre, double post);

/// Stateless fully-connected forward: activation(W x + b).
/// W is [out x in], x has length in, b length out.
std::vector<double> fc_forward(std::span<const double> x, const Tensor& W,
                               std::span<const double> b, Activation act);

struct DenseCache {
    std::vector<double> x;    // input copy (empty for sparse forward)
    std::vector<int> x_ones;  // sparse binary input: indices of the set bits
    std::vector<double> pre;
    std::vector<double> out;
};

/// Fully-connected layer with explicit backward. Gradients accumulate into
/// caller-owned buffers so batches and multi-consumer nodes just sum.
struct Dense {
    Tensor W;  // [out x in]
    Tensor b;  // [out]
    Activation act = Activation::identity;

    Dense() = default;
    Dense(int in, int out, Activation a);

    int in_dim() const { return W.ndim() == 2 ? W.shape[1] : 0; }
    int out_dim() const { return W.ndim() == 2 ? W.shape[0] : 0; }

    /// Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero.
    void init(Rng& rng);

    const std::vector<double>& forward(std::span<const double> x, DenseCache& c) const;
    /// Forward for a sparse binary input given by the indices of its ones.
    const std::vector<double>& forward_ones(std::span<const int> ones, DenseCache& c) const;

    struct Grads {
        Tensor dW, db;
        explicit Grads(const Dense& d) : dW(Tensor::zeros(d.W.shape)), db(Tensor::zeros(d.b.shape)) {}
    };

    /// dy = dL/d(out). Parameter grads accumulate into g; if dx is non-empty,
    /// dL/dx accumulates into it.
    void backward(std::span<const double> dy, const DenseCache& c, Grads& g,
                  std::span<double> dx = {}) const;
};

struct LstmState {
    std::vector<double> h, c;
    LstmState() = default;
    explicit LstmState(int hidden_dim) : h(hidden_dim, 0.0), c(hidden_dim, 0.0) {}
};

struct LstmCache {
    std::vector<double> x, h_prev, c_prev;
    std::vector<double> pre;              // [4H], gate order i,f,g,o
    std::vector<double> gi, gf, gg, go;   // activated gates
    std::vector<double> c_new, tanh_c_new;
};

/// Single-layer LSTM cell, gate order (input, forget, candidate, output).
struct LstmCell {
    Tensor Wx;  // [4H x input_dim]
    Tensor Wh;  // [4H x H]
    Tensor b;   // [4H]

    LstmCell() = default;
    LstmCell(int input_dim, int hidden_dim);

    int input_dim() const { return Wx.ndim() == 2 ? Wx.shape[1] : 0; }
    int hidden_dim() const { return Wh.ndim() == 2 ? Wh.shape[1] : 0; }

    /// Weights uniform as in Dense::init; biases zero except forget gate = 1.
    void init(Rng& rng);

    LstmState step(std::span<const double> x, const LstmState& prev, LstmCache& cache) const;

    struct Grads {
        Tensor dWx, dWh, db;
        explicit Grads(const LstmCell& l)
            : dWx(Tensor::zeros(l.Wx.shape)), dWh(Tensor::zeros(l.Wh.shape)),
              db(Tensor::zeros(l.b.shape)) {}
    };

    /// dh, dc are dL/d(new h), dL/d(new c). Accumulates parameter grads into g
    /// and input-side grads into dx, dh_prev, dc_prev (any may be empty).
    void backward(std::span<const double> dh, std::span<const double> dc, const LstmCache& cache,
                  Grads& g, std::span<double> dx, std::span<double> dh_prev,
                  std::span<double> dc_prev) const;
};

/// Valid (no padding) cross-correlation of [H x W] input with one [kh x kw]
/// kernel. Output is [(H-kh)/stride+1 x (W-kw)/stride+1].
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, int stride);

struct Conv2dCache {
    Tensor input;  // [in_ch x H x W]
    Tensor pre;    // [out_ch x oh x ow]
};

/// Multi-channel convolution layer built on the same valid cross-correlation.
struct Conv2d {
    Tensor K;  // [out_ch x in_ch x kh x kw]
    Tensor b;  // [out_ch]
    int stride = 1;
    Activation act = Activation::identity;

    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int kh, int kw, int stride_, Activation a);

    int in_ch() const { return K.shape[1]; }
    int out_ch() const { return K.shape[0]; }

    void init(Rng& rng);

    /// input [in_ch x H x W] -> [out_ch x oh x ow].
    Tensor forward(const Tensor& input, Conv2dCache& c) const;

    struct Grads {
        Tensor dK, db;
        explicit Grads(const Conv2d& l)
            : dK(Tensor::zeros(l.K.shape)), db(Tensor::zeros(l.b.shape)) {}
    };

    void backward(const Tensor& dout, const Conv2dCache& c, Grads& g, Tensor* dinput) const;
};

struct MaxPoolCache {
    std::vector<int> in_shape;
    std::vector<int> argmax;  // flat input index feeding each output element
};

/// Non-overlapping max pooling over the last axis (window = stride = pool).
/// Trailing elements that do not fill a window are dropped; ties keep the
/// earliest index.
Tensor maxpool_last(const Tensor& input, int pool, MaxPoolCache& c);
/// Routes dout back to the argmax positions, accumulating into dinput.
void maxpool_last_backward(const Tensor& dout, const MaxPoolCache& c, Tensor& dinput);

}  // namespace aistk::nn
