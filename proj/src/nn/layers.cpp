#include "aistk/nn/layers.hpp"

#include <cmath>

#include "aistk/errors.hpp"

namespace aistk::nn {

double apply_activation(Activation act, double pre) {
    switch (act) {
        case Activation::identity: return pre;
        case Activation::relu: return pre > 0.0 ? pre : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-pre));
        case Activation::tanh: return std::tanh(pre);
        case Activation::softplus:
            // log(1 + e^pre), stable for large |pre|
            return pre > 30.0 ? pre : std::log1p(std::exp(pre));
    }
    return pre;
}

double activation_deriv(Activation act, double pre, double post) {
    switch (act) {
        case Activation::identity: return 1.0;
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return post * (1.0 - post);
        case Activation::tanh: return 1.0 - post * post;
        case Activation::softplus: return 1.0 / (1.0 + std::exp(-pre));
    }
    return 1.0;
}

std::vector<double> fc_forward(std::span<const double> x, const Tensor& W,
                               std::span<const double> b, Activation act) {
    if (W.ndim() != 2) throw ShapeError("fc_forward: W must be 2-D");
    if (static_cast<int>(x.size()) != W.shape[1])
        throw ShapeError("fc_forward: len(x)=" + std::to_string(x.size()) +
                         " != cols(W)=" + std::to_string(W.shape[1]));
    if (static_cast<int>(b.size()) != W.shape[0])
        throw ShapeError("fc_forward: len(b) != rows(W)");
    std::vector<double> y(b.begin(), b.end());
    matvec(W, x, y, /*accumulate=*/true);
    for (double& v : y) v = apply_activation(act, v);
    return y;
}

Dense::Dense(int in, int out, Activation a)
    : W(Tensor::zeros({out, in})), b(Tensor::zeros({out})), act(a) {}

void Dense::init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim() > 0 ? in_dim() : 1));
    for (double& w : W.data) w = rng.uniform(-bound, bound);
    b.fill(0.0);
}

const std::vector<double>& Dense::forward(std::span<const double> x, DenseCache& c) const {
    if (static_cast<int>(x.size()) != in_dim()) throw ShapeError("Dense::forward: input size");
    c.x.assign(x.begin(), x.end());
    c.x_ones.clear();
    c.pre.assign(b.data.begin(), b.data.end());
    matvec(W, x, c.pre, /*accumulate=*/true);
    c.out.resize(c.pre.size());
    for (std::size_t i = 0; i < c.pre.size(); ++i) c.out[i] = apply_activation(act, c.pre[i]);
    return c.out;
}

const std::vector<double>& Dense::forward_ones(std::span<const int> ones, DenseCache& c) const {
    const int out = out_dim();
    const int in = in_dim();
    c.x.clear();
    c.x_ones.assign(ones.begin(), ones.end());
    c.pre.assign(b.data.begin(), b.data.end());
    for (int idx : ones) {
        if (idx < 0 || idx >= in) throw ShapeError("Dense::forward_ones: index out of range");
        for (int r = 0; r < out; ++r)
            c.pre[static_cast<std::size_t>(r)] += W.at(r, idx);
    }
    c.out.resize(c.pre.size());
    for (std::size_t i = 0; i < c.pre.size(); ++i) c.out[i] = apply_activation(act, c.pre[i]);
    return c.out;
}

void Dense::backward(std::span<const double> dy, const DenseCache& c, Grads& g,
                     std::span<double> dx) const {
    const int out = out_dim();
    if (static_cast<int>(dy.size()) != out) throw ShapeError("Dense::backward: dy size");
    std::vector<double> dpre(static_cast<std::size_t>(out));
    for (int i = 0; i < out; ++i)
        dpre[static_cast<std::size_t>(i)] =
            dy[static_cast<std::size_t>(i)] *
            activation_deriv(act, c.pre[static_cast<std::size_t>(i)],
                             c.out[static_cast<std::size_t>(i)]);
    for (int i = 0; i < out; ++i) g.db[i] += dpre[static_cast<std::size_t>(i)];
    if (!c.x.empty()) {
        add_outer(g.dW, dpre, c.x);
    } else {
        // Sparse binary input: dW column touched only where x had a one.
        for (int idx : c.x_ones)
            for (int r = 0; r < out; ++r)
                g.dW.at(r, idx) += dpre[static_cast<std::size_t>(r)];
    }
    if (!dx.empty()) matvec_transpose(W, dpre, dx, /*accumulate=*/true);
}

LstmCell::LstmCell(int input_dim, int hidden_dim)
    : Wx(Tensor::zeros({4 * hidden_dim, input_dim})),
      Wh(Tensor::zeros({4 * hidden_dim, hidden_dim})),
      b(Tensor::zeros({4 * hidden_dim})) {}

void LstmCell::init(Rng& rng) {
    const int in = input_dim();
    const int h = hidden_dim();
    const double bx = 1.0 / std::sqrt(static_cast<double>(in > 0 ? in : 1));
    const double bh = 1.0 / std::sqrt(static_cast<double>(h > 0 ? h : 1));
    for (double& w : Wx.data) w = rng.uniform(-bx, bx);
    for (double& w : Wh.data) w = rng.uniform(-bh, bh);
    b.fill(0.0);
    // Forget-gate bias starts open.
    for (int i = h; i < 2 * h; ++i) b[i] = 1.0;
}

LstmState LstmCell::step(std::span<const double> x, const LstmState& prev, LstmCache& cache) const {
    const int h = hidden_dim();
    if (static_cast<int>(x.size()) != input_dim()) throw ShapeError("LstmCell::step: input size");
    if (static_cast<int>(prev.h.size()) != h || static_cast<int>(prev.c.size()) != h)
        throw ShapeError("LstmCell::step: state size");

    cache.x.assign(x.begin(), x.end());
    cache.h_prev = prev.h;
    cache.c_prev = prev.c;
    cache.pre.assign(b.data.begin(), b.data.end());
    matvec(Wx, x, cache.pre, true);
    matvec(Wh, prev.h, cache.pre, true);

    cache.gi.resize(h);
    cache.gf.resize(h);
    cache.gg.resize(h);
    cache.go.resize(h);
    cache.c_new.resize(h);
    cache.tanh_c_new.resize(h);

    LstmState next(h);
    for (int j = 0; j < h; ++j) {
        const double pi = cache.pre[static_cast<std::size_t>(j)];
        const double pf = cache.pre[static_cast<std::size_t>(h + j)];
        const double pg = cache.pre[static_cast<std::size_t>(2 * h + j)];
        const double po = cache.pre[static_cast<std::size_t>(3 * h + j)];
        const double gi = 1.0 / (1.0 + std::exp(-pi));
        const double gf = 1.0 / (1.0 + std::exp(-pf));
        const double gg = std::tanh(pg);
        const double go = 1.0 / (1.0 + std::exp(-po));
        const double cn = gf * prev.c[static_cast<std::size_t>(j)] + gi * gg;
        const double tc = std::tanh(cn);
        cache.gi[static_cast<std::size_t>(j)] = gi;
        cache.gf[static_cast<std::size_t>(j)] = gf;
        cache.gg[static_cast<std::size_t>(j)] = gg;
        cache.go[static_cast<std::size_t>(j)] = go;
        cache.c_new[static_cast<std::size_t>(j)] = cn;
        cache.tanh_c_new[static_cast<std::size_t>(j)] = tc;
        next.c[static_cast<std::size_t>(j)] = cn;
        next.h[static_cast<std::size_t>(j)] = go * tc;
    }
    return next;
}

void LstmCell::backward(std::span<const double> dh, std::span<const double> dc,
                        const LstmCache& cache, Grads& g, std::span<double> dx,
                        std::span<double> dh_prev, std::span<double> dc_prev) const {
    const int h = hidden_dim();
    std::vector<double> dpre(static_cast<std::size_t>(4 * h));
    for (int j = 0; j < h; ++j) {
        const double gi = cache.gi[static_cast<std::size_t>(j)];
        const double gf = cache.gf[static_cast<std::size_t>(j)];
        const double gg = cache.gg[static_cast<std::size_t>(j)];
        const double go = cache.go[static_cast<std::size_t>(j)];
        const double tc = cache.tanh_c_new[static_cast<std::size_t>(j)];
        const double dh_j = dh.empty() ? 0.0 : dh[static_cast<std::size_t>(j)];
        const double dc_up = dc.empty() ? 0.0 : dc[static_cast<std::size_t>(j)];

        const double dct = dc_up + dh_j * go * (1.0 - tc * tc);
        const double d_go = dh_j * tc;
        const double d_gf = dct * cache.c_prev[static_cast<std::size_t>(j)];
        const double d_gi = dct * gg;
        const double d_gg = dct * gi;

        dpre[static_cast<std::size_t>(j)] = d_gi * gi * (1.0 - gi);
        dpre[static_cast<std::size_t>(h + j)] = d_gf * gf * (1.0 - gf);
        dpre[static_cast<std::size_t>(2 * h + j)] = d_gg * (1.0 - gg * gg);
        dpre[static_cast<std::size_t>(3 * h + j)] = d_go * go * (1.0 - go);
        if (!dc_prev.empty()) dc_prev[static_cast<std::size_t>(j)] += dct * gf;
    }
    for (int i = 0; i < 4 * h; ++i) g.db[i] += dpre[static_cast<std::size_t>(i)];
    add_outer(g.dWx, dpre, cache.x);
    add_outer(g.dWh, dpre, cache.h_prev);
    if (!dx.empty()) matvec_transpose(Wx, dpre, dx, true);
    if (!dh_prev.empty()) matvec_transpose(Wh, dpre, dh_prev, true);
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, int stride) {
    if (input.ndim() != 2 || kernel.ndim() != 2)
        throw ShapeError("conv2d_forward: input and kernel must be 2-D");
    if (stride < 1) throw ShapeError("conv2d_forward: stride must be >= 1");
    const int ih = input.shape[0], iw = input.shape[1];
    const int kh = kernel.shape[0], kw = kernel.shape[1];
    if (kh > ih || kw > iw) throw ShapeError("conv2d_forward: kernel larger than input");
    const int oh = (ih - kh) / stride + 1;
    const int ow = (iw - kw) / stride + 1;
    Tensor out = Tensor::zeros({oh, ow});
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (int u = 0; u < kh; ++u)
                for (int v = 0; v < kw; ++v)
                    acc += input.at(r * stride + u, c * stride + v) * kernel.at(u, v);
            out.at(r, c) = acc;
        }
    return out;
}

Conv2d::Conv2d(int in_ch_, int out_ch_, int kh, int kw, int stride_, Activation a)
    : K(Tensor::zeros({out_ch_, in_ch_, kh, kw})), b(Tensor::zeros({out_ch_})), stride(stride_),
      act(a) {}

void Conv2d::init(Rng& rng) {
    const int fan_in = K.shape[1] * K.shape[2] * K.shape[3];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
    for (double& w : K.data) w = rng.uniform(-bound, bound);
    b.fill(0.0);
}

Tensor Conv2d::forward(const Tensor& input, Conv2dCache& c) const {
    if (input.ndim() != 3 || input.shape[0] != in_ch())
        throw ShapeError("Conv2d::forward: expected [in_ch x H x W] input");
    const int ih = input.shape[1], iw = input.shape[2];
    const int kh = K.shape[2], kw = K.shape[3];
    if (kh > ih || kw > iw) throw ShapeError("Conv2d::forward: kernel larger than input");
    const int oh = (ih - kh) / stride + 1;
    const int ow = (iw - kw) / stride + 1;
    c.input = input;
    c.pre = Tensor::zeros({out_ch(), oh, ow});
    Tensor out = Tensor::zeros({out_ch(), oh, ow});
    const int ic = in_ch();
    for (int oc = 0; oc < out_ch(); ++oc) {
        for (int r = 0; r < oh; ++r)
            for (int col = 0; col < ow; ++col) {
                double acc = b[oc];
                for (int ci = 0; ci < ic; ++ci)
                    for (int u = 0; u < kh; ++u) {
                        const double* in_row =
                            &input.data[(static_cast<std::size_t>(ci) * ih +
                                         (r * stride + u)) * static_cast<std::size_t>(iw)];
                        const double* k_row =
                            &K.data[(((static_cast<std::size_t>(oc) * ic + ci) * kh + u)) *
                                    static_cast<std::size_t>(kw)];
                        for (int v = 0; v < kw; ++v)
                            acc += in_row[col * stride + v] * k_row[v];
                    }
                const std::size_t oi =
                    (static_cast<std::size_t>(oc) * oh + r) * static_cast<std::size_t>(ow) + col;
                c.pre.data[oi] = acc;
                out.data[oi] = apply_activation(act, acc);
            }
    }
    return out;
}

void Conv2d::backward(const Tensor& dout, const Conv2dCache& c, Grads& g, Tensor* dinput) const {
    const int ic = in_ch(), oc_n = out_ch();
    const int ih = c.input.shape[1], iw = c.input.shape[2];
    const int kh = K.shape[2], kw = K.shape[3];
    const int oh = c.pre.shape[1], ow = c.pre.shape[2];
    if (dout.shape != c.pre.shape) throw ShapeError("Conv2d::backward: dout shape");
    if (dinput && dinput->shape != c.input.shape)
        throw ShapeError("Conv2d::backward: dinput shape");
    for (int oc = 0; oc < oc_n; ++oc)
        for (int r = 0; r < oh; ++r)
            for (int col = 0; col < ow; ++col) {
                const std::size_t oi =
                    (static_cast<std::size_t>(oc) * oh + r) * static_cast<std::size_t>(ow) + col;
                const double dpre =
                    dout.data[oi] * activation_deriv(act, c.pre.data[oi],
                                                     apply_activation(act, c.pre.data[oi]));
                if (dpre == 0.0) continue;
                g.db[oc] += dpre;
                for (int ci = 0; ci < ic; ++ci)
                    for (int u = 0; u < kh; ++u)
                        for (int v = 0; v < kw; ++v) {
                            const std::size_t ii =
                                (static_cast<std::size_t>(ci) * ih + (r * stride + u)) *
                                    static_cast<std::size_t>(iw) +
                                (col * stride + v);
                            const std::size_t ki =
                                ((static_cast<std::size_t>(oc) * ic + ci) * kh + u) *
                                    static_cast<std::size_t>(kw) +
                                v;
                            g.dK.data[ki] += dpre * c.input.data[ii];
                            if (dinput) dinput->data[ii] += dpre * K.data[ki];
                        }
            }
}

Tensor maxpool_last(const Tensor& input, int pool, MaxPoolCache& c) {
    if (pool < 1) throw ShapeError("maxpool_last: pool width must be >= 1");
    if (input.ndim() < 1) throw ShapeError("maxpool_last: scalar input");
    const int w = input.shape.back();
    const int ow = w / pool;
    if (ow < 1) throw ShapeError("maxpool_last: input narrower than the pool window");
    std::int64_t rows = 1;
    for (std::size_t i = 0; i + 1 < input.shape.size(); ++i) rows *= input.shape[i];

    std::vector<int> out_shape = input.shape;
    out_shape.back() = ow;
    Tensor out(out_shape);
    c.in_shape = input.shape;
    c.argmax.assign(out.data.size(), 0);

    for (std::int64_t r = 0; r < rows; ++r) {
        const std::int64_t in_base = r * w, out_base = r * ow;
        for (int o = 0; o < ow; ++o) {
            std::int64_t best = in_base + std::int64_t(o) * pool;
            for (int k = 1; k < pool; ++k) {
                std::int64_t idx = in_base + std::int64_t(o) * pool + k;
                if (input[idx] > input[best]) best = idx;
            }
            out[out_base + o] = input[best];
            c.argmax[static_cast<std::size_t>(out_base + o)] = static_cast<int>(best);
        }
    }
    return out;
}

void maxpool_last_backward(const Tensor& dout, const MaxPoolCache& c, Tensor& dinput) {
    if (dinput.shape != c.in_shape) throw ShapeError("maxpool_last_backward: dinput shape");
    if (dout.size() != std::int64_t(c.argmax.size()))
        throw ShapeError("maxpool_last_backward: dout size");
    for (std::int64_t i = 0; i < dout.size(); ++i)
        dinput[c.argmax[static_cast<std::size_t>(i)]] += dout[i];
}

}  // namespace aistk::nn
