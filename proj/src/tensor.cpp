#include "aistk/tensor.hpp"

#include <cmath>
#include <sstream>

#include "aistk/errors.hpp"

namespace aistk {

std::int64_t shape_size(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ShapeError("negative dimension");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(shape_size(shape)), 0.0);
}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_size(shape) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("data length does not match shape");
}

Tensor Tensor::full(std::vector<int> s, double value) {
    Tensor t(std::move(s));
    t.fill(value);
    return t;
}

int Tensor::dim(int i) const {
    if (i < 0 || i >= ndim()) throw ShapeError("dimension index out of range");
    return shape[static_cast<std::size_t>(i)];
}

double& Tensor::at(int r, int c) {
    if (ndim() != 2) throw ShapeError("at(r,c) requires a 2-D tensor, got " + shape_str());
    return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape[1]) +
                static_cast<std::size_t>(c)];
}

double Tensor::at(int r, int c) const {
    if (ndim() != 2) throw ShapeError("at(r,c) requires a 2-D tensor, got " + shape_str());
    return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape[1]) +
                static_cast<std::size_t>(c)];
}

void Tensor::fill(double v) {
    for (double& x : data) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

void matvec(const Tensor& W, std::span<const double> x, std::span<double> y, bool accumulate) {
    if (W.ndim() != 2) throw ShapeError("matvec: W must be 2-D");
    const int rows = W.shape[0];
    const int cols = W.shape[1];
    if (static_cast<int>(x.size()) != cols)
        throw ShapeError("matvec: x length " + std::to_string(x.size()) + " != cols " +
                         std::to_string(cols));
    if (static_cast<int>(y.size()) != rows) throw ShapeError("matvec: y length != rows");
    const double* w = W.data.data();
    for (int r = 0; r < rows; ++r) {
        const double* wr = w + static_cast<std::size_t>(r) * cols;
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += wr[c] * x[static_cast<std::size_t>(c)];
        if (accumulate)
            y[static_cast<std::size_t>(r)] += acc;
        else
            y[static_cast<std::size_t>(r)] = acc;
    }
}

void matvec_transpose(const Tensor& W, std::span<const double> x, std::span<double> y,
                      bool accumulate) {
    if (W.ndim() != 2) throw ShapeError("matvec_transpose: W must be 2-D");
    const int rows = W.shape[0];
    const int cols = W.shape[1];
    if (static_cast<int>(x.size()) != rows) throw ShapeError("matvec_transpose: x length != rows");
    if (static_cast<int>(y.size()) != cols) throw ShapeError("matvec_transpose: y length != cols");
    if (!accumulate)
        for (int c = 0; c < cols; ++c) y[static_cast<std::size_t>(c)] = 0.0;
    const double* w = W.data.data();
    for (int r = 0; r < rows; ++r) {
        const double xr = x[static_cast<std::size_t>(r)];
        if (xr == 0.0) continue;
        const double* wr = w + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) y[static_cast<std::size_t>(c)] += xr * wr[c];
    }
}

void add_outer(Tensor& W, std::span<const double> a, std::span<const double> b) {
    if (W.ndim() != 2) throw ShapeError("add_outer: W must be 2-D");
    const int rows = W.shape[0];
    const int cols = W.shape[1];
    if (static_cast<int>(a.size()) != rows || static_cast<int>(b.size()) != cols)
        throw ShapeError("add_outer: vector lengths do not match W");
    double* w = W.data.data();
    for (int r = 0; r < rows; ++r) {
        const double ar = a[static_cast<std::size_t>(r)];
        if (ar == 0.0) continue;
        double* wr = w + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) wr[c] += ar * b[static_cast<std::size_t>(c)];
    }
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw ShapeError("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace aistk
