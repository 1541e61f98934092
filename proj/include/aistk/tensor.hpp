#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace aistk {

/// Dense row-major array of doubles. All model parameters, gradients and
/// feature maps use this one type; shape is a plain list of dimension sizes.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double value);

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int dim(int i) const;
    int ndim() const { return static_cast<int>(shape.size()); }

    double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    // 2-D access: row r, column c.
    double& at(int r, int c);
    double at(int r, int c) const;

    void fill(double v);
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
    std::string shape_str() const;
};

std::int64_t shape_size(const std::vector<int>& shape);

// y = W x + y0 where W is [rows x cols], x has length cols. If accumulate is
// false the output is overwritten.
void matvec(const Tensor& W, std::span<const double> x, std::span<double> y,
            bool accumulate = false);

// y = W^T x (x has length rows(W), y has length cols(W)).
void matvec_transpose(const Tensor& W, std::span<const double> x, std::span<double> y,
                      bool accumulate = false);

// W += a b^T (outer product accumulation; a has length rows, b length cols).
void add_outer(Tensor& W, std::span<const double> a, std::span<const double> b);

void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace aistk
