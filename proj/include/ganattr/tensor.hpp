#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "ganattr/errors.hpp"

namespace ganattr {

// 64-bit scalars throughout: gradient checking against finite differences is
// meaningless at single precision.
using real = double;

// Dense n-dimensional array in row-major order.
struct Tensor {
    std::vector<int> shape;
    std::vector<real> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims);
    Tensor(std::vector<int> dims, std::vector<real> values);

    static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }
    static Tensor full(std::vector<int> dims, real value);

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    // True when every entry is finite; callers check at module boundaries so
    // NaN and Inf never propagate silently.
    bool finite() const;

    std::size_t flat_index(std::initializer_list<int> idx) const;
    real& at(std::initializer_list<int> idx);
    real at(std::initializer_list<int> idx) const;

    // Flat offset for a [B,C,H,W] tensor.
    std::int64_t idx4(int b, int c, int y, int x) const {
        return ((static_cast<std::int64_t>(b) * shape[1] + c) * shape[2] + y) * shape[3] + x;
    }

    void fill(real value);
};

std::int64_t numel_of(const std::vector<int>& dims);

bool bitwise_equal(const Tensor& a, const Tensor& b);
real max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace ganattr
