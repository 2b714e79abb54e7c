#include "ganattr/tensor.hpp"

#include <cmath>
#include <cstring>

namespace ganattr {

std::int64_t numel_of(const std::vector<int>& dims) {
    std::int64_t n = 1;
    for (int d : dims) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> dims) : shape(std::move(dims)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), 0.0);
}

Tensor::Tensor(std::vector<int> dims, std::vector<real> values) : shape(std::move(dims)), data(std::move(values)) {
    if (numel_of(shape) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("tensor data size does not match shape");
}

Tensor Tensor::full(std::vector<int> dims, real value) {
    Tensor t(std::move(dims));
    t.fill(value);
    return t;
}

int Tensor::dim(int i) const {
    if (i < 0 || i >= ndim()) throw ShapeError("tensor dimension index out of range");
    return shape[static_cast<std::size_t>(i)];
}

bool Tensor::finite() const {
    for (real v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::size_t Tensor::flat_index(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != ndim()) throw ShapeError("index rank mismatch");
    std::int64_t flat = 0;
    int i = 0;
    for (int v : idx) {
        if (v < 0 || v >= shape[static_cast<std::size_t>(i)]) throw ShapeError("index out of range");
        flat = flat * shape[static_cast<std::size_t>(i)] + v;
        ++i;
    }
    return static_cast<std::size_t>(flat);
}

real& Tensor::at(std::initializer_list<int> idx) { return data[flat_index(idx)]; }

real Tensor::at(std::initializer_list<int> idx) const { return data[flat_index(idx)]; }

void Tensor::fill(real value) {
    for (real& v : data) v = value;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) return false;
    return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(real)) == 0;
}

real max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) throw ShapeError("max_abs_diff: shape mismatch");
    real m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace ganattr
