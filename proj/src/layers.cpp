#include "ganattr/layers.hpp"

#include <cmath>
#include <cstring>
#include <utility>

#include "ganattr/errors.hpp"
#include "ganattr/parallel.hpp"

namespace ganattr {

Layer Layer::conv2d(std::string name, int in_ch, int out_ch, int stride, bool with_bias) {
    if (in_ch < 1 || out_ch < 1) throw ValueError("conv2d: channel counts must be positive");
    if (stride != 1 && stride != 2) throw ValueError("conv2d: stride must be 1 or 2");
    Layer l;
    l.kind = LayerKind::Conv2d;
    l.name = std::move(name);
    l.weight = Tensor::zeros({out_ch, in_ch, 3, 3});
    l.stride = stride;
    l.has_bias = with_bias;
    if (with_bias) l.bias = Tensor::zeros({out_ch});
    return l;
}

Layer Layer::batchnorm2d(std::string name, int channels) {
    if (channels < 1) throw ValueError("batchnorm2d: channel count must be positive");
    Layer l;
    l.kind = LayerKind::BatchNorm2d;
    l.name = std::move(name);
    l.gamma = Tensor::full({channels}, 1.0);
    l.beta = Tensor::zeros({channels});
    l.running_mean = Tensor::zeros({channels});
    l.running_var = Tensor::full({channels}, 1.0);
    return l;
}

Layer Layer::leaky_relu(std::string name, real alpha) {
    Layer l;
    l.kind = LayerKind::LeakyRelu;
    l.name = std::move(name);
    l.alpha = alpha;
    return l;
}

Layer Layer::avg_pool2d(std::string name, int pool) {
    if (pool < 1) throw ValueError("avg_pool2d: window must be positive");
    Layer l;
    l.kind = LayerKind::AvgPool2d;
    l.name = std::move(name);
    l.pool_size = pool;
    return l;
}

Layer Layer::global_avg_pool(std::string name) {
    Layer l;
    l.kind = LayerKind::GlobalAvgPool;
    l.name = std::move(name);
    return l;
}

Layer Layer::dense(std::string name, int in_dim, int out_dim) {
    if (in_dim < 1 || out_dim < 1) throw ValueError("dense: dimensions must be positive");
    Layer l;
    l.kind = LayerKind::Dense;
    l.name = std::move(name);
    l.weight = Tensor::zeros({out_dim, in_dim});
    l.bias = Tensor::zeros({out_dim});
    l.has_bias = true;
    return l;
}

namespace {

void require_4d(const Tensor& t, const char* who) {
    if (t.ndim() != 4) throw ShapeError(std::string(who) + ": expected a 4D [B,C,H,W] tensor");
}

// Output spatial size for a 3x3 kernel with zero padding 1.
int conv_out_extent(int in, int stride) { return (in + 2 - 3) / stride + 1; }

// Scatters a [C,H,W] image into patch-major columns [C*9, OH*OW] for a 3x3
// kernel with zero padding 1. Out-of-image taps become zeros.
void im2col(const real* src, int C, int H, int W, int stride, real* cols) {
    const int OH = conv_out_extent(H, stride);
    const int OW = conv_out_extent(W, stride);
    for (int c = 0; c < C; ++c) {
        const real* plane = src + static_cast<std::size_t>(c) * H * W;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                real* dst = cols + (static_cast<std::size_t>(c * 9 + ky * 3 + kx)) * OH * OW;
                for (int oy = 0; oy < OH; ++oy, dst += OW) {
                    const int iy = oy * stride + ky - 1;
                    if (iy < 0 || iy >= H) {
                        std::memset(dst, 0, sizeof(real) * OW);
                        continue;
                    }
                    const real* row = plane + static_cast<std::size_t>(iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * stride + kx - 1;
                        dst[ox] = (ix >= 0 && ix < W) ? row[ix] : 0.0;
                    }
                }
            }
        }
    }
}

// Adds patch-major columns back into a zero-initialized [C,H,W] gradient
// image; overlapping taps accumulate.
void col2im_add(const real* cols, int C, int H, int W, int stride, real* dst) {
    const int OH = conv_out_extent(H, stride);
    const int OW = conv_out_extent(W, stride);
    for (int c = 0; c < C; ++c) {
        real* plane = dst + static_cast<std::size_t>(c) * H * W;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const real* src = cols + (static_cast<std::size_t>(c * 9 + ky * 3 + kx)) * OH * OW;
                for (int oy = 0; oy < OH; ++oy, src += OW) {
                    const int iy = oy * stride + ky - 1;
                    if (iy < 0 || iy >= H) continue;
                    real* row = plane + static_cast<std::size_t>(iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * stride + kx - 1;
                        if (ix >= 0 && ix < W) row[ix] += src[ox];
                    }
                }
            }
        }
    }
}

// C[M,N] = A[M,K] * B[K,N], all row-major. The n loop is the vector axis.
void gemm(const real* a, const real* b, real* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        real* crow = c + static_cast<std::size_t>(i) * n;
        std::memset(crow, 0, sizeof(real) * n);
        const real* arow = a + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const real aij = arow[j];
            const real* brow = b + static_cast<std::size_t>(j) * n;
            for (int t = 0; t < n; ++t) crow[t] += aij * brow[t];
        }
    }
}

}  // namespace

std::vector<int> layer_output_shape(const Layer& layer, const std::vector<int>& in) {
    switch (layer.kind) {
        case LayerKind::Conv2d: {
            if (in.size() != 4) throw ShapeError("conv2d: expected a 4D input shape");
            if (in[1] != layer.weight.dim(1))
                throw ShapeError("conv2d '" + layer.name + "': input has " + std::to_string(in[1]) +
                                 " channels, weights expect " + std::to_string(layer.weight.dim(1)));
            return {in[0], layer.weight.dim(0), conv_out_extent(in[2], layer.stride),
                    conv_out_extent(in[3], layer.stride)};
        }
        case LayerKind::BatchNorm2d: {
            if (in.size() != 4) throw ShapeError("batchnorm2d: expected a 4D input shape");
            if (in[1] != layer.gamma.dim(0))
                throw ShapeError("batchnorm2d '" + layer.name + "': channel mismatch");
            return in;
        }
        case LayerKind::LeakyRelu:
            return in;
        case LayerKind::AvgPool2d: {
            if (in.size() != 4) throw ShapeError("avg_pool2d: expected a 4D input shape");
            if (in[2] % layer.pool_size != 0 || in[3] % layer.pool_size != 0)
                throw ShapeError("avg_pool2d '" + layer.name + "': extent " + std::to_string(in[2]) +
                                 "x" + std::to_string(in[3]) + " not divisible by window " +
                                 std::to_string(layer.pool_size));
            return {in[0], in[1], in[2] / layer.pool_size, in[3] / layer.pool_size};
        }
        case LayerKind::GlobalAvgPool: {
            if (in.size() != 4) throw ShapeError("global_avg_pool: expected a 4D input shape");
            return {in[0], in[1]};
        }
        case LayerKind::Dense: {
            if (in.empty()) throw ShapeError("dense: empty input shape");
            std::int64_t flat = 1;
            for (std::size_t i = 1; i < in.size(); ++i) flat *= in[i];
            if (flat != layer.weight.dim(1))
                throw ShapeError("dense '" + layer.name + "': input flattens to " +
                                 std::to_string(flat) + ", weights expect " +
                                 std::to_string(layer.weight.dim(1)));
            return {in[0], layer.weight.dim(0)};
        }
    }
    throw StateError("layer_output_shape: unknown layer kind");
}

Tensor conv2d_forward(const Tensor& input, const Layer& layer) {
    require_4d(input, "conv2d");
    const auto out_shape = layer_output_shape(layer, input.shape);
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int F = out_shape[1], OH = out_shape[2], OW = out_shape[3];
    const int K = C * 9, P = OH * OW;
    Tensor out(out_shape);
    parallel_for(B, [&](int b) {
        std::vector<real> cols(static_cast<std::size_t>(K) * P);
        im2col(input.data.data() + static_cast<std::size_t>(b) * C * H * W, C, H, W, layer.stride,
               cols.data());
        real* y = out.data.data() + static_cast<std::size_t>(b) * F * P;
        gemm(layer.weight.data.data(), cols.data(), y, F, K, P);
        if (layer.has_bias) {
            for (int f = 0; f < F; ++f) {
                const real bf = layer.bias.data[f];
                real* row = y + static_cast<std::size_t>(f) * P;
                for (int p = 0; p < P; ++p) row[p] += bf;
            }
        }
    });
    return out;
}

Tensor conv2d_backward(const Tensor& input, const Layer& layer, const Tensor& dy, Tensor* dweight,
                       Tensor* dbias) {
    require_4d(input, "conv2d backward");
    const auto out_shape = layer_output_shape(layer, input.shape);
    if (dy.shape != out_shape) throw ShapeError("conv2d backward: upstream gradient shape mismatch");
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int F = out_shape[1], OH = out_shape[2], OW = out_shape[3];
    const int K = C * 9, P = OH * OW;

    Tensor dx(input.shape);
    // Per-image weight-gradient slabs keep the cross-image reduction in a
    // fixed sequential order below, so results do not depend on the thread
    // budget.
    std::vector<real> wslab(static_cast<std::size_t>(B) * F * K);
    std::vector<real> bslab(layer.has_bias ? static_cast<std::size_t>(B) * F : 0);

    parallel_for(B, [&](int b) {
        std::vector<real> cols(static_cast<std::size_t>(K) * P);
        std::vector<real> dcols(static_cast<std::size_t>(K) * P);
        im2col(input.data.data() + static_cast<std::size_t>(b) * C * H * W, C, H, W, layer.stride,
               cols.data());
        const real* dyb = dy.data.data() + static_cast<std::size_t>(b) * F * P;

        real* dw = wslab.data() + static_cast<std::size_t>(b) * F * K;
        for (int f = 0; f < F; ++f) {
            const real* dyrow = dyb + static_cast<std::size_t>(f) * P;
            for (int k = 0; k < K; ++k) {
                const real* crow = cols.data() + static_cast<std::size_t>(k) * P;
                real s = 0.0;
                for (int p = 0; p < P; ++p) s += dyrow[p] * crow[p];
                dw[static_cast<std::size_t>(f) * K + k] = s;
            }
            if (layer.has_bias) {
                real s = 0.0;
                for (int p = 0; p < P; ++p) s += dyrow[p];
                bslab[static_cast<std::size_t>(b) * F + f] = s;
            }
        }

        // dcols = weight^T * dy, streamed row by row over k.
        for (int k = 0; k < K; ++k) {
            real* drow = dcols.data() + static_cast<std::size_t>(k) * P;
            std::memset(drow, 0, sizeof(real) * P);
            for (int f = 0; f < F; ++f) {
                const real wfk = layer.weight.data[static_cast<std::size_t>(f) * K + k];
                const real* dyrow = dyb + static_cast<std::size_t>(f) * P;
                for (int p = 0; p < P; ++p) drow[p] += wfk * dyrow[p];
            }
        }
        col2im_add(dcols.data(), C, H, W, layer.stride,
                   dx.data.data() + static_cast<std::size_t>(b) * C * H * W);
    });

    if (dweight) {
        if (dweight->shape != layer.weight.shape)
            throw ShapeError("conv2d backward: weight gradient shape mismatch");
        for (int b = 0; b < B; ++b) {
            const real* dw = wslab.data() + static_cast<std::size_t>(b) * F * K;
            for (std::size_t i = 0; i < dweight->data.size(); ++i) dweight->data[i] += dw[i];
        }
    }
    if (dbias && layer.has_bias) {
        if (dbias->shape != layer.bias.shape)
            throw ShapeError("conv2d backward: bias gradient shape mismatch");
        for (int b = 0; b < B; ++b)
            for (int f = 0; f < F; ++f) dbias->data[f] += bslab[static_cast<std::size_t>(b) * F + f];
    }
    return dx;
}

Tensor batchnorm2d_forward(const Tensor& input, Layer& layer, bool train, BatchNormCache* cache) {
    require_4d(input, "batchnorm2d");
    layer_output_shape(layer, input.shape);
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const std::size_t image = static_cast<std::size_t>(C) * plane;
    Tensor out(input.shape);

    if (train) {
        if (B < 2)
            throw ValueError("batchnorm2d '" + layer.name +
                             "': training statistics need a batch of at least 2");
        const real n = static_cast<real>(B) * H * W;
        if (cache) {
            cache->xhat = Tensor(input.shape);
            cache->inv_std = Tensor({C});
        }
        parallel_for(C, [&](int c) {
            real sum = 0.0, sumsq = 0.0;
            for (int b = 0; b < B; ++b) {
                const real* src = input.data.data() + b * image + c * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum += src[i];
                    sumsq += src[i] * src[i];
                }
            }
            const real mean = sum / n;
            const real var = sumsq / n - mean * mean;  // biased estimate
            const real inv_std = 1.0 / std::sqrt(var + layer.epsilon);
            const real g = layer.gamma.data[c], bt = layer.beta.data[c];
            for (int b = 0; b < B; ++b) {
                const real* src = input.data.data() + b * image + c * plane;
                real* dst = out.data.data() + b * image + c * plane;
                real* xh = cache ? cache->xhat.data.data() + b * image + c * plane : nullptr;
                for (std::size_t i = 0; i < plane; ++i) {
                    const real x = (src[i] - mean) * inv_std;
                    if (xh) xh[i] = x;
                    dst[i] = g * x + bt;
                }
            }
            if (cache) cache->inv_std.data[c] = inv_std;
            layer.running_mean.data[c] = layer.momentum * layer.running_mean.data[c] +
                                         (1.0 - layer.momentum) * mean;
            layer.running_var.data[c] =
                layer.momentum * layer.running_var.data[c] + (1.0 - layer.momentum) * var;
        });
    } else {
        parallel_for(C, [&](int c) {
            const real inv_std = 1.0 / std::sqrt(layer.running_var.data[c] + layer.epsilon);
            const real g = layer.gamma.data[c], bt = layer.beta.data[c];
            const real mean = layer.running_mean.data[c];
            for (int b = 0; b < B; ++b) {
                const real* src = input.data.data() + b * image + c * plane;
                real* dst = out.data.data() + b * image + c * plane;
                for (std::size_t i = 0; i < plane; ++i) dst[i] = g * (src[i] - mean) * inv_std + bt;
            }
        });
    }
    return out;
}

Tensor batchnorm2d_backward(const Tensor& input, const Layer& layer, const BatchNormCache& cache,
                            bool train, const Tensor& dy, Tensor* dgamma, Tensor* dbeta) {
    require_4d(input, "batchnorm2d backward");
    if (dy.shape != input.shape)
        throw ShapeError("batchnorm2d backward: upstream gradient shape mismatch");
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const std::size_t image = static_cast<std::size_t>(C) * plane;
    Tensor dx(input.shape);

    if (train) {
        if (cache.xhat.shape != input.shape || cache.inv_std.numel() != C)
            throw StateError("batchnorm2d backward: missing or stale forward cache");
        const real n = static_cast<real>(B) * H * W;
        parallel_for(C, [&](int c) {
            real sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int b = 0; b < B; ++b) {
                const real* g = dy.data.data() + b * image + c * plane;
                const real* xh = cache.xhat.data.data() + b * image + c * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_dy += g[i];
                    sum_dy_xhat += g[i] * xh[i];
                }
            }
            const real gamma = layer.gamma.data[c];
            const real inv_std = cache.inv_std.data[c];
            const real scale = gamma * inv_std / n;
            for (int b = 0; b < B; ++b) {
                const real* g = dy.data.data() + b * image + c * plane;
                const real* xh = cache.xhat.data.data() + b * image + c * plane;
                real* d = dx.data.data() + b * image + c * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    d[i] = scale * (n * g[i] - sum_dy - xh[i] * sum_dy_xhat);
            }
            if (dgamma) dgamma->data[c] += sum_dy_xhat;
            if (dbeta) dbeta->data[c] += sum_dy;
        });
    } else {
        parallel_for(C, [&](int c) {
            const real inv_std = 1.0 / std::sqrt(layer.running_var.data[c] + layer.epsilon);
            const real mean = layer.running_mean.data[c];
            const real scale = layer.gamma.data[c] * inv_std;
            real sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int b = 0; b < B; ++b) {
                const real* g = dy.data.data() + b * image + c * plane;
                const real* src = input.data.data() + b * image + c * plane;
                real* d = dx.data.data() + b * image + c * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    d[i] = scale * g[i];
                    sum_dy += g[i];
                    sum_dy_xhat += g[i] * (src[i] - mean) * inv_std;
                }
            }
            if (dgamma) dgamma->data[c] += sum_dy_xhat;
            if (dbeta) dbeta->data[c] += sum_dy;
        });
    }
    return dx;
}

Tensor leaky_relu_forward(const Tensor& input, real alpha) {
    Tensor out(input.shape);
    const std::size_t n = input.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        const real x = input.data[i];
        out.data[i] = x > 0.0 ? x : alpha * x;
    }
    return out;
}

Tensor leaky_relu_backward(const Tensor& input, real alpha, const Tensor& dy) {
    if (dy.shape != input.shape)
        throw ShapeError("leaky_relu backward: upstream gradient shape mismatch");
    Tensor dx(input.shape);
    const std::size_t n = input.data.size();
    for (std::size_t i = 0; i < n; ++i)
        dx.data[i] = dy.data[i] * (input.data[i] > 0.0 ? 1.0 : alpha);
    return dx;
}

Tensor avg_pool2d_forward(const Tensor& input, int pool) {
    require_4d(input, "avg_pool2d");
    Layer probe = Layer::avg_pool2d("pool", pool);
    const auto out_shape = layer_output_shape(probe, input.shape);
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int OH = out_shape[2], OW = out_shape[3];
    const real inv = 1.0 / (static_cast<real>(pool) * pool);
    Tensor out(out_shape);
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const real* src = input.data.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
            real* dst = out.data.data() + (static_cast<std::size_t>(b) * C + c) * OH * OW;
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    real s = 0.0;
                    for (int py = 0; py < pool; ++py) {
                        const real* row = src + static_cast<std::size_t>(oy * pool + py) * W +
                                          static_cast<std::size_t>(ox) * pool;
                        for (int px = 0; px < pool; ++px) s += row[px];
                    }
                    dst[static_cast<std::size_t>(oy) * OW + ox] = s * inv;
                }
        }
    return out;
}

Tensor avg_pool2d_backward(const std::vector<int>& in_shape, int pool, const Tensor& dy) {
    if (in_shape.size() != 4) throw ShapeError("avg_pool2d backward: expected a 4D input shape");
    Layer probe = Layer::avg_pool2d("pool", pool);
    if (dy.shape != layer_output_shape(probe, in_shape))
        throw ShapeError("avg_pool2d backward: upstream gradient shape mismatch");
    const int B = in_shape[0], C = in_shape[1], H = in_shape[2], W = in_shape[3];
    const int OH = dy.dim(2), OW = dy.dim(3);
    const real inv = 1.0 / (static_cast<real>(pool) * pool);
    Tensor dx(in_shape);
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const real* g = dy.data.data() + (static_cast<std::size_t>(b) * C + c) * OH * OW;
            real* dst = dx.data.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    const real v = g[static_cast<std::size_t>(oy) * OW + ox] * inv;
                    for (int py = 0; py < pool; ++py) {
                        real* row = dst + static_cast<std::size_t>(oy * pool + py) * W +
                                    static_cast<std::size_t>(ox) * pool;
                        for (int px = 0; px < pool; ++px) row[px] += v;
                    }
                }
        }
    return dx;
}

Tensor global_avg_pool_forward(const Tensor& input) {
    require_4d(input, "global_avg_pool");
    const int B = input.dim(0), C = input.dim(1);
    const std::size_t plane = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
    const real inv = 1.0 / static_cast<real>(plane);
    Tensor out({B, C});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const real* src = input.data.data() + (static_cast<std::size_t>(b) * C + c) * plane;
            real s = 0.0;
            for (std::size_t i = 0; i < plane; ++i) s += src[i];
            out.data[static_cast<std::size_t>(b) * C + c] = s * inv;
        }
    return out;
}

Tensor global_avg_pool_backward(const std::vector<int>& in_shape, const Tensor& dy) {
    if (in_shape.size() != 4) throw ShapeError("global_avg_pool backward: expected a 4D input shape");
    if (dy.ndim() != 2 || dy.dim(0) != in_shape[0] || dy.dim(1) != in_shape[1])
        throw ShapeError("global_avg_pool backward: upstream gradient shape mismatch");
    const int B = in_shape[0], C = in_shape[1];
    const std::size_t plane = static_cast<std::size_t>(in_shape[2]) * in_shape[3];
    const real inv = 1.0 / static_cast<real>(plane);
    Tensor dx(in_shape);
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const real v = dy.data[static_cast<std::size_t>(b) * C + c] * inv;
            real* dst = dx.data.data() + (static_cast<std::size_t>(b) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = v;
        }
    return dx;
}

Tensor dense_forward(const Tensor& input, const Layer& layer) {
    if (input.ndim() < 2) throw ShapeError("dense: expected at least a 2D [B,N] tensor");
    const auto out_shape = layer_output_shape(layer, input.shape);
    const int B = input.dim(0);
    const int N = layer.weight.dim(1), M = layer.weight.dim(0);
    Tensor out(out_shape);
    for (int b = 0; b < B; ++b) {
        const real* x = input.data.data() + static_cast<std::size_t>(b) * N;
        real* y = out.data.data() + static_cast<std::size_t>(b) * M;
        for (int m = 0; m < M; ++m) {
            const real* w = layer.weight.data.data() + static_cast<std::size_t>(m) * N;
            real s = layer.has_bias ? layer.bias.data[m] : 0.0;
            for (int n = 0; n < N; ++n) s += w[n] * x[n];
            y[m] = s;
        }
    }
    return out;
}

Tensor dense_backward(const Tensor& input, const Layer& layer, const Tensor& dy, Tensor* dweight,
                      Tensor* dbias) {
    const auto out_shape = layer_output_shape(layer, input.shape);
    if (dy.shape != out_shape) throw ShapeError("dense backward: upstream gradient shape mismatch");
    const int B = input.dim(0);
    const int N = layer.weight.dim(1), M = layer.weight.dim(0);
    if (dweight && dweight->shape != layer.weight.shape)
        throw ShapeError("dense backward: weight gradient shape mismatch");
    if (dbias && layer.has_bias && dbias->shape != layer.bias.shape)
        throw ShapeError("dense backward: bias gradient shape mismatch");
    Tensor dx(input.shape);
    for (int b = 0; b < B; ++b) {
        const real* x = input.data.data() + static_cast<std::size_t>(b) * N;
        const real* g = dy.data.data() + static_cast<std::size_t>(b) * M;
        real* d = dx.data.data() + static_cast<std::size_t>(b) * N;
        for (int m = 0; m < M; ++m) {
            const real gm = g[m];
            const real* w = layer.weight.data.data() + static_cast<std::size_t>(m) * N;
            for (int n = 0; n < N; ++n) d[n] += gm * w[n];
            if (dweight) {
                real* dw = dweight->data.data() + static_cast<std::size_t>(m) * N;
                for (int n = 0; n < N; ++n) dw[n] += gm * x[n];
            }
            if (dbias && layer.has_bias) dbias->data[m] += gm;
        }
    }
    return dx;
}

}  // namespace ganattr
