#pragma once

#include <string>
#include <vector>

#include "ganattr/tensor.hpp"

namespace ganattr {

enum class LayerKind { Conv2d, BatchNorm2d, LeakyRelu, AvgPool2d, GlobalAvgPool, Dense };

// One layer of the fixed operator set, flat-struct style: only the fields
// relevant to `kind` are used.
struct Layer {
    LayerKind kind = LayerKind::LeakyRelu;
    std::string name;

    // conv2d: weight [F,C,3,3]; dense: weight [M,N]
    Tensor weight;
    Tensor bias;
    bool has_bias = false;
    int stride = 1;  // conv2d, 1 or 2; 3x3 kernels with zero padding 1 throughout

    // batchnorm2d; momentum is the retained fraction of the old running stat
    Tensor gamma, beta, running_mean, running_var;
    real momentum = 0.9;
    real epsilon = 1e-5;

    real alpha = 0.2;   // leaky_relu slope
    int pool_size = 2;  // avg_pool2d window

    static Layer conv2d(std::string name, int in_ch, int out_ch, int stride, bool with_bias);
    static Layer batchnorm2d(std::string name, int channels);
    static Layer leaky_relu(std::string name, real alpha = 0.2);
    static Layer avg_pool2d(std::string name, int pool);
    static Layer global_avg_pool(std::string name);
    // Dense flattens 4D activations implicitly ([B,C,H,W] -> [B,C*H*W]).
    static Layer dense(std::string name, int in_dim, int out_dim);
};

std::vector<int> layer_output_shape(const Layer& layer, const std::vector<int>& in);

// Per-kind forward kernels, exposed so the unit oracles can drive them
// directly; graph execution dispatches through the same entry points.
Tensor conv2d_forward(const Tensor& input, const Layer& layer);

struct BatchNormCache {
    Tensor xhat;     // normalized activations before scale/shift
    Tensor inv_std;  // per-channel 1/sqrt(var+eps)
};
Tensor batchnorm2d_forward(const Tensor& input, Layer& layer, bool train, BatchNormCache* cache);

Tensor leaky_relu_forward(const Tensor& input, real alpha);
Tensor avg_pool2d_forward(const Tensor& input, int pool);
Tensor global_avg_pool_forward(const Tensor& input);
Tensor dense_forward(const Tensor& input, const Layer& layer);

// Backward kernels: upstream gradient in, input gradient out; parameter
// gradients are accumulated into the provided tensors (summed over the batch).
Tensor conv2d_backward(const Tensor& input, const Layer& layer, const Tensor& dy, Tensor* dweight,
                       Tensor* dbias);
Tensor batchnorm2d_backward(const Tensor& input, const Layer& layer, const BatchNormCache& cache,
                            bool train, const Tensor& dy, Tensor* dgamma, Tensor* dbeta);
Tensor leaky_relu_backward(const Tensor& input, real alpha, const Tensor& dy);
Tensor avg_pool2d_backward(const std::vector<int>& in_shape, int pool, const Tensor& dy);
Tensor global_avg_pool_backward(const std::vector<int>& in_shape, const Tensor& dy);
Tensor dense_backward(const Tensor& input, const Layer& layer, const Tensor& dy, Tensor* dweight,
                      Tensor* dbias);

}  // namespace ganattr
