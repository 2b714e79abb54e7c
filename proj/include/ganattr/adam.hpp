#pragma once

#include <cstdint>
#include <vector>

#include "ganattr/graph.hpp"
#include "ganattr/tensor.hpp"

namespace ganattr {

struct AdamConfig {
    real lr = 1e-3;
    real beta1 = 0.9;
    real beta2 = 0.999;
    real epsilon = 1e-8;
};

// Moment estimates aligned with a fixed parameter list; sized lazily on the
// first step and shape-checked on every step after that.
struct AdamState {
    AdamConfig cfg;
    std::int64_t t = 0;
    std::vector<Tensor> m, v;
};

// One bias-corrected update, applied in place to the referenced parameters.
void adam_step(std::vector<ParamRef>& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace ganattr
