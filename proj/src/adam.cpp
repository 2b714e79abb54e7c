#include "ganattr/adam.hpp"

#include <cmath>

#include "ganattr/errors.hpp"

namespace ganattr {

void adam_step(std::vector<ParamRef>& params, const std::vector<Tensor>& grads, AdamState& state) {
    if (params.size() != grads.size())
        throw ShapeError("adam_step: parameter and gradient lists differ in length");
    if (state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const auto& p : params) {
            state.m.push_back(Tensor(p.value->shape));
            state.v.push_back(Tensor(p.value->shape));
        }
    } else if (state.m.size() != params.size()) {
        throw StateError("adam_step: optimizer state was built for a different parameter list");
    }

    state.t += 1;
    const real bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<real>(state.t));
    const real bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<real>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i].value;
        const Tensor& g = grads[i];
        if (g.shape != p.shape)
            throw ShapeError("adam_step: gradient shape mismatch for '" + params[i].name + "'");
        if (state.m[i].shape != p.shape)
            throw StateError("adam_step: stale optimizer state for '" + params[i].name + "'");
        if (!g.finite())
            throw ComputeError("adam_step: non-finite gradient for '" + params[i].name + "'");
        real* mp = state.m[i].data.data();
        real* vp = state.v[i].data.data();
        real* pp = p.data.data();
        const real* gp = g.data.data();
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            mp[j] = state.cfg.beta1 * mp[j] + (1.0 - state.cfg.beta1) * gp[j];
            vp[j] = state.cfg.beta2 * vp[j] + (1.0 - state.cfg.beta2) * gp[j] * gp[j];
            const real mhat = mp[j] / bc1;
            const real vhat = vp[j] / bc2;
            pp[j] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.epsilon);
        }
    }
}

}  // namespace ganattr
