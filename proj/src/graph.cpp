#include "ganattr/graph.hpp"

#include <cstdint>

#include "ganattr/digest.hpp"
#include "ganattr/errors.hpp"

namespace ganattr {

namespace {

void collect(std::vector<ParamRef>& out, Layer& l, bool with_running) {
    switch (l.kind) {
        case LayerKind::Conv2d:
            out.push_back({l.name + ".w", &l.weight});
            if (l.has_bias) out.push_back({l.name + ".b", &l.bias});
            break;
        case LayerKind::BatchNorm2d:
            out.push_back({l.name + ".gamma", &l.gamma});
            out.push_back({l.name + ".beta", &l.beta});
            if (with_running) {
                out.push_back({l.name + ".rmean", &l.running_mean});
                out.push_back({l.name + ".rvar", &l.running_var});
            }
            break;
        case LayerKind::Dense:
            out.push_back({l.name + ".w", &l.weight});
            out.push_back({l.name + ".b", &l.bias});
            break;
        default:
            break;
    }
}

}  // namespace

std::vector<ParamRef> ModelGraph::trainable_params() {
    std::vector<ParamRef> out;
    for (auto& l : layers) collect(out, l, false);
    return out;
}

std::vector<ParamRef> ModelGraph::all_state() {
    std::vector<ParamRef> out;
    for (auto& l : layers) collect(out, l, true);
    return out;
}

std::int64_t ModelGraph::parameter_count() {
    std::int64_t n = 0;
    for (const auto& p : trainable_params()) n += p.value->numel();
    return n;
}

int ModelGraph::branch_cut_layer() const {
    if (branch_conv_index < 1)
        throw StateError("model '" + name + "' has no branch point defined");
    int seen = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].kind != LayerKind::Conv2d) continue;
        if (++seen != branch_conv_index) continue;
        // Take the whole activation block: batchnorm and nonlinearity that
        // immediately follow the conv belong to the shared trunk.
        std::size_t j = i + 1;
        while (j < layers.size() && (layers[j].kind == LayerKind::BatchNorm2d ||
                                     layers[j].kind == LayerKind::LeakyRelu))
            ++j;
        return static_cast<int>(j);
    }
    throw StateError("model '" + name + "': branch conv " + std::to_string(branch_conv_index) +
                     " exceeds the " + std::to_string(seen) + " conv layers present");
}

std::vector<int> ModelGraph::output_shape(const std::vector<int>& in) const {
    std::vector<int> cur = in;
    for (const auto& l : layers) cur = layer_output_shape(l, cur);
    return cur;
}

Tensor graph_forward_range(ModelGraph& g, const Tensor& input, int first, int last, Mode mode,
                           ForwardTrace* trace) {
    if (first < 0 || last > static_cast<int>(g.layers.size()) || first > last)
        throw ValueError("graph_forward_range: layer range [" + std::to_string(first) + "," +
                         std::to_string(last) + ") out of bounds");
    if (mode == Mode::Train && g.frozen)
        throw StateError("model '" + g.name + "' is frozen; train-mode forward would update it");
    if (!input.finite()) throw ComputeError("graph_forward: non-finite values in input batch");

    if (trace) {
        trace->input = input;
        trace->outputs.clear();
        trace->bn.clear();
        trace->outputs.reserve(last - first);
        trace->bn.resize(last - first);
        trace->mode = mode;
        trace->first_layer = first;
        trace->valid = false;
    }

    Tensor cur = input;
    for (int i = first; i < last; ++i) {
        Layer& l = g.layers[i];
        switch (l.kind) {
            case LayerKind::Conv2d:
                cur = conv2d_forward(cur, l);
                break;
            case LayerKind::BatchNorm2d:
                cur = batchnorm2d_forward(cur, l, mode == Mode::Train,
                                          trace ? &trace->bn[i - first] : nullptr);
                break;
            case LayerKind::LeakyRelu:
                cur = leaky_relu_forward(cur, l.alpha);
                break;
            case LayerKind::AvgPool2d:
                cur = avg_pool2d_forward(cur, l.pool_size);
                break;
            case LayerKind::GlobalAvgPool:
                cur = global_avg_pool_forward(cur);
                break;
            case LayerKind::Dense:
                cur = dense_forward(cur, l);
                break;
        }
        if (trace) trace->outputs.push_back(cur);
    }
    if (!cur.finite())
        throw ComputeError("graph_forward: non-finite activations in model '" + g.name + "'");
    if (trace) trace->valid = true;
    return cur;
}

Tensor graph_forward(ModelGraph& g, const Tensor& input, Mode mode, ForwardTrace* trace) {
    return graph_forward_range(g, input, 0, static_cast<int>(g.layers.size()), mode, trace);
}

Gradients graph_backward(ModelGraph& g, const ForwardTrace& trace, const Tensor& dlogits) {
    if (!trace.valid) throw StateError("graph_backward: forward trace is missing or incomplete");
    const int first = trace.first_layer;
    const int last = first + static_cast<int>(trace.outputs.size());
    if (last > static_cast<int>(g.layers.size()))
        throw StateError("graph_backward: trace does not match the model's layer list");

    Gradients grads;
    // Aligned zero tensors for the trainable parameters of the traced range,
    // plus each layer's slot offset into that list.
    std::vector<int> offset(last - first, -1);
    for (int i = first; i < last; ++i) {
        std::vector<ParamRef> refs;
        collect(refs, g.layers[i], false);
        if (refs.empty()) continue;
        offset[i - first] = static_cast<int>(grads.params.size());
        for (auto& r : refs) grads.params.push_back(Tensor(r.value->shape));
    }

    Tensor dy = dlogits;
    for (int i = last - 1; i >= first; --i) {
        Layer& l = g.layers[i];
        const Tensor& in = (i == first) ? trace.input : trace.outputs[i - first - 1];
        const int slot = offset[i - first];
        switch (l.kind) {
            case LayerKind::Conv2d:
                dy = conv2d_backward(in, l, dy, &grads.params[slot],
                                     l.has_bias ? &grads.params[slot + 1] : nullptr);
                break;
            case LayerKind::BatchNorm2d:
                dy = batchnorm2d_backward(in, l, trace.bn[i - first], trace.mode == Mode::Train, dy,
                                          &grads.params[slot], &grads.params[slot + 1]);
                break;
            case LayerKind::LeakyRelu:
                dy = leaky_relu_backward(in, l.alpha, dy);
                break;
            case LayerKind::AvgPool2d:
                dy = avg_pool2d_backward(in.shape, l.pool_size, dy);
                break;
            case LayerKind::GlobalAvgPool:
                dy = global_avg_pool_backward(in.shape, dy);
                break;
            case LayerKind::Dense:
                dy = dense_backward(in, l, dy, &grads.params[slot], &grads.params[slot + 1]);
                break;
        }
    }
    for (const auto& p : grads.params)
        if (!p.finite()) throw ComputeError("graph_backward: non-finite parameter gradients");
    if (!dy.finite()) throw ComputeError("graph_backward: non-finite input gradients");
    grads.input_grad = std::move(dy);
    return grads;
}

void init_weights(ModelGraph& g, real stddev, Rng& rng) {
    if (stddev <= 0.0) throw ValueError("init_weights: stddev must be positive");
    for (auto& l : g.layers) {
        switch (l.kind) {
            case LayerKind::Conv2d:
            case LayerKind::Dense:
                for (auto& w : l.weight.data) w = rng.normal(0.0, stddev);
                if (l.has_bias) l.bias.fill(0.0);
                break;
            case LayerKind::BatchNorm2d:
                l.gamma.fill(1.0);
                l.beta.fill(0.0);
                l.running_mean.fill(0.0);
                l.running_var.fill(1.0);
                break;
            default:
                break;
        }
    }
}

std::string weight_digest(ModelGraph& g) {
    Sha256 h;
    for (const auto& p : g.all_state()) {
        h.update(p.name.data(), p.name.size());
        const std::int32_t nd = static_cast<std::int32_t>(p.value->ndim());
        h.update(&nd, sizeof nd);
        for (int d : p.value->shape) {
            const std::int32_t v = d;
            h.update(&v, sizeof v);
        }
        h.update(p.value->data.data(), p.value->data.size() * sizeof(real));
    }
    return to_hex(h.finish());
}

}  // namespace ganattr
