#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganattr/layers.hpp"
#include "ganattr/rng.hpp"
#include "ganattr/tensor.hpp"

namespace ganattr {

enum class Mode { Train, Eval };
enum class Representation { Pixel, Dct };
enum class HeadKind { GapCam, FlattenDense };
enum class DecisionKind { Sigmoid, Softmax };

struct InputSpec {
    int channels = 3;
    int resolution = 128;
    Representation representation = Representation::Pixel;
};

// Named view into a parameter tensor owned by a layer.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
};

struct ModelGraph {
    std::string name = "model";
    InputSpec input;
    std::vector<Layer> layers;
    // Number of conv layers in the shared trunk; secondaries consume the
    // activation that leaves this conv's activation block. 0 means no branch
    // point is defined.
    int branch_conv_index = 0;
    HeadKind head = HeadKind::GapCam;
    DecisionKind decision = DecisionKind::Sigmoid;
    int classes = 1;
    bool frozen = false;

    // Trainable tensors in layer order; gradient and optimizer state vectors
    // are aligned with this ordering.
    std::vector<ParamRef> trainable_params();
    // Trainable tensors plus batchnorm running statistics, the full state
    // that serialization and digests must cover.
    std::vector<ParamRef> all_state();
    std::int64_t parameter_count();
    // Index one past the layer that closes the branch conv's activation
    // block, i.e. the trunk is layers [0, branch_cut_layer()).
    int branch_cut_layer() const;
    std::vector<int> output_shape(const std::vector<int>& in) const;
};

// Per-layer activations retained for backprop and feature inspection.
struct ForwardTrace {
    Tensor input;
    std::vector<Tensor> outputs;       // outputs[i] leaves layers[i]
    std::vector<BatchNormCache> bn;    // populated for train-mode batchnorms
    Mode mode = Mode::Eval;
    int first_layer = 0;               // layer index the trace starts at
    bool valid = false;
};

// Runs layers [first, last); `input` is the activation entering `first`.
// Train mode updates batchnorm running statistics and refuses frozen graphs.
Tensor graph_forward_range(ModelGraph& g, const Tensor& input, int first, int last, Mode mode,
                           ForwardTrace* trace = nullptr);
Tensor graph_forward(ModelGraph& g, const Tensor& input, Mode mode, ForwardTrace* trace = nullptr);

struct Gradients {
    std::vector<Tensor> params;  // aligned with trainable_params() of the traced range
    Tensor input_grad;
};

// Backpropagates dlogits through the layers covered by the trace. Parameter
// gradients are summed over the batch; params covers only layers at indices
// >= trace.first_layer (all of them for a full-graph trace).
Gradients graph_backward(ModelGraph& g, const ForwardTrace& trace, const Tensor& dlogits);

// Conv and dense weights drawn from N(0, stddev^2); biases and batchnorm
// shifts start at zero, batchnorm scales at one.
void init_weights(ModelGraph& g, real stddev, Rng& rng);

// Hex digest over every state tensor (name, shape, payload), the identity
// used by freezing and reproducibility checks.
std::string weight_digest(ModelGraph& g);

}  // namespace ganattr
