#include "ganattr/model_zoo.hpp"

#include <array>

#include "ganattr/errors.hpp"

namespace ganattr {

namespace {

constexpr std::array<int, 8> kChannels{16, 16, 32, 32, 64, 64, 128, 128};
constexpr std::array<int, 8> kStrides{1, 2, 1, 2, 1, 2, 1, 2};

// Conv block i (1-based): conv, batchnorm on all but the first, activation.
// Only the first conv and the dense heads carry biases; elsewhere batchnorm
// subsumes them.
void append_conv_block(std::vector<Layer>& layers, int index, int in_ch, int out_ch, int stride) {
    const std::string tag = std::to_string(index);
    const bool first = index == 1;
    layers.push_back(Layer::conv2d("conv" + tag, in_ch, out_ch, stride, first));
    if (!first) layers.push_back(Layer::batchnorm2d("bn" + tag, out_ch));
    layers.push_back(Layer::leaky_relu("act" + tag, 0.2));
}

int spatial_after(int size, int n_stride2) { return size >> n_stride2; }

}  // namespace

ModelGraph build_primary(Representation representation, int input_size) {
    if (input_size != 64 && input_size != 128 && input_size != 256)
        throw ValueError("build_primary: input size " + std::to_string(input_size) +
                         " not one of 64/128/256");
    ModelGraph g;
    g.name = representation == Representation::Pixel ? "primary-pixel" : "primary-dct";
    g.input.channels = representation == Representation::Pixel ? 3 : 1;
    g.input.resolution = input_size;
    g.input.representation = representation;
    g.branch_conv_index = 4;
    g.decision = DecisionKind::Sigmoid;
    g.classes = 1;

    int in_ch = g.input.channels;
    for (int i = 0; i < 8; ++i) {
        append_conv_block(g.layers, i + 1, in_ch, kChannels[static_cast<std::size_t>(i)],
                          kStrides[static_cast<std::size_t>(i)]);
        in_ch = kChannels[static_cast<std::size_t>(i)];
    }
    if (representation == Representation::Pixel) {
        g.head = HeadKind::GapCam;
        g.layers.push_back(Layer::global_avg_pool("gap"));
        g.layers.push_back(Layer::dense("fc", 128, 1));
    } else {
        g.head = HeadKind::FlattenDense;
        const int side = spatial_after(input_size, 4);
        g.layers.push_back(Layer::dense("fc", 128 * side * side, 1));
    }
    return g;
}

ModelGraph build_secondary(ModelGraph& primary, const std::string& name) {
    if (name.empty()) throw ValueError("build_secondary: secondary name must be nonempty");
    if (primary.branch_conv_index != 4)
        throw StateError("build_secondary: primary has no conv-4 branch point");

    // Feature-map shape entering the secondary.
    std::vector<int> shape{1, primary.input.channels, primary.input.resolution,
                           primary.input.resolution};
    const int cut = primary.branch_cut_layer();
    for (int i = 0; i < cut; ++i) shape = layer_output_shape(primary.layers[i], shape);

    ModelGraph g;
    g.name = name;
    g.input.channels = shape[1];
    g.input.resolution = shape[2];
    g.input.representation = primary.input.representation;
    g.head = primary.head;
    g.decision = DecisionKind::Sigmoid;
    g.classes = 1;

    int in_ch = shape[1];
    for (int i = 4; i < 8; ++i) {
        // Blocks keep their trunk numbering so weight names line up with the
        // primary layers they mirror.
        append_conv_block(g.layers, i + 1, in_ch, kChannels[static_cast<std::size_t>(i)],
                          kStrides[static_cast<std::size_t>(i)]);
        in_ch = kChannels[static_cast<std::size_t>(i)];
    }
    if (g.head == HeadKind::GapCam) {
        g.layers.push_back(Layer::global_avg_pool("gap"));
        g.layers.push_back(Layer::dense("fc", 128, 1));
    } else {
        const int side = spatial_after(shape[2], 2);
        g.layers.push_back(Layer::dense("fc", 128 * side * side, 1));
    }
    if (g.output_shape(shape) != std::vector<int>{1, 1})
        throw StateError("build_secondary: branch shapes do not compose");
    return g;
}

ModelGraph build_baseline(const std::string& name, DecisionKind decision, int classes,
                          Representation representation, int input_size) {
    if (classes < 1) throw ValueError("build_baseline: class count must be positive");
    if (decision == DecisionKind::Sigmoid && classes != 1)
        throw ValueError("build_baseline: sigmoid decision implies a single output");
    const int in_ch = representation == Representation::Pixel ? 3 : 1;

    ModelGraph g;
    g.name = name;
    g.input.channels = in_ch;
    g.input.resolution = input_size;
    g.input.representation = representation;
    g.head = HeadKind::FlattenDense;
    g.decision = decision;
    g.classes = decision == DecisionKind::Sigmoid ? 1 : classes;

    if (name == "gandct-conv") {
        // Four conv blocks, each halved by average pooling, then a small
        // hidden dense layer. The hidden width 72 puts the parameter count
        // just above the shared-trunk detector at 128 input.
        const std::array<int, 4> widths{8, 16, 32, 64};
        int ch = in_ch;
        int side = input_size;
        for (int i = 0; i < 4; ++i) {
            const std::string tag = std::to_string(i + 1);
            g.layers.push_back(Layer::conv2d("conv" + tag, ch, widths[static_cast<std::size_t>(i)], 1, true));
            g.layers.push_back(Layer::leaky_relu("act" + tag, 0.2));
            g.layers.push_back(Layer::avg_pool2d("pool" + tag, 2));
            ch = widths[static_cast<std::size_t>(i)];
            side /= 2;
        }
        g.layers.push_back(Layer::dense("fc1", ch * side * side, 72));
        g.layers.push_back(Layer::leaky_relu("actfc", 0.2));
        g.layers.push_back(Layer::dense("fc2", 72, g.classes));
        return g;
    }
    if (name == "ganfp-postpool") {
        // Input is pooled down 4x, then six unstrided conv layers at quarter
        // width of the reference model, and a narrow hidden dense layer(5).
        const std::array<int, 6> widths{32, 32, 64, 64, 128, 128};
        g.layers.push_back(Layer::avg_pool2d("pre1", 2));
        g.layers.push_back(Layer::avg_pool2d("pre2", 2));
        int ch = in_ch;
        const int side = input_size / 4;
        for (int i = 0; i < 6; ++i) {
            const std::string tag = std::to_string(i + 1);
            g.layers.push_back(Layer::conv2d("conv" + tag, ch, widths[static_cast<std::size_t>(i)], 1, true));
            g.layers.push_back(Layer::leaky_relu("act" + tag, 0.2));
            ch = widths[static_cast<std::size_t>(i)];
        }
        g.layers.push_back(Layer::dense("fc1", ch * side * side, 5));
        g.layers.push_back(Layer::leaky_relu("actfc", 0.2));
        g.layers.push_back(Layer::dense("fc2", 5, g.classes));
        return g;
    }
    throw ValueError("build_baseline: unknown baseline '" + name +
                     "' (expected gandct-conv or ganfp-postpool)");
}

ModelGraph* ModelBundle::find_secondary(const std::string& name) {
    for (auto& s : secondaries)
        if (s.name == name) return &s;
    return nullptr;
}

const ModelGraph* ModelBundle::find_secondary(const std::string& name) const {
    for (const auto& s : secondaries)
        if (s.name == name) return &s;
    return nullptr;
}

void ModelBundle::add_secondary(ModelGraph graph) {
    if (find_secondary(graph.name))
        throw ValueError("bundle already holds a secondary named '" + graph.name + "'");
    secondaries.push_back(std::move(graph));
}

}  // namespace ganattr
