#include "ganattr/localization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "ganattr/errors.hpp"
#include "ganattr/losses.hpp"

namespace ganattr {

namespace {

Tensor as_single_batch(const ModelGraph& model, const Tensor& image) {
    Tensor x;
    if (image.ndim() == 3) {
        x = Tensor({1, image.dim(0), image.dim(1), image.dim(2)});
        x.data = image.data;
    } else if (image.ndim() == 4 && image.dim(0) == 1) {
        x = image;
    } else {
        throw ShapeError("saliency probes take one image, [C,H,W] or [1,C,H,W]");
    }
    if (x.dim(1) != model.input.channels)
        throw ValueError("image has " + std::to_string(x.dim(1)) + " channels, model '" +
                         model.name + "' expects " + std::to_string(model.input.channels));
    return x;
}

int head_dense_index(const ModelGraph& model) {
    for (int i = static_cast<int>(model.layers.size()) - 1; i >= 0; --i)
        if (model.layers[i].kind == LayerKind::Dense) return i;
    throw StateError("model '" + model.name + "' has no dense head to probe");
}

// One past the activation that closes the last conv block; the tensor
// entering the head, whatever the head is.
int last_conv_block_end(const ModelGraph& model) {
    int last_conv = -1;
    for (int i = 0; i < static_cast<int>(model.layers.size()); ++i)
        if (model.layers[i].kind == LayerKind::Conv2d) last_conv = i;
    if (last_conv < 0)
        throw StateError("model '" + model.name + "' has no conv layer to localize on");
    int j = last_conv + 1;
    while (j < static_cast<int>(model.layers.size()) &&
           (model.layers[j].kind == LayerKind::BatchNorm2d ||
            model.layers[j].kind == LayerKind::LeakyRelu))
        ++j;
    return j;
}

Tensor minmax_normalized(const Tensor& raw) {
    Tensor out = raw;
    real lo = raw.data[0], hi = raw.data[0];
    for (real v : raw.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) {
        std::fill(out.data.begin(), out.data.end(), 0.5);
        return out;
    }
    const real span = hi - lo;
    for (real& v : out.data) v = (v - lo) / span;
    return out;
}

std::vector<real> output_probabilities(const ModelGraph& model, const Tensor& logits) {
    const int K = logits.dim(1);
    std::vector<real> probs(static_cast<std::size_t>(K));
    if (model.decision == DecisionKind::Sigmoid) {
        for (int k = 0; k < K; ++k) probs[static_cast<std::size_t>(k)] = sigmoid(logits.data[k]);
    } else {
        real peak = logits.data[0];
        for (int k = 1; k < K; ++k) peak = std::max(peak, logits.data[k]);
        real denom = 0.0;
        for (int k = 0; k < K; ++k) {
            probs[static_cast<std::size_t>(k)] = std::exp(logits.data[k] - peak);
            denom += probs[static_cast<std::size_t>(k)];
        }
        for (real& p : probs) p /= denom;
    }
    return probs;
}

void check_output_index(const Tensor& logits, int output) {
    if (output < 0 || output >= logits.dim(1))
        throw ValueError("probed output " + std::to_string(output) + " out of range (model has " +
                         std::to_string(logits.dim(1)) + " outputs)");
}

const std::array<std::array<std::uint8_t, 3>, 256>& jet_table() {
    // Piecewise-linear Jet ramps: dark blue at 0, green mid-scale, dark red
    // at 1, each channel a clipped tent function.
    static const auto table = [] {
        std::array<std::array<std::uint8_t, 3>, 256> t{};
        for (int i = 0; i < 256; ++i) {
            const real v = static_cast<real>(i) / 255.0;
            const real r = std::clamp(std::min(4.0 * v - 1.5, -4.0 * v + 4.5), 0.0, 1.0);
            const real g = std::clamp(std::min(4.0 * v - 0.5, -4.0 * v + 3.5), 0.0, 1.0);
            const real b = std::clamp(std::min(4.0 * v + 0.5, -4.0 * v + 2.5), 0.0, 1.0);
            t[static_cast<std::size_t>(i)] = {static_cast<std::uint8_t>(std::lround(255.0 * r)),
                                              static_cast<std::uint8_t>(std::lround(255.0 * g)),
                                              static_cast<std::uint8_t>(std::lround(255.0 * b))};
        }
        return t;
    }();
    return table;
}

}  // namespace

SaliencyMap cam(ModelGraph& model, const Tensor& image, int output) {
    if (model.head != HeadKind::GapCam)
        throw StateError("model '" + model.name +
                         "' flattens before its head; activation maps need a pooling head "
                         "(use grad_cam)");
    Tensor x = as_single_batch(model, image);
    ForwardTrace trace;
    Tensor logits = graph_forward(model, x, Mode::Eval, &trace);
    check_output_index(logits, output);

    const int dense_idx = head_dense_index(model);
    const Layer& head = model.layers[static_cast<std::size_t>(dense_idx)];
    int gap_idx = -1;
    for (int i = dense_idx - 1; i >= 0; --i)
        if (model.layers[i].kind == LayerKind::GlobalAvgPool) {
            gap_idx = i;
            break;
        }
    if (gap_idx < 0) throw StateError("model '" + model.name + "' pools nowhere before its head");
    const Tensor& f = gap_idx == 0 ? trace.input : trace.outputs[static_cast<std::size_t>(gap_idx) - 1];

    const int C = f.dim(1), h = f.dim(2), w = f.dim(3);
    if (head.weight.dim(1) != C)
        throw ShapeError("dense head width does not match the pooled channel count");

    SaliencyMap map;
    map.raw = Tensor({h, w});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            real acc = 0.0;
            for (int c = 0; c < C; ++c)
                acc += head.weight.at({output, c}) * f.at({0, c, y, xx});
            map.raw.at({y, xx}) = acc;
        }
    map.normalized = minmax_normalized(map.raw);
    map.output_name = model.name;
    map.confidence = output_probabilities(model, logits)[static_cast<std::size_t>(output)];
    return map;
}

SaliencyMap grad_cam(ModelGraph& model, const Tensor& image, int target_layer, int output) {
    Tensor x = as_single_batch(model, image);
    const int layer_count = static_cast<int>(model.layers.size());
    int cut;
    if (target_layer < 0) {
        cut = last_conv_block_end(model);
    } else {
        if (target_layer >= layer_count)
            throw ValueError("target layer " + std::to_string(target_layer) +
                             " out of range (model has " + std::to_string(layer_count) +
                             " layers)");
        cut = target_layer + 1;
    }

    Tensor f = graph_forward_range(model, x, 0, cut, Mode::Eval);
    if (f.ndim() != 4)
        throw StateError("target layer output is not spatial; pick a conv block");
    ForwardTrace trace;
    Tensor logits = graph_forward_range(model, f, cut, layer_count, Mode::Eval, &trace);
    check_output_index(logits, output);
    std::vector<real> probs = output_probabilities(model, logits);

    // Seed the backward pass with d(probability of the probed output)/d(logits).
    Tensor seed({1, logits.dim(1)});
    if (model.decision == DecisionKind::Sigmoid) {
        const real p = probs[static_cast<std::size_t>(output)];
        seed.at({0, output}) = p * (1.0 - p);
    } else {
        const real po = probs[static_cast<std::size_t>(output)];
        for (int k = 0; k < logits.dim(1); ++k) {
            const real delta = k == output ? 1.0 : 0.0;
            seed.at({0, k}) = po * (delta - probs[static_cast<std::size_t>(k)]);
        }
    }
    Gradients grads = graph_backward(model, trace, seed);
    const Tensor& df = grads.input_grad;  // [1,C,h,w]

    const int C = f.dim(1), h = f.dim(2), w = f.dim(3);
    std::vector<real> alpha(static_cast<std::size_t>(C), 0.0);
    for (int c = 0; c < C; ++c) {
        real acc = 0.0;
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) acc += df.at({0, c, y, xx});
        alpha[static_cast<std::size_t>(c)] = acc / static_cast<real>(h * w);
    }

    SaliencyMap map;
    map.raw = Tensor({h, w});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            real acc = 0.0;
            for (int c = 0; c < C; ++c) acc += alpha[static_cast<std::size_t>(c)] * f.at({0, c, y, xx});
            map.raw.at({y, xx}) = std::max(acc, 0.0);
        }
    map.normalized = minmax_normalized(map.raw);
    map.output_name = model.name;
    map.confidence = probs[static_cast<std::size_t>(output)];
    return map;
}

SaliencyMap saliency(ModelGraph& model, const Tensor& image, int output) {
    if (model.head == HeadKind::GapCam) return cam(model, image, output);
    return grad_cam(model, image, -1, output);
}

std::vector<SaliencyMap> bundle_saliency(ModelBundle& bundle, const Tensor& image) {
    Tensor x = as_single_batch(bundle.primary, image);
    std::vector<SaliencyMap> maps;
    maps.push_back(saliency(bundle.primary, x));
    maps.front().output_name = "primary";
    if (bundle.secondaries.empty()) return maps;

    const int cut = bundle.primary.branch_cut_layer();
    if (cut <= 0)
        throw StateError("primary module has no branch point for secondary saliency");
    Tensor features = graph_forward_range(bundle.primary, x, 0, cut, Mode::Eval);
    for (ModelGraph& sec : bundle.secondaries) {
        maps.push_back(saliency(sec, features));
        maps.back().output_name = sec.name;
    }
    return maps;
}

void jet_color(real value, std::uint8_t rgb[3]) {
    if (!std::isfinite(value)) throw ValueError("jet_color: value must be finite");
    const long idx = std::clamp(std::lround(value * 255.0), 0L, 255L);
    const auto& entry = jet_table()[static_cast<std::size_t>(idx)];
    rgb[0] = entry[0];
    rgb[1] = entry[1];
    rgb[2] = entry[2];
}

ImageU8 render_heatmap(const SaliencyMap& map, const ImageU8& base, const HeatmapStyle& style) {
    if (map.normalized.ndim() != 2)
        throw ShapeError("saliency map must be a [h,w] grid to render");
    if (style.alpha < 0.0 || style.alpha > 1.0)
        throw ValueError("heatmap alpha must be in [0,1]");
    if (base.channels != 1 && base.channels != 3)
        throw ValueError("heatmap base must be grey or RGB");

    const int h = map.normalized.dim(0), w = map.normalized.dim(1);
    const int H = base.height, W = base.width;
    ImageU8 out = make_image(W, H, 3);
    const real a = style.alpha;

    for (int Y = 0; Y < H; ++Y) {
        // Pixel-center sampling with clamp-to-edge, matching the resizer
        // used for image standardization.
        const real sy = std::clamp((static_cast<real>(Y) + 0.5) * static_cast<real>(h) /
                                           static_cast<real>(H) -
                                       0.5,
                                   0.0, static_cast<real>(h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, h - 1);
        const real fy = sy - static_cast<real>(y0);
        for (int X = 0; X < W; ++X) {
            const real sx = std::clamp((static_cast<real>(X) + 0.5) * static_cast<real>(w) /
                                               static_cast<real>(W) -
                                           0.5,
                                       0.0, static_cast<real>(w - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, w - 1);
            const real fx = sx - static_cast<real>(x0);

            const real top = map.normalized.at({y0, x0}) * (1.0 - fx) +
                             map.normalized.at({y0, x1}) * fx;
            const real bot = map.normalized.at({y1, x0}) * (1.0 - fx) +
                             map.normalized.at({y1, x1}) * fx;
            const real v = top * (1.0 - fy) + bot * fy;

            std::uint8_t rgb[3];
            jet_color(v, rgb);
            for (int c = 0; c < 3; ++c) {
                const real base_v =
                    static_cast<real>(base.channels == 1 ? base.px(Y, X, 0) : base.px(Y, X, c));
                const real mixed = (1.0 - a) * base_v + a * static_cast<real>(rgb[c]);
                out.px(Y, X, c) =
                    static_cast<std::uint8_t>(std::clamp<long>(std::lround(mixed), 0, 255));
            }
        }
    }
    return out;
}

void write_saliency_records(const std::string& path,
                            const std::vector<SaliencyRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write saliency records to '" + path + "'");
    for (const SaliencyRecord& r : records) {
        nlohmann::ordered_json row;
        row["image"] = r.image_id;
        row["output"] = r.output_name;
        row["positive"] = r.positive;
        row["confidence"] = r.confidence;
        out << row.dump() << "\n";
    }
    if (!out) throw IoError("short write to saliency records '" + path + "'");
}

std::vector<SaliencyRecord> read_saliency_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read saliency records from '" + path + "'");
    std::vector<SaliencyRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto row = nlohmann::ordered_json::parse(line);
            SaliencyRecord r;
            r.image_id = row.at("image").get<std::string>();
            r.output_name = row.at("output").get<std::string>();
            r.positive = row.at("positive").get<bool>();
            r.confidence = row.at("confidence").get<real>();
            records.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw DataError("saliency record line " + std::to_string(lineno) + " in '" + path +
                            "' is malformed: " + e.what());
        }
    }
    return records;
}

}  // namespace ganattr
