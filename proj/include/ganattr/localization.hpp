#pragma once

#include <string>
#include <vector>

#include "ganattr/graph.hpp"
#include "ganattr/image.hpp"
#include "ganattr/model_zoo.hpp"
#include "ganattr/tensor.hpp"

namespace ganattr {

// A spatial explanation for one model output at the resolution of the last
// conv feature maps, plus a copy rescaled for rendering.
struct SaliencyMap {
    Tensor raw;         // [h,w]
    Tensor normalized;  // [h,w] in [0,1]; all 0.5 when raw is constant
    std::string output_name;
    real confidence = 0.0;  // probability of the probed output
};

// Class activation map for models closing with global average pooling and a
// dense head: the dense weights of the probed output recombine the final
// conv feature maps. Rejects flatten-head models (use grad_cam there).
// Input is one image tensor, [C,H,W] or [1,C,H,W].
SaliencyMap cam(ModelGraph& model, const Tensor& image, int output = 0);

// Gradient-weighted map for any head: channel weights are the spatial means
// of d(probability)/d(feature map), taken at the activation leaving the last
// conv block (or an explicit layer index whose output to probe), and the
// weighted sum is clipped at zero.
SaliencyMap grad_cam(ModelGraph& model, const Tensor& image, int target_layer = -1,
                     int output = 0);

// cam for gap-head models, grad_cam otherwise.
SaliencyMap saliency(ModelGraph& model, const Tensor& image, int output = 0);

// Maps for the primary and every secondary of a bundle on one image tensor;
// secondaries are probed on the shared branch features, mirroring inference.
std::vector<SaliencyMap> bundle_saliency(ModelBundle& bundle, const Tensor& image);

struct HeatmapStyle {
    real alpha = 0.5;  // overlay opacity, 0 = base image only, 1 = pure map
};

// Upsamples the normalized map to the base image size (pixel-center
// bilinear), applies the piecewise-linear Jet colormap (0 blue, 0.5 green,
// 1 red), and alpha-blends over the base. Output is RGB at base dimensions.
ImageU8 render_heatmap(const SaliencyMap& map, const ImageU8& base,
                       const HeatmapStyle& style = {});

// Low/high ends of the map's color scale, exposed for tests and legends:
// returns the colormap entry for a normalized value in [0,1].
void jet_color(real value, std::uint8_t rgb[3]);

// Verdict metadata stays out of the rendered pixels; it travels in one
// line-delimited record per rendered map.
struct SaliencyRecord {
    std::string image_id;
    std::string output_name;
    bool positive = false;
    real confidence = 0.0;
};

void write_saliency_records(const std::string& path,
                            const std::vector<SaliencyRecord>& records);
std::vector<SaliencyRecord> read_saliency_records(const std::string& path);

}  // namespace ganattr
