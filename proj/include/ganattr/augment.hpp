#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ganattr/image.hpp"
#include "ganattr/rng.hpp"

namespace ganattr {

// The four perturbations and their fixed sampling ranges. The order and the
// ranges are part of the training protocol and are not configurable.
struct AugmentationConfig {
    static constexpr std::array<int, 4> blur_kernels{3, 5, 7, 9};
    static constexpr real crop_pct_lo = 5.0, crop_pct_hi = 20.0;
    static constexpr int jpeg_quality_lo = 10, jpeg_quality_hi = 75;
    static constexpr real noise_var_lo = 5.0, noise_var_hi = 20.0;
    static constexpr real probability = 0.5;
};

struct AugmentationRecord {
    bool blur = false, crop = false, jpeg = false, noise = false;
    int blur_kernel = 0;
    real crop_pct_y = 0.0, crop_pct_x = 0.0;
    int crop_off_y = 0, crop_off_x = 0;
    int jpeg_quality = 0;
    std::string jpeg_codec;
    real noise_variance = 0.0;

    // Names of fired augmentations in application order.
    std::vector<std::string> fired() const;
    bool any() const { return blur || crop || jpeg || noise; }
};

struct AugmentOutcome {
    ImageU8 image;
    AugmentationRecord record;
    // Exact encoded stream when the compression step fired; materialization
    // stores these bytes verbatim if no later step altered the pixels.
    std::vector<std::uint8_t> jpeg_bytes;
};

// Normalized 1D Gaussian taps for a supported kernel size; sigma follows
// 0.3*((k-1)/2 - 1) + 0.8.
std::vector<real> blur_kernel_weights(int kernel);

// Deterministic single-perturbation kernels (the parameterized test hooks).
ImageU8 blur_with_kernel(const ImageU8& img, int kernel);
ImageU8 crop_with(const ImageU8& img, real pct_y, real pct_x, int off_y, int off_x);
ImageU8 jpeg_with(const ImageU8& img, int quality, std::vector<std::uint8_t>* bytes = nullptr);
ImageU8 noise_with(const ImageU8& img, real variance, Rng& rng);

// Sampling versions drawing parameters from the pinned ranges.
ImageU8 gaussian_blur(const ImageU8& img, Rng& rng, AugmentationRecord& rec);
ImageU8 random_crop_upsample(const ImageU8& img, Rng& rng, AugmentationRecord& rec);
ImageU8 jpeg_compress(const ImageU8& img, Rng& rng, AugmentationRecord& rec,
                      std::vector<std::uint8_t>* bytes = nullptr);
ImageU8 additive_noise(const ImageU8& img, Rng& rng, AugmentationRecord& rec);

// Independent half-probability coin per perturbation, fixed order
// blur -> crop -> jpeg -> noise.
AugmentOutcome multi_augment(const ImageU8& img, Rng& rng);

enum class AugmentKind { Blur, Crop, Jpeg, Noise };
AugmentKind augment_kind_from_name(const std::string& name);
std::string augment_kind_name(AugmentKind kind);

// One named perturbation with sampled parameters, for the half-set policy.
AugmentOutcome apply_single(const ImageU8& img, AugmentKind kind, Rng& rng);

// Exactly ceil(n/2) positions marked true, uniformly chosen.
std::vector<bool> half_selection(int n, Rng& rng);

}  // namespace ganattr
