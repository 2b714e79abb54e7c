#include "ganattr/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ganattr/errors.hpp"

namespace ganattr {

std::vector<std::string> AugmentationRecord::fired() const {
    std::vector<std::string> out;
    if (blur) out.push_back("blur");
    if (crop) out.push_back("crop");
    if (jpeg) out.push_back("jpeg");
    if (noise) out.push_back("noise");
    return out;
}

namespace {

// Mirror across the edge pixel without repeating it: -1 -> 1, n -> n-2.
int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

std::uint8_t clamp_round(real v) {
    const long r = std::lround(v);
    if (r < 0) return 0;
    if (r > 255) return 255;
    return static_cast<std::uint8_t>(r);
}

}  // namespace

std::vector<real> blur_kernel_weights(int kernel) {
    const bool known = std::find(AugmentationConfig::blur_kernels.begin(),
                                 AugmentationConfig::blur_kernels.end(),
                                 kernel) != AugmentationConfig::blur_kernels.end();
    if (!known)
        throw ValueError("blur kernel " + std::to_string(kernel) + " not one of {3,5,7,9}");
    const real sigma = 0.3 * ((kernel - 1) / 2 - 1) + 0.8;
    std::vector<real> w(kernel);
    const int c = kernel / 2;
    real total = 0.0;
    for (int i = 0; i < kernel; ++i) {
        w[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
        total += w[i];
    }
    for (auto& v : w) v /= total;
    return w;
}

ImageU8 blur_with_kernel(const ImageU8& img, int kernel) {
    const auto w = blur_kernel_weights(kernel);
    const int r = kernel / 2;
    const int H = img.height, W = img.width, C = img.channels;

    // Separable passes with a real-valued intermediate; rounding happens once.
    std::vector<real> horiz(static_cast<std::size_t>(H) * W * C);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                real s = 0.0;
                for (int t = -r; t <= r; ++t) s += w[t + r] * img.px(y, reflect101(x + t, W), c);
                horiz[(static_cast<std::size_t>(y) * W + x) * C + c] = s;
            }
    ImageU8 out = make_image(W, H, C);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                real s = 0.0;
                for (int t = -r; t <= r; ++t)
                    s += w[t + r] * horiz[(static_cast<std::size_t>(reflect101(y + t, H)) * W + x) * C + c];
                out.px(y, x, c) = clamp_round(s);
            }
    return out;
}

ImageU8 crop_with(const ImageU8& img, real pct_y, real pct_x, int off_y, int off_x) {
    if (pct_y < 0.0 || pct_x < 0.0 || pct_y >= 100.0 || pct_x >= 100.0)
        throw ValueError("crop percentage outside [0,100)");
    const int removed_y = static_cast<int>(std::lround(img.height * pct_y / 100.0));
    const int removed_x = static_cast<int>(std::lround(img.width * pct_x / 100.0));
    if (off_y < 0 || off_y > removed_y || off_x < 0 || off_x > removed_x)
        throw ValueError("crop offset outside the removed margin");
    const int h = img.height - removed_y, w = img.width - removed_x;
    if (h < 1 || w < 1) throw ValueError("crop would remove the whole image");

    ImageU8 window = make_image(w, h, img.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels; ++c)
                window.px(y, x, c) = img.px(y + off_y, x + off_x, c);
    return resize_bilinear(window, img.width, img.height);
}

ImageU8 jpeg_with(const ImageU8& img, int quality, std::vector<std::uint8_t>* bytes) {
    auto encoded = encode_jpeg(img, quality);
    ImageU8 out = decode_jpeg(encoded.data(), encoded.size());
    if (bytes) *bytes = std::move(encoded);
    return out;
}

ImageU8 noise_with(const ImageU8& img, real variance, Rng& rng) {
    if (variance < 0.0) throw ValueError("noise variance must be nonnegative");
    if (variance == 0.0) return img;
    const real sigma = std::sqrt(variance);
    ImageU8 out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.px(y, x, c) = clamp_round(img.px(y, x, c) + rng.normal(0.0, sigma));
    return out;
}

ImageU8 gaussian_blur(const ImageU8& img, Rng& rng, AugmentationRecord& rec) {
    const int pick = rng.uniform_int(0, static_cast<int>(AugmentationConfig::blur_kernels.size()) - 1);
    rec.blur = true;
    rec.blur_kernel = AugmentationConfig::blur_kernels[static_cast<std::size_t>(pick)];
    return blur_with_kernel(img, rec.blur_kernel);
}

ImageU8 random_crop_upsample(const ImageU8& img, Rng& rng, AugmentationRecord& rec) {
    rec.crop = true;
    rec.crop_pct_y = rng.uniform(AugmentationConfig::crop_pct_lo, AugmentationConfig::crop_pct_hi);
    rec.crop_pct_x = rng.uniform(AugmentationConfig::crop_pct_lo, AugmentationConfig::crop_pct_hi);
    const int removed_y = static_cast<int>(std::lround(img.height * rec.crop_pct_y / 100.0));
    const int removed_x = static_cast<int>(std::lround(img.width * rec.crop_pct_x / 100.0));
    rec.crop_off_y = removed_y > 0 ? rng.uniform_int(0, removed_y) : 0;
    rec.crop_off_x = removed_x > 0 ? rng.uniform_int(0, removed_x) : 0;
    return crop_with(img, rec.crop_pct_y, rec.crop_pct_x, rec.crop_off_y, rec.crop_off_x);
}

ImageU8 jpeg_compress(const ImageU8& img, Rng& rng, AugmentationRecord& rec,
                      std::vector<std::uint8_t>* bytes) {
    if (img.channels != 3) throw ValueError("jpeg augmentation expects a 3-channel image");
    rec.jpeg = true;
    rec.jpeg_quality =
        rng.uniform_int(AugmentationConfig::jpeg_quality_lo, AugmentationConfig::jpeg_quality_hi);
    rec.jpeg_codec = jpeg_codec_version();
    return jpeg_with(img, rec.jpeg_quality, bytes);
}

ImageU8 additive_noise(const ImageU8& img, Rng& rng, AugmentationRecord& rec) {
    rec.noise = true;
    rec.noise_variance =
        rng.uniform(AugmentationConfig::noise_var_lo, AugmentationConfig::noise_var_hi);
    return noise_with(img, rec.noise_variance, rng);
}

AugmentOutcome multi_augment(const ImageU8& img, Rng& rng) {
    AugmentOutcome out;
    out.image = img;
    if (rng.coin(AugmentationConfig::probability))
        out.image = gaussian_blur(out.image, rng, out.record);
    if (rng.coin(AugmentationConfig::probability))
        out.image = random_crop_upsample(out.image, rng, out.record);
    if (rng.coin(AugmentationConfig::probability))
        out.image = jpeg_compress(out.image, rng, out.record, &out.jpeg_bytes);
    if (rng.coin(AugmentationConfig::probability))
        out.image = additive_noise(out.image, rng, out.record);
    return out;
}

AugmentKind augment_kind_from_name(const std::string& name) {
    if (name == "blur") return AugmentKind::Blur;
    if (name == "crop") return AugmentKind::Crop;
    if (name == "jpeg") return AugmentKind::Jpeg;
    if (name == "noise") return AugmentKind::Noise;
    throw ValueError("unknown augmentation '" + name + "' (expected blur, crop, jpeg, or noise)");
}

std::string augment_kind_name(AugmentKind kind) {
    switch (kind) {
        case AugmentKind::Blur: return "blur";
        case AugmentKind::Crop: return "crop";
        case AugmentKind::Jpeg: return "jpeg";
        case AugmentKind::Noise: return "noise";
    }
    throw ValueError("unknown augmentation kind");
}

AugmentOutcome apply_single(const ImageU8& img, AugmentKind kind, Rng& rng) {
    AugmentOutcome out;
    switch (kind) {
        case AugmentKind::Blur:
            out.image = gaussian_blur(img, rng, out.record);
            break;
        case AugmentKind::Crop:
            out.image = random_crop_upsample(img, rng, out.record);
            break;
        case AugmentKind::Jpeg:
            out.image = jpeg_compress(img, rng, out.record, &out.jpeg_bytes);
            break;
        case AugmentKind::Noise:
            out.image = additive_noise(img, rng, out.record);
            break;
    }
    return out;
}

std::vector<bool> half_selection(int n, Rng& rng) {
    if (n < 0) throw ValueError("half_selection: negative count");
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    // Fisher-Yates driven by the provided stream; std::shuffle's draw pattern
    // is implementation-defined, which would break cross-build determinism.
    for (int i = n - 1; i > 0; --i) {
        const int j = rng.uniform_int(0, i);
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    std::vector<bool> picked(static_cast<std::size_t>(n), false);
    const int take = (n + 1) / 2;
    for (int i = 0; i < take; ++i) picked[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
    return picked;
}

}  // namespace ganattr
