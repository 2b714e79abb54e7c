#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganattr/tensor.hpp"

namespace ganattr {

// 8-bit image, rows top to bottom, channels interleaved (1 = grey, 3 = RGB).
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& px(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t px(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

ImageU8 make_image(int width, int height, int channels, std::uint8_t fill = 0);

// Container is sniffed from the leading bytes, not the file name.
ImageU8 load_image(const std::string& path);
void save_png(const ImageU8& img, const std::string& path);
void save_jpeg(const ImageU8& img, const std::string& path, int quality);

std::vector<std::uint8_t> encode_jpeg(const ImageU8& img, int quality);
ImageU8 decode_jpeg(const std::uint8_t* data, std::size_t size);
std::vector<std::uint8_t> encode_png(const ImageU8& img);

// Identifies the linked JPEG implementation; recorded alongside compression
// augmentations since decoded pixels can differ across codec builds.
std::string jpeg_codec_version();

ImageU8 center_crop_square(const ImageU8& img);
// Pixel-center sampling with clamp-to-edge; an exact 2x downscale equals the
// 2x2 block mean.
ImageU8 resize_bilinear(const ImageU8& img, int out_width, int out_height);
// Center crop to square, then resize to size x size.
ImageU8 standardize(const ImageU8& img, int size);

ImageU8 to_grayscale(const ImageU8& img);

// [C,H,W] tensor mapping [0,255] to [-1,1].
Tensor pixel_tensor(const ImageU8& img);
// Inverse of pixel_tensor: scale back, round, clamp. Accepts [C,H,W].
ImageU8 image_from_pixel_tensor(const Tensor& t);
// [1,H,W] tensor of raw grey levels in [0,255], the spectrum-path input.
Tensor gray_tensor(const ImageU8& img);

}  // namespace ganattr
