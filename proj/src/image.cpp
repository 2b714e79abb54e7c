#include "ganattr/image.hpp"

#include <csetjmp>
#include <cmath>
#include <cstdio>
#include <cstring>

#include <jpeglib.h>
#include <png.h>

#include "ganattr/errors.hpp"

namespace ganattr {

namespace {

void require_valid(const ImageU8& img, const char* who) {
    if (img.width < 1 || img.height < 1) throw ValueError(std::string(who) + ": empty image");
    if (img.channels != 1 && img.channels != 3)
        throw ValueError(std::string(who) + ": only grey and RGB images are supported");
    const std::size_t want =
        static_cast<std::size_t>(img.width) * img.height * img.channels;
    if (img.pixels.size() != want)
        throw ValueError(std::string(who) + ": pixel buffer size does not match dimensions");
}

std::uint8_t clamp_u8(real v) {
    const long r = std::lround(v);
    if (r < 0) return 0;
    if (r > 255) return 255;
    return static_cast<std::uint8_t>(r);
}

// libjpeg reports fatal errors through error_exit; route them into an
// exception instead of the default abort.
struct JpegErr {
    jpeg_error_mgr mgr;
    std::jmp_buf env;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_trampoline(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->env, 1);
}

}  // namespace

ImageU8 make_image(int width, int height, int channels, std::uint8_t fill) {
    if (width < 1 || height < 1) throw ValueError("make_image: dimensions must be positive");
    if (channels != 1 && channels != 3) throw ValueError("make_image: channels must be 1 or 3");
    ImageU8 img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.assign(static_cast<std::size_t>(width) * height * channels, fill);
    return img;
}

ImageU8 load_image(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open image '" + path + "'");
    unsigned char magic[2] = {0, 0};
    const std::size_t got = std::fread(magic, 1, 2, f);
    std::fclose(f);
    if (got != 2) throw DataError("image '" + path + "' is too short to identify");

    if (magic[0] == 0x89 && magic[1] == 'P') {
        png_image png;
        std::memset(&png, 0, sizeof png);
        png.version = PNG_IMAGE_VERSION;
        if (!png_image_begin_read_from_file(&png, path.c_str()))
            throw DataError("cannot parse PNG '" + path + "': " + png.message);
        const bool grey = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
        png.format = grey ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
        ImageU8 img = make_image(static_cast<int>(png.width), static_cast<int>(png.height),
                                 grey ? 1 : 3);
        if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
            std::string msg = png.message;
            png_image_free(&png);
            throw DataError("cannot decode PNG '" + path + "': " + msg);
        }
        return img;
    }
    if (magic[0] == 0xFF && magic[1] == 0xD8) {
        std::FILE* jf = std::fopen(path.c_str(), "rb");
        if (!jf) throw IoError("cannot open image '" + path + "'");
        std::fseek(jf, 0, SEEK_END);
        const long size = std::ftell(jf);
        std::fseek(jf, 0, SEEK_SET);
        std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
        const std::size_t rd = std::fread(buf.data(), 1, buf.size(), jf);
        std::fclose(jf);
        if (rd != buf.size()) throw IoError("short read on image '" + path + "'");
        try {
            return decode_jpeg(buf.data(), buf.size());
        } catch (const DataError& e) {
            throw DataError("cannot decode JPEG '" + path + "': " + e.what());
        }
    }
    throw DataError("image '" + path + "' is neither PNG nor JPEG");
}

void save_png(const ImageU8& img, const std::string& path) {
    require_valid(img, "save_png");
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, img.pixels.data(), 0, nullptr))
        throw IoError("cannot write PNG '" + path + "': " + png.message);
}

std::vector<std::uint8_t> encode_png(const ImageU8& img) {
    require_valid(img, "encode_png");
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, img.pixels.data(), 0, nullptr))
        throw ComputeError(std::string("PNG encoding failed: ") + png.message);
    std::vector<std::uint8_t> bytes(size);
    if (!png_image_write_to_memory(&png, bytes.data(), &size, 0, img.pixels.data(), 0, nullptr))
        throw ComputeError(std::string("PNG encoding failed: ") + png.message);
    bytes.resize(size);
    return bytes;
}

std::vector<std::uint8_t> encode_jpeg(const ImageU8& img, int quality) {
    require_valid(img, "encode_jpeg");
    if (quality < 1 || quality > 100)
        throw ValueError("encode_jpeg: quality " + std::to_string(quality) + " outside [1,100]");

    jpeg_compress_struct cinfo;
    JpegErr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_trampoline;

    unsigned char* out = nullptr;
    unsigned long out_size = 0;
    if (setjmp(err.env)) {
        jpeg_destroy_compress(&cinfo);
        if (out) free(out);
        throw ComputeError(std::string("JPEG encoding failed: ") + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &out, &out_size);
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = img.channels;
    cinfo.in_color_space = img.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(img.pixels.data() + cinfo.next_scanline * stride);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::vector<std::uint8_t> bytes(out, out + out_size);
    free(out);
    return bytes;
}

ImageU8 decode_jpeg(const std::uint8_t* data, std::size_t size) {
    jpeg_decompress_struct cinfo;
    JpegErr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_trampoline;
    if (setjmp(err.env)) {
        jpeg_destroy_decompress(&cinfo);
        throw DataError(std::string("JPEG decoding failed: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, data, static_cast<unsigned long>(size));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    ImageU8 img = make_image(static_cast<int>(cinfo.output_width),
                             static_cast<int>(cinfo.output_height),
                             cinfo.output_components == 1 ? 1 : 3);
    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.pixels.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

void save_jpeg(const ImageU8& img, const std::string& path, int quality) {
    const auto bytes = encode_jpeg(img, quality);
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write JPEG '" + path + "'");
    const std::size_t wr = std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    if (wr != bytes.size()) throw IoError("short write on JPEG '" + path + "'");
}

std::string jpeg_codec_version() {
#ifdef LIBJPEG_TURBO_VERSION_NUMBER
    return "libjpeg-turbo api " + std::to_string(JPEG_LIB_VERSION);
#else
    return "libjpeg api " + std::to_string(JPEG_LIB_VERSION);
#endif
}

ImageU8 center_crop_square(const ImageU8& img) {
    require_valid(img, "center_crop_square");
    const int side = std::min(img.width, img.height);
    const int x0 = (img.width - side) / 2;
    const int y0 = (img.height - side) / 2;
    ImageU8 out = make_image(side, side, img.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(side) * img.channels;
    for (int y = 0; y < side; ++y)
        std::memcpy(&out.px(y, 0, 0), &img.pixels[(static_cast<std::size_t>(y0 + y) * img.width + x0) *
                                                  img.channels],
                    row_bytes);
    return out;
}

ImageU8 resize_bilinear(const ImageU8& img, int out_width, int out_height) {
    require_valid(img, "resize_bilinear");
    if (out_width < 1 || out_height < 1)
        throw ValueError("resize_bilinear: target dimensions must be positive");
    if (out_width == img.width && out_height == img.height) return img;

    ImageU8 out = make_image(out_width, out_height, img.channels);
    const real sx = static_cast<real>(img.width) / out_width;
    const real sy = static_cast<real>(img.height) / out_height;
    for (int oy = 0; oy < out_height; ++oy) {
        const real src_y = (oy + 0.5) * sy - 0.5;
        const int yf = static_cast<int>(std::floor(src_y));
        const real fy = src_y - yf;
        const int y0 = std::min(std::max(yf, 0), img.height - 1);
        const int y1 = std::min(std::max(yf + 1, 0), img.height - 1);
        for (int ox = 0; ox < out_width; ++ox) {
            const real src_x = (ox + 0.5) * sx - 0.5;
            const int xf = static_cast<int>(std::floor(src_x));
            const real fx = src_x - xf;
            const int x0 = std::min(std::max(xf, 0), img.width - 1);
            const int x1 = std::min(std::max(xf + 1, 0), img.width - 1);
            for (int c = 0; c < img.channels; ++c) {
                const real top = (1.0 - fx) * img.px(y0, x0, c) + fx * img.px(y0, x1, c);
                const real bot = (1.0 - fx) * img.px(y1, x0, c) + fx * img.px(y1, x1, c);
                out.px(oy, ox, c) = clamp_u8((1.0 - fy) * top + fy * bot);
            }
        }
    }
    return out;
}

ImageU8 standardize(const ImageU8& img, int size) {
    if (size < 1) throw ValueError("standardize: size must be positive");
    return resize_bilinear(center_crop_square(img), size, size);
}

ImageU8 to_grayscale(const ImageU8& img) {
    require_valid(img, "to_grayscale");
    if (img.channels == 1) return img;
    ImageU8 out = make_image(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.px(y, x, 0) = clamp_u8(0.299 * img.px(y, x, 0) + 0.587 * img.px(y, x, 1) +
                                       0.114 * img.px(y, x, 2));
    return out;
}

Tensor pixel_tensor(const ImageU8& img) {
    require_valid(img, "pixel_tensor");
    Tensor t({img.channels, img.height, img.width});
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.at({c, y, x}) = static_cast<real>(img.px(y, x, c)) / 127.5 - 1.0;
    return t;
}

ImageU8 image_from_pixel_tensor(const Tensor& t) {
    if (t.ndim() != 3) throw ShapeError("image_from_pixel_tensor: expected a [C,H,W] tensor");
    const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
    if (C != 1 && C != 3)
        throw ShapeError("image_from_pixel_tensor: channels must be 1 or 3");
    ImageU8 img = make_image(W, H, C);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) img.px(y, x, c) = clamp_u8((t.at({c, y, x}) + 1.0) * 127.5);
    return img;
}

Tensor gray_tensor(const ImageU8& img) {
    const ImageU8 grey = to_grayscale(img);
    Tensor t({1, grey.height, grey.width});
    for (int y = 0; y < grey.height; ++y)
        for (int x = 0; x < grey.width; ++x) t.at({0, y, x}) = static_cast<real>(grey.px(y, x, 0));
    return t;
}

}  // namespace ganattr
