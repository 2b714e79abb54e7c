#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "ganattr/errors.hpp"
#include "ganattr/image.hpp"
#include "ganattr/rng.hpp"

using namespace ganattr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path d = fs::temp_directory_path() / "ganattr-image-tests";
    fs::create_directories(d);
    return d;
}

ImageU8 random_image(int w, int h, int c, std::uint64_t seed) {
    Rng rng(seed);
    ImageU8 img = make_image(w, h, c);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

}  // namespace

TEST_CASE("png round trip preserves every pixel") {
    for (int channels : {1, 3}) {
        ImageU8 img = random_image(37, 23, channels, 100 + channels);
        const auto path = (temp_dir() / ("rt" + std::to_string(channels) + ".png")).string();
        save_png(img, path);
        ImageU8 back = load_image(path);
        CHECK(back.width == img.width);
        CHECK(back.height == img.height);
        CHECK(back.channels == img.channels);
        CHECK(back.pixels == img.pixels);
    }
}

TEST_CASE("image container is sniffed from bytes, not the extension") {
    ImageU8 img = random_image(16, 16, 3, 7);
    const auto path = (temp_dir() / "actually-a-png.dat").string();
    save_png(img, path);
    ImageU8 back = load_image(path);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("jpeg encode/decode preserving dimensions, quality ordering holds") {
    // Smooth gradient with mild texture, the friendly case for a lossy codec.
    ImageU8 img = make_image(64, 64, 3);
    Rng rng(11);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            for (int c = 0; c < 3; ++c) {
                const int v = 2 * (c == 0 ? x : c == 1 ? y : (x + y) / 2) + rng.uniform_int(0, 8);
                img.px(y, x, c) = static_cast<std::uint8_t>(std::min(v, 255));
            }
    auto err_at = [&](int quality) {
        const auto bytes = encode_jpeg(img, quality);
        ImageU8 back = decode_jpeg(bytes.data(), bytes.size());
        REQUIRE(back.width == 64);
        REQUIRE(back.height == 64);
        double err = 0.0;
        for (std::size_t i = 0; i < img.pixels.size(); ++i)
            err += std::abs(static_cast<int>(img.pixels[i]) - back.pixels[i]);
        return err / static_cast<double>(img.pixels.size());
    };
    CHECK(err_at(75) < err_at(10));
    CHECK(encode_jpeg(img, 50) == encode_jpeg(img, 50));  // same input, same bytes
    CHECK_THROWS_AS(encode_jpeg(img, 0), ValueError);
    CHECK_THROWS_AS(encode_jpeg(img, 101), ValueError);
}

TEST_CASE("corrupt and missing files raise distinct errors") {
    const auto path = (temp_dir() / "garbage.bin").string();
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("definitely not an image", f);
    std::fclose(f);
    CHECK_THROWS_AS(load_image(path), DataError);
    CHECK_THROWS_AS(load_image((temp_dir() / "missing.png").string()), IoError);
}

TEST_CASE("center crop takes the middle square") {
    ImageU8 img = make_image(10, 6, 1);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 10; ++x) img.px(y, x, 0) = static_cast<std::uint8_t>(10 * y + x);
    ImageU8 sq = center_crop_square(img);
    REQUIRE(sq.width == 6);
    REQUIRE(sq.height == 6);
    // Width 10 -> 6 removes columns 0,1 and 8,9.
    CHECK(sq.px(0, 0, 0) == 2);
    CHECK(sq.px(5, 5, 0) == 57);
}

TEST_CASE("bilinear 2x downscale equals the 2x2 block mean") {
    ImageU8 img = random_image(32, 32, 3, 42);
    ImageU8 half = resize_bilinear(img, 16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) {
                const real mean = (img.px(2 * y, 2 * x, c) + img.px(2 * y, 2 * x + 1, c) +
                                   img.px(2 * y + 1, 2 * x, c) + img.px(2 * y + 1, 2 * x + 1, c)) /
                                  4.0;
                CHECK(static_cast<int>(half.px(y, x, c)) == static_cast<int>(std::lround(mean)));
            }
}

TEST_CASE("resize identity and constant behavior") {
    ImageU8 img = random_image(20, 20, 3, 3);
    ImageU8 same = resize_bilinear(img, 20, 20);
    CHECK(same.pixels == img.pixels);
    ImageU8 grey = make_image(9, 9, 1, 77);
    ImageU8 up = resize_bilinear(grey, 30, 30);
    for (auto p : up.pixels) CHECK(p == 77);
}

TEST_CASE("standardize crops then resizes to the target square") {
    ImageU8 img = random_image(50, 30, 3, 5);
    ImageU8 out = standardize(img, 16);
    CHECK(out.width == 16);
    CHECK(out.height == 16);
    CHECK(out.channels == 3);
}

TEST_CASE("grayscale uses the broadcast luma weights") {
    ImageU8 img = make_image(1, 3, 3);
    // Pure red, green, blue rows.
    img.px(0, 0, 0) = 255;
    img.px(1, 0, 1) = 255;
    img.px(2, 0, 2) = 255;
    ImageU8 grey = to_grayscale(img);
    CHECK(static_cast<int>(grey.px(0, 0, 0)) == 76);   // round(0.299*255)
    CHECK(static_cast<int>(grey.px(1, 0, 0)) == 150);  // round(0.587*255)
    CHECK(static_cast<int>(grey.px(2, 0, 0)) == 29);   // round(0.114*255)
    ImageU8 already = make_image(4, 4, 1, 9);
    CHECK(to_grayscale(already).pixels == already.pixels);
}

TEST_CASE("pixel tensor maps to [-1,1] and inverts") {
    ImageU8 img = make_image(2, 1, 3);
    img.px(0, 0, 0) = 0;
    img.px(0, 0, 1) = 255;
    img.px(0, 0, 2) = 128;
    img.px(0, 1, 0) = 64;
    Tensor t = pixel_tensor(img);
    REQUIRE(t.shape == std::vector<int>{3, 1, 2});
    CHECK(t.at({0, 0, 0}) == doctest::Approx(-1.0));
    CHECK(t.at({1, 0, 0}) == doctest::Approx(1.0));
    CHECK(t.at({2, 0, 0}) == doctest::Approx(128.0 / 127.5 - 1.0));
    ImageU8 back = image_from_pixel_tensor(t);
    CHECK(back.pixels == img.pixels);

    ImageU8 rand_img = random_image(8, 8, 3, 21);
    CHECK(image_from_pixel_tensor(pixel_tensor(rand_img)).pixels == rand_img.pixels);
}

TEST_CASE("gray tensor carries raw grey levels") {
    ImageU8 img = make_image(3, 2, 1);
    img.px(0, 0, 0) = 0;
    img.px(1, 2, 0) = 255;
    Tensor t = gray_tensor(img);
    REQUIRE(t.shape == std::vector<int>{1, 2, 3});
    CHECK(t.at({0, 0, 0}) == 0.0);
    CHECK(t.at({0, 1, 2}) == 255.0);
}
