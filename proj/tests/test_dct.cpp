#include <cmath>

#include "doctest.h"
#include "ganattr/dct.hpp"
#include "ganattr/errors.hpp"
#include "ganattr/rng.hpp"

using namespace ganattr;

namespace {

Tensor random_plane(int h, int w, std::uint64_t seed, real scale = 100.0) {
    Rng rng(seed);
    Tensor t({h, w});
    for (auto& v : t.data) v = rng.uniform(0.0, scale);
    return t;
}

}  // namespace

TEST_CASE("dct basis is orthonormal") {
    for (int n : {4, 8, 16, 33}) {
        Tensor c = dct_matrix(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                real dot = 0.0;
                for (int k = 0; k < n; ++k) dot += c.at({i, k}) * c.at({j, k});
                CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-12);
            }
    }
}

TEST_CASE("dct2 matches the quadruple-loop definition on 16x16") {
    const int n = 16;
    Tensor x = random_plane(n, n, 5);
    Tensor got = dct2(x);
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
            const real su = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
            const real sv = v == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
            real s = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    s += x.at({i, j}) * std::cos(M_PI * (2.0 * i + 1.0) * u / (2.0 * n)) *
                         std::cos(M_PI * (2.0 * j + 1.0) * v / (2.0 * n));
            CHECK(got.at({u, v}) == doctest::Approx(su * sv * s).epsilon(1e-9));
        }
}

TEST_CASE("inverse transform recovers the plane") {
    for (auto [h, w] : {std::pair{8, 8}, std::pair{16, 16}, std::pair{12, 20}}) {
        Tensor x = random_plane(h, w, 17 + h);
        Tensor back = idct2(dct2(x));
        CHECK(max_abs_diff(x, back) < 1e-10);
    }
}

TEST_CASE("transform conserves energy") {
    Tensor x = random_plane(32, 32, 9);
    Tensor y = dct2(x);
    real ex = 0.0, ey = 0.0;
    for (real v : x.data) ex += v * v;
    for (real v : y.data) ey += v * v;
    CHECK(ey == doctest::Approx(ex).epsilon(1e-12));
}

TEST_CASE("transform is linear") {
    Tensor a = random_plane(16, 16, 1), b = random_plane(16, 16, 2);
    Tensor mix({16, 16});
    for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = 2.5 * a.data[i] - 0.75 * b.data[i];
    Tensor ya = dct2(a), yb = dct2(b), ymix = dct2(mix);
    for (std::size_t i = 0; i < ymix.data.size(); ++i)
        CHECK(ymix.data[i] == doctest::Approx(2.5 * ya.data[i] - 0.75 * yb.data[i]).epsilon(1e-10));
}

TEST_CASE("constant plane concentrates in the DC coefficient") {
    const int n = 16;
    Tensor x = Tensor::full({n, n}, 3.0);
    Tensor y = dct2(x);
    CHECK(y.at({0, 0}) == doctest::Approx(3.0 * n).epsilon(1e-12));
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
            if (u || v) CHECK(std::abs(y.at({u, v})) < 1e-9);
}

TEST_CASE("dct2 accepts single-channel 3D planes") {
    Tensor x3({1, 8, 8}, random_plane(8, 8, 33).data);
    Tensor y3 = dct2(x3);
    CHECK(y3.shape == std::vector<int>{1, 8, 8});
    Tensor y2 = dct2(Tensor({8, 8}, x3.data));
    CHECK(max_abs_diff(Tensor({8, 8}, y3.data), y2) == 0.0);
    CHECK_THROWS_AS(dct2(Tensor::zeros({3, 8, 8})), ShapeError);
}

TEST_CASE("log scaling compresses magnitudes with the pinned floor") {
    Tensor x({3}, {0.0, 1.0, -100.0});
    Tensor y = log_scale(x);
    CHECK(y.data[0] == doctest::Approx(std::log(1e-12)));
    CHECK(y.data[1] == doctest::Approx(std::log(1.0 + 1e-12)));
    CHECK(y.data[2] == doctest::Approx(std::log(100.0 + 1e-12)));
}

TEST_CASE("spectrum statistics require two samples and floor the scale") {
    CHECK_THROWS_AS(compute_spectrum_stats({}), DataError);
    CHECK_THROWS_AS(compute_spectrum_stats({Tensor::zeros({4, 4})}), DataError);

    // Identical spectra: zero variance everywhere, floored at 1e-8.
    std::vector<Tensor> same(3, Tensor::full({4, 4}, 2.0));
    SpectrumStats st = compute_spectrum_stats(same);
    CHECK(st.samples == 3);
    for (real v : st.mean.data) CHECK(v == doctest::Approx(2.0));
    for (real v : st.stddev.data) CHECK(v == 1e-8);

    std::vector<Tensor> mixed = {Tensor::full({2, 2}, 1.0), Tensor::full({2, 2}, 3.0)};
    SpectrumStats st2 = compute_spectrum_stats(mixed);
    for (real v : st2.mean.data) CHECK(v == doctest::Approx(2.0));
    for (real v : st2.stddev.data) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("normalization whitens the reference set per coefficient") {
    std::vector<Tensor> ref;
    for (int i = 0; i < 40; ++i) ref.push_back(random_plane(6, 6, 100 + i, 10.0));
    SpectrumStats st = compute_spectrum_stats(ref);
    Tensor sum = Tensor::zeros({6, 6}), sumsq = Tensor::zeros({6, 6});
    for (const auto& s : ref) {
        Tensor z = normalize_spectrum(s, st);
        for (std::size_t i = 0; i < z.data.size(); ++i) {
            sum.data[i] += z.data[i];
            sumsq.data[i] += z.data[i] * z.data[i];
        }
    }
    for (std::size_t i = 0; i < sum.data.size(); ++i) {
        CHECK(sum.data[i] / 40.0 == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(sumsq.data[i] / 40.0 == doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK_THROWS_AS(normalize_spectrum(Tensor::zeros({3, 3}), st), ShapeError);
    CHECK_THROWS_AS(normalize_spectrum(Tensor::zeros({6, 6}), SpectrumStats{}), StateError);
}
