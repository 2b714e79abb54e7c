#include <cmath>
#include <vector>

#include "doctest.h"
#include "ganattr/errors.hpp"
#include "ganattr/layers.hpp"
#include "ganattr/parallel.hpp"
#include "ganattr/rng.hpp"

using namespace ganattr;

namespace {

Tensor random_tensor(const std::vector<int>& shape, Rng& rng, real scale = 1.0) {
    Tensor t(shape);
    for (auto& v : t.data) v = rng.normal(0.0, scale);
    return t;
}

// Direct six-loop convolution: 3x3 kernel, zero padding 1.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor* bias, int stride) {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int F = w.dim(0);
    const int OH = (H + 2 - 3) / stride + 1, OW = (W + 2 - 3) / stride + 1;
    Tensor y({B, F, OH, OW});
    for (int b = 0; b < B; ++b)
        for (int f = 0; f < F; ++f)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    real s = bias ? bias->data[f] : 0.0;
                    for (int c = 0; c < C; ++c)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const int iy = oy * stride + ky - 1;
                                const int ix = ox * stride + kx - 1;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                s += x.at({b, c, iy, ix}) * w.at({f, c, ky, kx});
                            }
                    y.at({b, f, oy, ox}) = s;
                }
    return y;
}

}  // namespace

TEST_CASE("conv2d matches the direct loop oracle") {
    Rng rng(101);
    struct Cfg {
        int B, C, H, W, F, stride;
        bool bias;
    };
    const Cfg cfgs[] = {
        {2, 3, 8, 8, 4, 1, true},  {1, 1, 5, 7, 2, 1, false}, {3, 2, 9, 9, 5, 2, true},
        {2, 4, 6, 10, 3, 2, false}, {1, 3, 16, 16, 8, 2, true}, {2, 2, 7, 4, 6, 1, true},
    };
    for (const auto& c : cfgs) {
        CAPTURE(c.H);
        CAPTURE(c.stride);
        Layer l = Layer::conv2d("c", c.C, c.F, c.stride, c.bias);
        l.weight = random_tensor(l.weight.shape, rng, 0.5);
        if (c.bias) l.bias = random_tensor(l.bias.shape, rng, 0.5);
        Tensor x = random_tensor({c.B, c.C, c.H, c.W}, rng);
        Tensor got = conv2d_forward(x, l);
        Tensor want = conv_oracle(x, l.weight, c.bias ? &l.bias : nullptr, c.stride);
        REQUIRE(got.shape == want.shape);
        CHECK(max_abs_diff(got, want) < 1e-12);
    }
}

TEST_CASE("conv2d output extent follows ceil division for stride 2") {
    Rng rng(55);
    for (int h : {4, 5, 8, 17, 31, 32, 63, 64, 97, 128, 255, 256, 257}) {
        Layer s2 = Layer::conv2d("c", 1, 1, 2, false);
        Layer s1 = Layer::conv2d("c", 1, 1, 1, false);
        auto out2 = layer_output_shape(s2, {1, 1, h, h});
        auto out1 = layer_output_shape(s1, {1, 1, h, h});
        CHECK(out2[2] == (h + 1) / 2);  // ceil(h/2) with padding 1
        CHECK(out1[2] == h);
    }
    (void)rng;
}

TEST_CASE("conv2d rejects channel mismatches") {
    Layer l = Layer::conv2d("c", 3, 4, 1, true);
    Tensor x = Tensor::zeros({2, 2, 8, 8});
    CHECK_THROWS_AS(conv2d_forward(x, l), ShapeError);
    CHECK_THROWS_AS(conv2d_forward(Tensor::zeros({2, 8, 8}), l), ShapeError);
}

TEST_CASE("conv2d forward and backward are identical across thread budgets") {
    Rng rng(77);
    Layer l = Layer::conv2d("c", 3, 8, 2, true);
    l.weight = random_tensor(l.weight.shape, rng, 0.3);
    l.bias = random_tensor(l.bias.shape, rng, 0.3);
    Tensor x = random_tensor({5, 3, 12, 12}, rng);
    Tensor dy = random_tensor(layer_output_shape(l, x.shape), rng);

    set_local_thread_budget(1);
    Tensor y1 = conv2d_forward(x, l);
    Tensor dw1 = Tensor::zeros(l.weight.shape), db1 = Tensor::zeros(l.bias.shape);
    Tensor dx1 = conv2d_backward(x, l, dy, &dw1, &db1);

    set_local_thread_budget(4);
    Tensor y4 = conv2d_forward(x, l);
    Tensor dw4 = Tensor::zeros(l.weight.shape), db4 = Tensor::zeros(l.bias.shape);
    Tensor dx4 = conv2d_backward(x, l, dy, &dw4, &db4);
    set_local_thread_budget(0);

    CHECK(bitwise_equal(y1, y4));
    CHECK(bitwise_equal(dx1, dx4));
    CHECK(bitwise_equal(dw1, dw4));
    CHECK(bitwise_equal(db1, db4));
}

TEST_CASE("batchnorm2d training pass matches per-channel statistics") {
    Rng rng(202);
    const int B = 4, C = 3, H = 5, W = 6;
    Layer l = Layer::batchnorm2d("bn", C);
    l.gamma = random_tensor({C}, rng, 0.5);
    l.beta = random_tensor({C}, rng, 0.5);
    for (auto& g : l.gamma.data) g += 1.0;
    Tensor x = random_tensor({B, C, H, W}, rng, 2.0);

    Layer live = l;
    BatchNormCache cache;
    Tensor y = batchnorm2d_forward(x, live, true, &cache);

    const real n = B * H * W;
    for (int c = 0; c < C; ++c) {
        real sum = 0.0, sumsq = 0.0;
        for (int b = 0; b < B; ++b)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) sum += x.at({b, c, i, j});
        const real mean = sum / n;
        for (int b = 0; b < B; ++b)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const real d = x.at({b, c, i, j}) - mean;
                    sumsq += d * d;
                }
        const real var = sumsq / n;  // biased, matches the running update
        for (int b = 0; b < B; ++b)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const real want = l.gamma.data[c] * (x.at({b, c, i, j}) - mean) /
                                          std::sqrt(var + l.epsilon) +
                                      l.beta.data[c];
                    CHECK(y.at({b, c, i, j}) == doctest::Approx(want).epsilon(1e-10));
                }
        // Retained fraction 0.9 of the old statistic, 0.1 of the batch.
        CHECK(live.running_mean.data[c] == doctest::Approx(0.1 * mean).epsilon(1e-10));
        CHECK(live.running_var.data[c] == doctest::Approx(0.9 + 0.1 * var).epsilon(1e-10));
        CHECK(cache.inv_std.data[c] == doctest::Approx(1.0 / std::sqrt(var + l.epsilon)));
    }

    // Per-channel output statistics are normalized before scale and shift.
    for (int c = 0; c < C; ++c) {
        real sum = 0.0, sumsq = 0.0;
        for (int b = 0; b < B; ++b)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const real v = cache.xhat.at({b, c, i, j});
                    sum += v;
                    sumsq += v * v;
                }
        CHECK(sum / n == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(sumsq / n == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("batchnorm2d eval equals train once running stats hold the batch stats") {
    Rng rng(203);
    Layer l = Layer::batchnorm2d("bn", 4);
    l.momentum = 0.0;  // running stats become exactly the batch stats
    Tensor x = random_tensor({3, 4, 6, 6}, rng, 1.5);
    Layer live = l;
    Tensor ytrain = batchnorm2d_forward(x, live, true, nullptr);
    Tensor yeval = batchnorm2d_forward(x, live, false, nullptr);
    CHECK(max_abs_diff(ytrain, yeval) < 1e-12);
}

TEST_CASE("batchnorm2d refuses training statistics on a single image") {
    Layer l = Layer::batchnorm2d("bn", 2);
    Tensor x = Tensor::zeros({1, 2, 4, 4});
    CHECK_THROWS_AS(batchnorm2d_forward(x, l, true, nullptr), ValueError);
    CHECK_NOTHROW(batchnorm2d_forward(x, l, false, nullptr));
}

TEST_CASE("batchnorm2d eval mode leaves running statistics untouched") {
    Rng rng(204);
    Layer l = Layer::batchnorm2d("bn", 3);
    l.running_mean = random_tensor({3}, rng);
    l.running_var = Tensor::full({3}, 2.0);
    Layer before = l;
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    batchnorm2d_forward(x, l, false, nullptr);
    CHECK(bitwise_equal(l.running_mean, before.running_mean));
    CHECK(bitwise_equal(l.running_var, before.running_var));
}

TEST_CASE("leaky_relu applies the pinned slope below zero") {
    Tensor x({5}, {-2.0, -0.5, 0.0, 0.5, 2.0});
    Tensor y = leaky_relu_forward(x, 0.2);
    CHECK(y.data[0] == doctest::Approx(-0.4));
    CHECK(y.data[1] == doctest::Approx(-0.1));
    CHECK(y.data[2] == 0.0);
    CHECK(y.data[3] == 0.5);
    CHECK(y.data[4] == 2.0);
    Tensor dy = Tensor::full({5}, 1.0);
    Tensor dx = leaky_relu_backward(x, 0.2, dy);
    CHECK(dx.data[0] == doctest::Approx(0.2));
    CHECK(dx.data[4] == doctest::Approx(1.0));
}

TEST_CASE("avg_pool2d averages blocks and rejects indivisible extents") {
    Rng rng(301);
    Tensor x = random_tensor({2, 3, 6, 8}, rng);
    Tensor y = avg_pool2d_forward(x, 2);
    REQUIRE(y.shape == std::vector<int>{2, 3, 3, 4});
    for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 3; ++c)
            for (int oy = 0; oy < 3; ++oy)
                for (int ox = 0; ox < 4; ++ox) {
                    const real want = (x.at({b, c, 2 * oy, 2 * ox}) + x.at({b, c, 2 * oy, 2 * ox + 1}) +
                                       x.at({b, c, 2 * oy + 1, 2 * ox}) +
                                       x.at({b, c, 2 * oy + 1, 2 * ox + 1})) /
                                      4.0;
                    CHECK(y.at({b, c, oy, ox}) == doctest::Approx(want).epsilon(1e-12));
                }
    Layer bad = Layer::avg_pool2d("p", 4);
    CHECK_THROWS_AS(layer_output_shape(bad, {2, 3, 6, 8}), ShapeError);
}

TEST_CASE("global_avg_pool reduces each channel to its mean") {
    Rng rng(302);
    Tensor x = random_tensor({2, 4, 5, 5}, rng);
    Tensor y = global_avg_pool_forward(x);
    REQUIRE(y.shape == std::vector<int>{2, 4});
    for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 4; ++c) {
            real s = 0.0;
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) s += x.at({b, c, i, j});
            CHECK(y.at({b, c}) == doctest::Approx(s / 25.0).epsilon(1e-12));
        }
}

TEST_CASE("dense matches the loop oracle and flattens 4D inputs") {
    Rng rng(303);
    Layer l = Layer::dense("d", 24, 3);
    l.weight = random_tensor(l.weight.shape, rng);
    l.bias = random_tensor(l.bias.shape, rng);
    Tensor x4 = random_tensor({2, 2, 3, 4}, rng);
    Tensor x2({2, 24}, x4.data);
    Tensor y4 = dense_forward(x4, l);
    Tensor y2 = dense_forward(x2, l);
    CHECK(bitwise_equal(y4, y2));
    for (int b = 0; b < 2; ++b)
        for (int m = 0; m < 3; ++m) {
            real s = l.bias.data[m];
            for (int n = 0; n < 24; ++n) s += l.weight.at({m, n}) * x2.at({b, n});
            CHECK(y2.at({b, m}) == doctest::Approx(s).epsilon(1e-12));
        }
    Layer wrong = Layer::dense("d", 25, 3);
    CHECK_THROWS_AS(dense_forward(x4, wrong), ShapeError);
}
