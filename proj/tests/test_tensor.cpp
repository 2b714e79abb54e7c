#include <cmath>

#include "doctest.h"
#include "ganattr/errors.hpp"
#include "ganattr/tensor.hpp"

using namespace ganattr;

TEST_CASE("tensor construction and indexing") {
    Tensor t({2, 3, 4, 5});
    CHECK(t.numel() == 120);
    CHECK(t.ndim() == 4);
    CHECK(t.dim(2) == 4);
    for (auto v : t.data) CHECK(v == 0.0);

    t.at({1, 2, 3, 4}) = 7.0;
    CHECK(t.data[119] == 7.0);
    CHECK(t.idx4(1, 2, 3, 4) == 119);
    CHECK(t.at({0, 0, 0, 1}) == 0.0);
}

TEST_CASE("tensor shape validation") {
    CHECK_THROWS_AS(Tensor({2, -1}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
    std::vector<real> wrong(5, 1.0);
    CHECK_THROWS_AS(Tensor({2, 3}, wrong), ShapeError);
    Tensor ok({2, 3}, std::vector<real>(6, 1.5));
    CHECK(ok.data[5] == 1.5);
}

TEST_CASE("finite detects NaN and infinity") {
    Tensor t = Tensor::full({3}, 1.0);
    CHECK(t.finite());
    t.data[1] = std::nan("");
    CHECK_FALSE(t.finite());
    t.data[1] = 1.0;
    t.data[2] = INFINITY;
    CHECK_FALSE(t.finite());
}

TEST_CASE("bitwise equality and max difference") {
    Tensor a = Tensor::full({4}, 0.1);
    Tensor b = a;
    CHECK(bitwise_equal(a, b));
    b.data[2] += 1e-13;
    CHECK_FALSE(bitwise_equal(a, b));
    CHECK(max_abs_diff(a, b) == doctest::Approx(1e-13).epsilon(1e-3));
    Tensor c({2, 2}, a.data);
    CHECK_FALSE(bitwise_equal(a, c));  // same payload, different shape
}
