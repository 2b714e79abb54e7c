#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ganattr/errors.hpp"
#include "ganattr/model_zoo.hpp"
#include "ganattr/rng.hpp"

using namespace ganattr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path d = fs::temp_directory_path() / "ganattr-zoo-tests";
    fs::create_directories(d);
    return d;
}

std::vector<int> shape_at_layer(const ModelGraph& g, const std::vector<int>& in, int upto) {
    std::vector<int> cur = in;
    for (int i = 0; i < upto; ++i) cur = layer_output_shape(g.layers[static_cast<std::size_t>(i)], cur);
    return cur;
}

std::string file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("detector trunk geometry: eight conv blocks, four halvings") {
    ModelGraph g = build_primary(Representation::Pixel, 128);
    int convs = 0, bns = 0;
    for (const auto& l : g.layers) {
        if (l.kind == LayerKind::Conv2d) ++convs;
        if (l.kind == LayerKind::BatchNorm2d) ++bns;
    }
    CHECK(convs == 8);
    CHECK(bns == 7);  // every conv except the first
    CHECK(g.layers.front().has_bias);  // conv1 carries the only conv bias
    // Final conv activation block leaves 128 maps at 8x8, then GAP + dense.
    const int gap_index = static_cast<int>(g.layers.size()) - 2;
    CHECK(g.layers[static_cast<std::size_t>(gap_index)].kind == LayerKind::GlobalAvgPool);
    auto feat = shape_at_layer(g, {1, 3, 128, 128}, gap_index);
    CHECK(feat == std::vector<int>{1, 128, 8, 8});
    CHECK(g.output_shape({1, 3, 128, 128}) == std::vector<int>{1, 1});
}

TEST_CASE("pixel detector parameter count is resolution independent") {
    ModelGraph a = build_primary(Representation::Pixel, 64);
    ModelGraph b = build_primary(Representation::Pixel, 128);
    ModelGraph c = build_primary(Representation::Pixel, 256);
    CHECK(a.parameter_count() == 294113);
    CHECK(b.parameter_count() == a.parameter_count());
    CHECK(c.parameter_count() == a.parameter_count());
}

TEST_CASE("one weight set serves 64, 128 and 256 inputs") {
    ModelGraph g = build_primary(Representation::Pixel, 128);
    Rng rng(2021);
    init_weights(g, 0.02, rng);
    for (int s : {64, 128, 256}) {
        Tensor x = Tensor::zeros({2, 3, s, s});
        Rng noise(s);
        for (auto& v : x.data) v = noise.uniform(-1.0, 1.0);
        Tensor y = graph_forward(g, x, Mode::Eval);
        CHECK(y.shape == std::vector<int>{2, 1});
        CHECK(y.finite());
    }
}

TEST_CASE("spectrum variant takes one channel and a flattened head") {
    ModelGraph g = build_primary(Representation::Dct, 64);
    CHECK(g.input.channels == 1);
    CHECK(g.head == HeadKind::FlattenDense);
    CHECK(g.output_shape({1, 1, 64, 64}) == std::vector<int>{1, 1});
    CHECK(g.layers.back().weight.dim(1) == 128 * 4 * 4);
    CHECK_THROWS_AS(build_primary(Representation::Pixel, 100), ValueError);
}

TEST_CASE("secondary consumes the conv-4 branch features") {
    ModelGraph primary = build_primary(Representation::Pixel, 128);
    ModelGraph sec = build_secondary(primary, "gm1");
    CHECK(sec.input.channels == 32);
    CHECK(sec.input.resolution == 32);
    CHECK(sec.output_shape({1, 32, 32, 32}) == std::vector<int>{1, 1});

    ModelGraph p64 = build_primary(Representation::Pixel, 64);
    ModelGraph s64 = build_secondary(p64, "gm1");
    CHECK(s64.input.resolution == 16);

    ModelGraph headless = build_primary(Representation::Pixel, 64);
    headless.branch_conv_index = 0;
    CHECK_THROWS_AS(build_secondary(headless, "x"), StateError);
}

TEST_CASE("cached branch features reproduce the composed forward bitwise") {
    ModelGraph primary = build_primary(Representation::Pixel, 64);
    Rng rng(7);
    init_weights(primary, 0.02, rng);
    ModelGraph sec = build_secondary(primary, "gm1");
    init_weights(sec, 0.02, rng);

    Tensor x({2, 3, 64, 64});
    Rng noise(12);
    for (auto& v : x.data) v = noise.uniform(-1.0, 1.0);

    const int cut = primary.branch_cut_layer();
    Tensor feats = graph_forward_range(primary, x, 0, cut, Mode::Eval);
    CHECK(feats.shape == std::vector<int>{2, 32, 16, 16});
    Tensor via_cache = graph_forward(sec, feats, Mode::Eval);
    Tensor feats_again = graph_forward_range(primary, x, 0, cut, Mode::Eval);
    Tensor recomputed = graph_forward(sec, feats_again, Mode::Eval);
    CHECK(bitwise_equal(via_cache, recomputed));
}

TEST_CASE("secondaries hold independent weights") {
    ModelGraph primary = build_primary(Representation::Pixel, 64);
    ModelGraph s1 = build_secondary(primary, "gm1");
    ModelGraph s2 = build_secondary(primary, "gm2");
    Rng rng(1);
    init_weights(s1, 0.02, rng);
    // s2 still zero-initialized; shapes identical, storage disjoint.
    auto p1 = s1.trainable_params(), p2 = s2.trainable_params();
    REQUIRE(p1.size() == p2.size());
    bool any_nonzero = false;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].value->shape == p2[i].value->shape);
        for (real v : p1[i].value->data) any_nonzero |= (v != 0.0);
        for (real v : p2[i].value->data)
            if (p2[i].name.find("gamma") == std::string::npos &&
                p2[i].name.find("rvar") == std::string::npos)
                CHECK(v == 0.0);
    }
    CHECK(any_nonzero);
}

TEST_CASE("baseline parameter budgets bracket the shared-trunk detector at 128") {
    ModelGraph proposed = build_primary(Representation::Pixel, 128);
    ModelGraph small = build_baseline("gandct-conv", DecisionKind::Sigmoid, 1,
                                      Representation::Pixel, 128);
    ModelGraph big = build_baseline("ganfp-postpool", DecisionKind::Sigmoid, 1,
                                    Representation::Pixel, 128);
    CHECK(small.parameter_count() == 319585);
    CHECK(big.parameter_count() == 942379);
    CHECK(proposed.parameter_count() < small.parameter_count());
    CHECK(small.parameter_count() < big.parameter_count());
    CHECK(big.parameter_count() < 9000000);
    const double ratio = static_cast<double>(big.parameter_count()) /
                         static_cast<double>(proposed.parameter_count());
    CHECK(ratio > 3.0);
    CHECK(ratio < 3.5);
}

TEST_CASE("postpool baseline runs its trunk at quarter resolution") {
    ModelGraph g = build_baseline("ganfp-postpool", DecisionKind::Sigmoid, 1,
                                  Representation::Pixel, 128);
    CHECK(shape_at_layer(g, {1, 3, 128, 128}, 2) == std::vector<int>{1, 3, 32, 32});
    CHECK(g.output_shape({1, 3, 128, 128}) == std::vector<int>{1, 1});
}

TEST_CASE("baseline softmax head emits one logit per class") {
    ModelGraph g = build_baseline("gandct-conv", DecisionKind::Softmax, 5,
                                  Representation::Pixel, 64);
    CHECK(g.output_shape({1, 3, 64, 64}) == std::vector<int>{1, 5});
    CHECK_THROWS_AS(build_baseline("resnet", DecisionKind::Sigmoid, 1, Representation::Pixel, 64),
                    ValueError);
    CHECK_THROWS_AS(build_baseline("gandct-conv", DecisionKind::Sigmoid, 4,
                                   Representation::Pixel, 64),
                    ValueError);
}

TEST_CASE("bundle round trip is bitwise stable") {
    ModelBundle bundle;
    bundle.primary = build_primary(Representation::Pixel, 64);
    Rng rng(5);
    init_weights(bundle.primary, 0.02, rng);
    for (const char* name : {"gm1", "gm2", "gm3"}) {
        ModelGraph s = build_secondary(bundle.primary, name);
        init_weights(s, 0.02, rng);
        bundle.add_secondary(std::move(s));
    }
    const auto path = (temp_dir() / "roundtrip.gab").string();
    save_bundle(bundle, path);

    ModelBundle back = load_bundle(path);
    CHECK(back.secondaries.size() == 3);
    CHECK(back.find_secondary("gm2") != nullptr);
    CHECK(back.find_secondary("gm4") == nullptr);

    // After the save's quantization, memory and file agree exactly.
    auto want = bundle.primary.all_state();
    auto got = back.primary.all_state();
    REQUIRE(want.size() == got.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(want[i].name == got[i].name);
        CHECK(bitwise_equal(*want[i].value, *got[i].value));
    }
    for (const char* name : {"gm1", "gm2", "gm3"}) {
        auto a = bundle.find_secondary(name)->all_state();
        auto b = back.find_secondary(name)->all_state();
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(bitwise_equal(*a[i].value, *b[i].value));
    }

    // Saving the reloaded bundle reproduces the file byte for byte.
    const auto path2 = (temp_dir() / "roundtrip2.gab").string();
    save_bundle(back, path2);
    CHECK(file_bytes(path) == file_bytes(path2));
}

TEST_CASE("bundle carries spectrum statistics when present") {
    ModelBundle bundle;
    bundle.primary = build_primary(Representation::Dct, 64);
    Rng rng(9);
    init_weights(bundle.primary, 0.02, rng);
    bundle.stats.samples = 10;
    bundle.stats.mean = Tensor({1, 64, 64});
    bundle.stats.stddev = Tensor::full({1, 64, 64}, 1.0);
    for (auto& v : bundle.stats.mean.data) v = rng.normal();
    const auto path = (temp_dir() / "stats.gab").string();
    save_bundle(bundle, path);
    ModelBundle back = load_bundle(path);
    CHECK(back.stats.samples == 10);
    CHECK(bitwise_equal(back.stats.mean, bundle.stats.mean));
    CHECK(bitwise_equal(back.stats.stddev, bundle.stats.stddev));
}

TEST_CASE("bundle corruption, truncation and version drift raise distinct errors") {
    ModelBundle bundle;
    bundle.primary = build_primary(Representation::Pixel, 64);
    Rng rng(3);
    init_weights(bundle.primary, 0.02, rng);
    const auto path = (temp_dir() / "victim.gab").string();
    save_bundle(bundle, path);
    const std::string original = file_bytes(path);

    auto write_variant = [&](std::string bytes, const char* name) {
        const auto p = (temp_dir() / name).string();
        std::ofstream f(p, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.close();
        return p;
    };

    // Flip one byte deep inside the tensor payload.
    std::string corrupt = original;
    corrupt[corrupt.size() - 100] ^= 0x40;
    CHECK_THROWS_AS(load_bundle(write_variant(corrupt, "corrupt.gab")), DigestError);

    std::string truncated = original.substr(0, original.size() - 1000);
    CHECK_THROWS_AS(load_bundle(write_variant(truncated, "truncated.gab")), FormatError);

    std::string reversioned = original;
    reversioned[8] = 9;  // format version field
    CHECK_THROWS_AS(load_bundle(write_variant(reversioned, "version.gab")), FormatError);

    std::string unmagic = original;
    unmagic[0] = 'X';
    CHECK_THROWS_AS(load_bundle(write_variant(unmagic, "magic.gab")), FormatError);

    CHECK_THROWS_AS(load_bundle((temp_dir() / "absent.gab").string()), IoError);
}

TEST_CASE("duplicate secondary names are rejected") {
    ModelBundle bundle;
    bundle.primary = build_primary(Representation::Pixel, 64);
    bundle.add_secondary(build_secondary(bundle.primary, "gm1"));
    CHECK_THROWS_AS(bundle.add_secondary(build_secondary(bundle.primary, "gm1")), ValueError);
}

TEST_CASE("weight digest tracks content and init is seed deterministic") {
    ModelGraph a = build_primary(Representation::Pixel, 64);
    ModelGraph b = build_primary(Representation::Pixel, 64);
    Rng r1(2021), r2(2021), r3(1000);
    init_weights(a, 0.02, r1);
    init_weights(b, 0.02, r2);
    CHECK(weight_digest(a) == weight_digest(b));
    init_weights(b, 0.02, r3);
    CHECK(weight_digest(a) != weight_digest(b));
    a.layers[0].weight.data[0] += 1e-9;
    CHECK(weight_digest(a) != weight_digest(b));
}
