#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "ganattr/graph.hpp"
#include "ganattr/losses.hpp"
#include "ganattr/rng.hpp"

using namespace ganattr;

namespace {

// A self-contained scalar function of (params, input): forward plus loss.
// Evaluations copy the graph so batchnorm running-stat updates are discarded.
struct Scenario {
    std::string label;
    ModelGraph g;
    Tensor x;
    Tensor ylab;             // binary labels when not multiclass
    std::vector<int> klab;   // class labels otherwise
    bool multiclass = false;
    Mode mode = Mode::Train;
};

real loss_value(ModelGraph g, const Tensor& x, const Scenario& s) {
    Tensor logits = graph_forward(g, x, s.mode);
    return s.multiclass ? softmax_ce(logits, s.klab).loss : sigmoid_bce(logits, s.ylab).loss;
}

struct WorstCase {
    real rel = 0.0;
    std::string where;
};

void check_scenario(const Scenario& s, Rng& pick, WorstCase& worst) {
    const real h = 1e-5;

    ModelGraph g = s.g;
    ForwardTrace trace;
    Tensor logits = graph_forward(g, s.x, s.mode, &trace);
    Tensor dlogits = s.multiclass ? softmax_ce(logits, s.klab).dlogits
                                  : sigmoid_bce(logits, s.ylab).dlogits;
    Gradients grads = graph_backward(g, trace, dlogits);

    auto log_worst = [&](real analytic, real fd, const std::string& where) {
        const real rel =
            std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1.0});
        if (rel > worst.rel) {
            worst.rel = rel;
            worst.where = s.label + ":" + where;
        }
    };

    // Parameter coordinates: every coordinate of small tensors, a random
    // sample of large ones.
    ModelGraph probe = s.g;
    auto params = probe.trainable_params();
    REQUIRE(params.size() == grads.params.size());
    for (std::size_t t = 0; t < params.size(); ++t) {
        const std::size_t n = params[t].value->data.size();
        std::vector<std::size_t> coords;
        if (n <= 24)
            for (std::size_t j = 0; j < n; ++j) coords.push_back(j);
        else
            for (int k = 0; k < 8; ++k)
                coords.push_back(static_cast<std::size_t>(pick.uniform_int(0, static_cast<int>(n) - 1)));
        for (std::size_t j : coords) {
            ModelGraph gp = s.g;
            gp.trainable_params()[t].value->data[j] += h;
            const real up = loss_value(std::move(gp), s.x, s);
            ModelGraph gm = s.g;
            gm.trainable_params()[t].value->data[j] -= h;
            const real dn = loss_value(std::move(gm), s.x, s);
            log_worst(grads.params[t].data[j], (up - dn) / (2.0 * h),
                      params[t].name + "[" + std::to_string(j) + "]");
        }
    }

    // A handful of input coordinates exercises the full dX chain.
    for (int k = 0; k < 6; ++k) {
        const std::size_t j =
            static_cast<std::size_t>(pick.uniform_int(0, static_cast<int>(s.x.data.size()) - 1));
        Tensor xp = s.x;
        xp.data[j] += h;
        const real up = loss_value(s.g, xp, s);
        Tensor xm = s.x;
        xm.data[j] -= h;
        const real dn = loss_value(s.g, xm, s);
        log_worst(grads.input_grad.data[j], (up - dn) / (2.0 * h), "x[" + std::to_string(j) + "]");
    }
}

Tensor random_tensor(const std::vector<int>& shape, Rng& rng, real scale = 1.0) {
    Tensor t(shape);
    for (auto& v : t.data) v = rng.normal(0.0, scale);
    return t;
}

Tensor binary_labels(int b, Rng& rng) {
    Tensor y({b, 1});
    for (auto& v : y.data) v = rng.coin() ? 1.0 : 0.0;
    return y;
}

void randomize(ModelGraph& g, Rng& rng) {
    for (auto& p : g.trainable_params())
        for (auto& v : p.value->data) v = rng.normal(0.0, 0.4);
    // Keep batchnorm scales away from zero so backward paths stay active.
    for (auto& l : g.layers)
        if (l.kind == LayerKind::BatchNorm2d)
            for (auto& v : l.gamma.data) v = 1.0 + 0.3 * rng.normal();
}

Scenario make_scenario(int menu, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "grad-scenario"));
    Scenario s;
    s.label = "menu" + std::to_string(menu) + "/seed" + std::to_string(seed);
    const int B = 3;
    switch (menu) {
        case 0: {  // conv s1 with bias, gap head
            s.g.layers = {Layer::conv2d("c1", 2, 4, 1, true), Layer::leaky_relu("a1"),
                          Layer::global_avg_pool("gap"), Layer::dense("fc", 4, 1)};
            s.x = random_tensor({B, 2, 6, 6}, rng);
            break;
        }
        case 1: {  // conv s2 + batchnorm in train mode
            s.g.layers = {Layer::conv2d("c1", 2, 3, 2, false), Layer::batchnorm2d("b1", 3),
                          Layer::leaky_relu("a1"), Layer::global_avg_pool("gap"),
                          Layer::dense("fc", 3, 1)};
            s.x = random_tensor({B, 2, 7, 7}, rng);
            break;
        }
        case 2: {  // avg pool into a flattened multiclass head
            s.g.layers = {Layer::conv2d("c1", 1, 3, 1, true), Layer::leaky_relu("a1"),
                          Layer::avg_pool2d("p1", 2), Layer::dense("fc", 3 * 3 * 3, 3)};
            s.x = random_tensor({B, 1, 6, 6}, rng);
            s.multiclass = true;
            break;
        }
        case 3: {  // dense stack only
            s.g.layers = {Layer::dense("d1", 10, 6), Layer::leaky_relu("a1"),
                          Layer::dense("d2", 6, 1)};
            s.x = random_tensor({B, 10}, rng);
            break;
        }
        case 4: {  // batchnorm directly on the input
            s.g.layers = {Layer::batchnorm2d("b1", 2), Layer::leaky_relu("a1"),
                          Layer::global_avg_pool("gap"), Layer::dense("fc", 2, 1)};
            s.x = random_tensor({B, 2, 5, 5}, rng, 2.0);
            break;
        }
        case 5: {  // two-conv trunk
            s.g.layers = {Layer::conv2d("c1", 2, 4, 2, true), Layer::leaky_relu("a1"),
                          Layer::conv2d("c2", 4, 3, 1, true), Layer::leaky_relu("a2"),
                          Layer::global_avg_pool("gap"), Layer::dense("fc", 3, 1)};
            s.x = random_tensor({B, 2, 8, 8}, rng);
            break;
        }
        case 6: {  // eval-mode batchnorm, the localization backward path
            s.g.layers = {Layer::conv2d("c1", 2, 3, 1, false), Layer::batchnorm2d("b1", 3),
                          Layer::leaky_relu("a1"), Layer::global_avg_pool("gap"),
                          Layer::dense("fc", 3, 1)};
            s.x = random_tensor({B, 2, 5, 5}, rng);
            s.mode = Mode::Eval;
            break;
        }
        default: {  // pooled multiclass head over two classes of channels
            s.g.layers = {Layer::avg_pool2d("p1", 2), Layer::dense("fc", 2 * 3 * 3, 4)};
            s.x = random_tensor({B, 2, 6, 6}, rng);
            s.multiclass = true;
            break;
        }
    }
    randomize(s.g, rng);
    if (menu == 6) {
        // Populated running statistics so eval mode is nontrivial.
        for (auto& l : s.g.layers)
            if (l.kind == LayerKind::BatchNorm2d) {
                for (auto& v : l.running_mean.data) v = 0.3 * rng.normal();
                for (auto& v : l.running_var.data) v = 1.0 + 0.5 * rng.u01();
            }
    }
    if (s.multiclass) {
        const int K = s.g.layers.back().weight.dim(0);
        for (int b = 0; b < B; ++b) s.klab.push_back(rng.uniform_int(0, K - 1));
    } else {
        s.ylab = binary_labels(B, rng);
    }
    return s;
}

}  // namespace

TEST_CASE("backward matches central finite differences across 112 configurations") {
    Rng pick(424242);
    WorstCase worst;
    int configs = 0;
    for (int menu = 0; menu < 8; ++menu)
        for (std::uint64_t seed = 1; seed <= 14; ++seed) {
            Scenario s = make_scenario(menu, seed * 977 + menu);
            check_scenario(s, pick, worst);
            ++configs;
        }
    CHECK(configs >= 100);
    CAPTURE(worst.where);
    CHECK(worst.rel < 1e-5);
}

TEST_CASE("zero upstream gradient yields zero parameter gradients") {
    Scenario s = make_scenario(1, 99);
    ModelGraph g = s.g;
    ForwardTrace trace;
    Tensor logits = graph_forward(g, s.x, Mode::Train, &trace);
    Tensor dlogits = Tensor::zeros(logits.shape);
    Gradients grads = graph_backward(g, trace, dlogits);
    for (const auto& t : grads.params)
        for (real v : t.data) CHECK(v == 0.0);
    for (real v : grads.input_grad.data) CHECK(v == 0.0);
}

TEST_CASE("backward without a forward trace is rejected") {
    Scenario s = make_scenario(0, 7);
    ModelGraph g = s.g;
    ForwardTrace trace;  // never filled
    Tensor dlogits = Tensor::zeros({3, 1});
    CHECK_THROWS_AS(graph_backward(g, trace, dlogits), StateError);
}
