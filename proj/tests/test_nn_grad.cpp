#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck.hpp"
#include "lvtos/nn/loss.hpp"

using namespace lvtos;
using namespace lvtos::nn;

namespace {

LayerSpec spec_for(LayerKind kind) {
    LayerSpec s;
    s.kind = kind;
    switch (kind) {
        case LayerKind::conv2d:
            s.kernel = 3;
            s.channels_in = 2;
            s.channels_out = 2;
            break;
        case LayerKind::dilated_conv2d:
            s.kernel = 3;
            s.dilation = 2;
            s.channels_in = 2;
            s.channels_out = 2;
            break;
        case LayerKind::transposed_conv2d:
            s.kernel = 3;
            s.stride = 2;
            s.channels_in = 2;
            s.channels_out = 2;
            break;
        case LayerKind::maxpool2d:
            s.kernel = 3;
            s.stride = 2;
            break;
        case LayerKind::batchnorm:
            s.channels_in = 2;
            break;
        case LayerKind::dense:
            s.channels_in = 12;
            s.channels_out = 5;
            break;
        case LayerKind::shifted_leaky_relu:
            s.t0 = 0.4;
            s.alpha = 0.01;
            break;
        default:
            break;
    }
    return s;
}

Tensor input_for(LayerKind kind, Rng& rng) {
    switch (kind) {
        case LayerKind::dense:
            return gradcheck::kink_safe_tensor({3, 12}, rng);
        case LayerKind::softmax:
            return gradcheck::kink_safe_tensor({2, 4, 2, 2}, rng);
        default:
            return gradcheck::kink_safe_tensor({2, 2, 5, 5}, rng);
    }
}

}  // namespace

TEST_CASE("every layer kind matches central finite differences") {
    const LayerKind kinds[] = {
        LayerKind::conv2d,        LayerKind::dilated_conv2d, LayerKind::transposed_conv2d,
        LayerKind::maxpool2d,     LayerKind::batchnorm,      LayerKind::dense,
        LayerKind::relu,          LayerKind::leaky_relu,     LayerKind::shifted_leaky_relu,
        LayerKind::softmax,
    };
    for (LayerKind kind : kinds) {
        CAPTURE(layer_kind_name(kind));
        for (uint64_t seed = 1; seed <= 5; ++seed) {
            Rng rng(seed);
            auto layer = make_layer(spec_for(kind), layer_kind_name(kind));
            layer->init_params(rng);
            Tensor x = input_for(kind, rng);
            const auto result = gradcheck::check_layer(*layer, x, rng);
            CAPTURE(seed);
            CAPTURE(result.worst);
            CHECK(result.max_rel_err < gradcheck::kRelTol);
        }
    }
}

TEST_CASE("batchnorm inference-mode backward also matches finite differences") {
    Rng rng(31);
    auto layer = make_layer(spec_for(LayerKind::batchnorm), "bn");
    // populate running stats first
    Tensor warm = gradcheck::kink_safe_tensor({4, 2, 3, 3}, rng);
    layer->forward(warm, true);
    Tensor x = gradcheck::kink_safe_tensor({2, 2, 3, 3}, rng);
    const auto result = gradcheck::check_layer(*layer, x, rng, /*training=*/false);
    CHECK(result.max_rel_err < gradcheck::kRelTol);
}

TEST_CASE("dense layer analytic gradient: y = Wx, loss = 1/2 |y|^2 gives dW = y x^T") {
    LayerSpec spec;
    spec.kind = LayerKind::dense;
    spec.channels_in = 3;
    spec.channels_out = 2;
    auto layer = make_layer(spec, "dense");
    Rng rng(4);
    layer->init_params(rng);
    Tensor x({1, 3}, {0.5, -1.0, 2.0});
    const Tensor y = layer->forward(x, true);
    Tensor dy(y.shape());
    for (size_t i = 0; i < y.size(); ++i) dy[i] = y[i];  // d(1/2 |y|^2)/dy = y
    layer->parameters()[0].second->zero_grad();
    layer->parameters()[1].second->zero_grad();
    layer->backward(dy);
    const Tensor& w_grad = *layer->parameters()[0].second;
    for (size_t i = 0; i < 2; ++i) {
        for (size_t j = 0; j < 3; ++j) {
            CHECK(w_grad.grad()[i * 3 + j] == doctest::Approx(y[i] * x[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("zero loss gradient produces zero parameter gradients") {
    Rng rng(9);
    auto layer = make_layer(spec_for(LayerKind::conv2d), "conv");
    layer->init_params(rng);
    Tensor x = gradcheck::kink_safe_tensor({2, 2, 5, 5}, rng);
    const Tensor y = layer->forward(x, true);
    layer->parameters()[0].second->zero_grad();
    layer->parameters()[1].second->zero_grad();
    const Tensor dx = layer->backward(Tensor(y.shape()));
    for (double v : dx.values()) CHECK(v == 0.0);
    for (auto& [name, p] : layer->parameters()) {
        for (double v : p->grad_values()) CHECK(v == 0.0);
    }
}

TEST_CASE("skip-connection graph gradients match finite differences") {
    // small encoder/decoder with a concat junction, the wiring the U-Net uses
    Rng rng(21);
    LayerGraph g({2, 4, 4});
    LayerSpec conv;
    conv.kind = LayerKind::conv2d;
    conv.kernel = 3;
    conv.channels_in = 2;
    conv.channels_out = 2;
    const int skip = g.add("enc", conv);
    LayerSpec pool;
    pool.kind = LayerKind::maxpool2d;
    pool.kernel = 3;
    pool.stride = 2;
    g.add("pool", pool);
    LayerSpec up;
    up.kind = LayerKind::transposed_conv2d;
    up.kernel = 3;
    up.stride = 2;
    up.channels_in = 2;
    up.channels_out = 2;
    g.add("up", up);
    g.add_concat("skip", {static_cast<int>(g.node_count()) - 1, skip});
    LayerSpec merge;
    merge.kind = LayerKind::conv2d;
    merge.kernel = 1;
    merge.channels_in = 4;
    merge.channels_out = 1;
    g.add("merge", merge);
    g.init_params(rng);

    const Tensor x = gradcheck::kink_safe_tensor({2, 2, 4, 4}, rng);
    const auto result = gradcheck::check_graph(g, x, rng);
    CAPTURE(result.worst);
    CHECK(result.max_rel_err < gradcheck::kRelTol);
}

TEST_CASE("graph backward before forward is rejected") {
    LayerGraph g({1, 4, 4});
    LayerSpec relu;
    relu.kind = LayerKind::relu;
    g.add("relu", relu);
    CHECK_THROWS_AS(g.backward(Tensor({1, 1, 4, 4})), std::logic_error);
}

TEST_CASE("graph rejects mismatched input shapes naming the declared shape") {
    LayerGraph g({1, 4, 4});
    LayerSpec relu;
    relu.kind = LayerKind::relu;
    g.add("relu", relu);
    CHECK_THROWS_AS(g.forward(Tensor({2, 1, 5, 4}), false), std::invalid_argument);
    CHECK_NOTHROW(g.forward(Tensor({2, 1, 4, 4}), false));
}

TEST_CASE("losses composed with softmax match finite differences") {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        LayerSpec sm;
        sm.kind = LayerKind::softmax;
        auto softmax = make_layer(sm, "softmax");

        Tensor logits = gradcheck::kink_safe_tensor({2, 3, 2, 2}, rng);
        Tensor onehot({2, 3, 2, 2});
        for (size_t n = 0; n < 2; ++n) {
            for (size_t p = 0; p < 4; ++p) {
                const size_t cls = rng.below(3);
                onehot.data()[(n * 3 + cls) * 4 + p] = 1.0;
            }
        }
        const std::vector<double> weights = {1.0, 2.0, 0.5};

        const auto eval = [&]() {
            const Tensor prob = softmax->forward(logits, true);
            return loss_weighted_ce_soft_dice(prob, onehot, weights).total;
        };

        const Tensor prob = softmax->forward(logits, true);
        Tensor dprob;
        loss_weighted_ce_soft_dice(prob, onehot, weights, &dprob);
        const Tensor dlogits = softmax->backward(dprob);

        gradcheck::Result result;
        gradcheck::check_buffer(logits.data(), logits.size(), eval, dlogits.data(), "logits",
                                result);
        CAPTURE(result.worst);
        CHECK(result.max_rel_err < gradcheck::kRelTol);
    }
}

TEST_CASE("mse gradient matches finite differences") {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed * 13);
        Tensor pred = gradcheck::kink_safe_tensor({3, 6}, rng);
        Tensor target = gradcheck::kink_safe_tensor({3, 6}, rng);
        Tensor grad;
        loss_mse(pred, target, &grad);
        const auto eval = [&]() { return loss_mse(pred, target); };
        gradcheck::Result result;
        gradcheck::check_buffer(pred.data(), pred.size(), eval, grad.data(), "pred", result);
        CHECK(result.max_rel_err < gradcheck::kRelTol);
    }
}
