#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lvtos/nn/layers.hpp"
#include "lvtos/rng.hpp"

using namespace lvtos;
using namespace lvtos::nn;

namespace {

LayerSpec conv_spec(int cin, int cout, int k, int stride = 1, int dilation = 1,
                    Padding pad = Padding::same) {
    LayerSpec s;
    s.kind = dilation > 1 ? LayerKind::dilated_conv2d : LayerKind::conv2d;
    s.kernel = k;
    s.stride = stride;
    s.dilation = dilation;
    s.channels_in = cin;
    s.channels_out = cout;
    s.padding = pad;
    return s;
}

// direct quadruple-loop convolution, the oracle for the im2col path
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, const LayerSpec& spec) {
    const ConvGeom g = resolve_conv_geom(static_cast<int>(x.dim(2)), static_cast<int>(x.dim(3)),
                                         spec, "oracle");
    const size_t n = x.dim(0);
    const int cin = spec.channels_in, cout = spec.channels_out;
    Tensor y({n, static_cast<size_t>(cout), static_cast<size_t>(g.out_h),
              static_cast<size_t>(g.out_w)});
    for (size_t i = 0; i < n; ++i) {
        for (int co = 0; co < cout; ++co) {
            for (int oy = 0; oy < g.out_h; ++oy) {
                for (int ox = 0; ox < g.out_w; ++ox) {
                    double acc = b[static_cast<size_t>(co)];
                    for (int ci = 0; ci < cin; ++ci) {
                        for (int ky = 0; ky < g.kernel; ++ky) {
                            for (int kx = 0; kx < g.kernel; ++kx) {
                                const int iy = oy * g.stride - g.pad_top + ky * g.dilation;
                                const int ix = ox * g.stride - g.pad_left + kx * g.dilation;
                                if (iy < 0 || ix < 0 || iy >= g.in_h || ix >= g.in_w) continue;
                                acc += x.at4(i, static_cast<size_t>(ci), static_cast<size_t>(iy),
                                             static_cast<size_t>(ix)) *
                                       w.at4(static_cast<size_t>(co), static_cast<size_t>(ci),
                                             static_cast<size_t>(ky), static_cast<size_t>(kx));
                            }
                        }
                    }
                    y.at4(i, static_cast<size_t>(co), static_cast<size_t>(oy),
                          static_cast<size_t>(ox)) = acc;
                }
            }
        }
    }
    return y;
}

// direct-sum transposed convolution oracle
Tensor naive_tconv(const Tensor& x, const Tensor& w, const Tensor& b, const LayerSpec& spec) {
    const ConvGeom g = resolve_transposed_geom(static_cast<int>(x.dim(2)),
                                               static_cast<int>(x.dim(3)), spec, "oracle");
    const size_t n = x.dim(0);
    const int cin = spec.channels_in, cout = spec.channels_out;
    Tensor y({n, static_cast<size_t>(cout), static_cast<size_t>(g.in_h),
              static_cast<size_t>(g.in_w)});
    for (size_t i = 0; i < n; ++i) {
        for (int co = 0; co < cout; ++co) {
            for (size_t p = 0; p < static_cast<size_t>(g.in_h) * g.in_w; ++p) {
                y.data()[(i * cout + co) * g.in_h * g.in_w + p] = b[static_cast<size_t>(co)];
            }
        }
        for (int ci = 0; ci < cin; ++ci) {
            for (int iy = 0; iy < g.out_h; ++iy) {
                for (int ix = 0; ix < g.out_w; ++ix) {
                    const double v = x.at4(i, static_cast<size_t>(ci), static_cast<size_t>(iy),
                                           static_cast<size_t>(ix));
                    for (int co = 0; co < cout; ++co) {
                        for (int ky = 0; ky < g.kernel; ++ky) {
                            for (int kx = 0; kx < g.kernel; ++kx) {
                                const int oy = iy * g.stride - g.pad_top + ky * g.dilation;
                                const int ox = ix * g.stride - g.pad_left + kx * g.dilation;
                                if (oy < 0 || ox < 0 || oy >= g.in_h || ox >= g.in_w) continue;
                                y.at4(i, static_cast<size_t>(co), static_cast<size_t>(oy),
                                      static_cast<size_t>(ox)) +=
                                    v * w.at4(static_cast<size_t>(ci), static_cast<size_t>(co),
                                              static_cast<size_t>(ky), static_cast<size_t>(kx));
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

}  // namespace

TEST_CASE("conv2d: all-ones 3x3 kernel on constant-1 5x5 input, valid padding") {
    auto layer = make_layer(conv_spec(1, 1, 3, 1, 1, Padding::valid), "conv");
    auto params = layer->parameters();
    params[0].second->fill(1.0);
    params[1].second->fill(0.0);
    const Tensor x = Tensor::full({1, 1, 5, 5}, 1.0);
    const Tensor y = layer->forward(x, false);
    REQUIRE(y.shape() == std::vector<size_t>{1, 1, 3, 3});
    for (size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("conv2d matches the direct-sum oracle across geometries") {
    Rng rng(11);
    struct Geo {
        int cin, cout, k, stride, dilation;
        Padding pad;
    };
    const Geo cases[] = {
        {2, 3, 3, 1, 1, Padding::same},  {1, 2, 3, 2, 1, Padding::same},
        {2, 2, 3, 1, 2, Padding::same},  {3, 1, 1, 1, 1, Padding::same},
        {2, 2, 3, 1, 1, Padding::valid}, {1, 1, 2, 2, 1, Padding::valid},
    };
    for (const Geo& geo : cases) {
        const LayerSpec spec = conv_spec(geo.cin, geo.cout, geo.k, geo.stride, geo.dilation,
                                         geo.pad);
        auto layer = make_layer(spec, "conv");
        layer->init_params(rng);
        Tensor x({2, static_cast<size_t>(geo.cin), 6, 5});
        for (size_t i = 0; i < x.size(); ++i) x[i] = rng.gauss();
        const Tensor got = layer->forward(x, false);
        auto params = layer->parameters();
        const Tensor want = naive_conv(x, *params[0].second, *params[1].second, spec);
        REQUIRE(got.shape() == want.shape());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("transposed conv matches the direct-sum oracle and doubles the grid") {
    Rng rng(12);
    for (int stride : {1, 2}) {
        LayerSpec spec;
        spec.kind = LayerKind::transposed_conv2d;
        spec.kernel = 3;
        spec.stride = stride;
        spec.channels_in = 2;
        spec.channels_out = 3;
        auto layer = make_layer(spec, "tconv");
        layer->init_params(rng);
        Tensor x({2, 2, 4, 4});
        for (size_t i = 0; i < x.size(); ++i) x[i] = rng.gauss();
        const Tensor got = layer->forward(x, false);
        CHECK(got.dim(2) == 4 * static_cast<size_t>(stride));
        CHECK(got.dim(3) == 4 * static_cast<size_t>(stride));
        auto params = layer->parameters();
        const Tensor want = naive_tconv(x, *params[0].second, *params[1].second, spec);
        REQUIRE(got.shape() == want.shape());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("dense with identity weights passes vectors through") {
    LayerSpec spec;
    spec.kind = LayerKind::dense;
    spec.channels_in = 4;
    spec.channels_out = 4;
    auto layer = make_layer(spec, "dense");
    auto params = layer->parameters();
    Tensor& w = *params[0].second;
    for (size_t i = 0; i < 4; ++i) w.at2(i, i) = 1.0;
    const Tensor x({2, 4}, {1, -2, 3, 0.5, 0, 7, -1, 2});
    const Tensor y = layer->forward(x, false);
    for (size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("relu forward") {
    LayerSpec spec;
    spec.kind = LayerKind::relu;
    auto layer = make_layer(spec, "relu");
    const Tensor x({1, 2}, {-1.0, 2.0});
    const Tensor y = layer->forward(x, false);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 2.0);
}

TEST_CASE("shifted leaky relu values and floor") {
    // both branches agree at the knee
    CHECK(shifted_leaky_relu(1.0, 1.0, 0.01) == doctest::Approx(1.0));
    // upper branch is the identity
    CHECK(shifted_leaky_relu(5.0, 1.0, 0.01) == 5.0);
    // lower branch: -alpha*x + (1+alpha)*t0
    CHECK(shifted_leaky_relu(0.0, 1.0, 0.01) == doctest::Approx(1.01));

    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const double t0 = rng.uniform(0.0, 3.0);
        const double x = rng.uniform(-50.0, 50.0);
        const double y = shifted_leaky_relu(x, t0, 0.01);
        CHECK(y >= t0);
        if (x > t0) CHECK(y > t0 - 1e-300);
        if (x < t0) CHECK(y > t0);  // strictly above except exactly at the knee
    }
}

TEST_CASE("maxpool window 3 stride 2 same padding") {
    LayerSpec spec;
    spec.kind = LayerKind::maxpool2d;
    spec.kernel = 3;
    spec.stride = 2;
    auto layer = make_layer(spec, "pool");
    Tensor x({1, 1, 4, 4});
    for (size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
    const Tensor y = layer->forward(x, false);
    REQUIRE(y.shape() == std::vector<size_t>{1, 1, 2, 2});
    // out = ceil(4/2) = 2 with one trailing pad row/col; windows start at 0 and 2
    CHECK(y.at4(0, 0, 0, 0) == 10.0);
    CHECK(y.at4(0, 0, 0, 1) == 11.0);
    CHECK(y.at4(0, 0, 1, 0) == 14.0);
    CHECK(y.at4(0, 0, 1, 1) == 15.0);
}

TEST_CASE("dilated conv receptive field is k + (k-1)(d-1)") {
    for (int d : {1, 2, 3}) {
        const LayerSpec spec = conv_spec(1, 1, 3, 1, d);
        auto layer = make_layer(spec, "conv");
        auto params = layer->parameters();
        params[0].second->fill(1.0);
        params[1].second->fill(0.0);
        Tensor x({1, 1, 15, 15});
        x.at4(0, 0, 7, 7) = 1.0;
        const Tensor y = layer->forward(x, false);
        int row_min = 15, row_max = -1, col_min = 15, col_max = -1;
        for (int r = 0; r < 15; ++r) {
            for (int c = 0; c < 15; ++c) {
                if (y.at4(0, 0, static_cast<size_t>(r), static_cast<size_t>(c)) != 0.0) {
                    row_min = std::min(row_min, r);
                    row_max = std::max(row_max, r);
                    col_min = std::min(col_min, c);
                    col_max = std::max(col_max, c);
                }
            }
        }
        const int expected = 3 + 2 * (d - 1);
        CHECK(row_max - row_min + 1 == expected);
        CHECK(col_max - col_min + 1 == expected);
    }
}

TEST_CASE("batchnorm training normalizes per channel") {
    LayerSpec spec;
    spec.kind = LayerKind::batchnorm;
    spec.channels_in = 2;
    auto layer = make_layer(spec, "bn");
    Rng rng(3);
    Tensor x({4, 2, 3, 3});
    for (size_t i = 0; i < x.size(); ++i) x[i] = 2.0 + 3.0 * rng.gauss();
    const Tensor y = layer->forward(x, true);
    for (size_t ch = 0; ch < 2; ++ch) {
        double mean = 0.0, var = 0.0;
        size_t count = 0;
        for (size_t n = 0; n < 4; ++n) {
            for (size_t p = 0; p < 9; ++p) {
                mean += y.data()[(n * 2 + ch) * 9 + p];
                ++count;
            }
        }
        mean /= static_cast<double>(count);
        for (size_t n = 0; n < 4; ++n) {
            for (size_t p = 0; p < 9; ++p) {
                const double d = y.data()[(n * 2 + ch) * 9 + p] - mean;
                var += d * d;
            }
        }
        var /= static_cast<double>(count);
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("batchnorm inference uses running statistics") {
    LayerSpec spec;
    spec.kind = LayerKind::batchnorm;
    spec.channels_in = 1;
    spec.bn_momentum = 0.9;
    auto layer = make_layer(spec, "bn");
    Tensor x({2, 1}, {4.0, 6.0});  // batch mean 5, biased var 1
    layer->forward(x, true);
    auto buffers = layer->buffers();
    CHECK((*buffers[0].second)[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 5.0));
    CHECK((*buffers[1].second)[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 1.0));
    const Tensor y = layer->forward(x, false);
    const double inv = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(y[0] == doctest::Approx((4.0 - 0.5) * inv));
}

TEST_CASE("softmax rows are distributions") {
    LayerSpec spec;
    spec.kind = LayerKind::softmax;
    auto layer = make_layer(spec, "softmax");
    Rng rng(8);
    Tensor x({3, 4, 2, 2});
    for (size_t i = 0; i < x.size(); ++i) x[i] = rng.gauss() * 5.0;
    const Tensor y = layer->forward(x, false);
    for (size_t n = 0; n < 3; ++n) {
        for (size_t p = 0; p < 4; ++p) {
            double sum = 0.0;
            for (size_t c = 0; c < 4; ++c) sum += y.data()[(n * 4 + c) * 4 + p];
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("shape mismatches are rejected with the layer name") {
    auto layer = make_layer(conv_spec(2, 2, 3), "enc1.conv1");
    const Tensor bad({1, 3, 5, 5});
    try {
        layer->forward(bad, false);
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("enc1.conv1") != std::string::npos);
    }
    CHECK_THROWS_AS(layer->backward(bad), std::logic_error);  // backward before forward
}

TEST_CASE("valid padding rejects inputs smaller than the effective kernel") {
    auto layer = make_layer(conv_spec(1, 1, 3, 1, 3, Padding::valid), "conv");
    const Tensor x({1, 1, 5, 5});
    CHECK_THROWS_AS(layer->forward(x, false), std::invalid_argument);
}

TEST_CASE("layer spec validation") {
    LayerSpec bad;
    bad.kind = LayerKind::conv2d;
    bad.kernel = 0;
    bad.channels_in = 1;
    bad.channels_out = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.kernel = 3;
    bad.dilation = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    LayerSpec shifted;
    shifted.kind = LayerKind::shifted_leaky_relu;
    shifted.alpha = 0.0;
    CHECK_THROWS_AS(shifted.validate(), std::invalid_argument);
}

TEST_CASE("forward is deterministic and bit-identical across thread counts") {
    Rng rng(17);
    const LayerSpec spec = conv_spec(3, 4, 3, 1, 2);
    auto layer = make_layer(spec, "conv");
    layer->init_params(rng);
    Tensor x({4, 3, 8, 8});
    for (size_t i = 0; i < x.size(); ++i) x[i] = rng.gauss();

    set_threads(1);
    const Tensor y1 = layer->forward(x, false);
    layer->forward(x, false);
    layer->parameters()[0].second->zero_grad();
    layer->parameters()[1].second->zero_grad();
    Tensor dy(y1.shape());
    for (size_t i = 0; i < dy.size(); ++i) dy[i] = rng.gauss();
    const Tensor dx1 = layer->backward(dy);
    const std::vector<double> dw1 = layer->parameters()[0].second->grad_values();

    set_threads(3);
    const Tensor y2 = layer->forward(x, false);
    layer->forward(x, false);
    layer->parameters()[0].second->zero_grad();
    layer->parameters()[1].second->zero_grad();
    const Tensor dx2 = layer->backward(dy);
    const std::vector<double> dw2 = layer->parameters()[0].second->grad_values();
    set_threads(1);

    CHECK(y1.values() == y2.values());
    CHECK(dx1.values() == dx2.values());
    CHECK(dw1 == dw2);
}
