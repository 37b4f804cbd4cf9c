#include "lvtos/nn/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace lvtos::nn {

namespace {

int g_threads = 1;

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Static partition over items; per-item work writes disjoint slots, so any
// thread count produces the same bytes once reductions run in item order.
template <class Fn>
void parallel_for(size_t n, Fn&& fn) {
    const int t = g_threads;
    if (t <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const size_t workers = std::min<size_t>(static_cast<size_t>(t), n);
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// cols layout: [channels*k*k, out_h*out_w]
void im2col(const double* img, int channels, const ConvGeom& g, double* cols) {
    const int k = g.kernel, out_hw = g.out_h * g.out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols + ((static_cast<size_t>(c) * k + ky) * k + kx) * out_hw;
                const double* src = img + static_cast<size_t>(c) * g.in_h * g.in_w;
                for (int oy = 0; oy < g.out_h; ++oy) {
                    const int iy = oy * g.stride - g.pad_top + ky * g.dilation;
                    if (iy < 0 || iy >= g.in_h) {
                        std::fill(row + static_cast<size_t>(oy) * g.out_w,
                                  row + static_cast<size_t>(oy + 1) * g.out_w, 0.0);
                        continue;
                    }
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        const int ix = ox * g.stride - g.pad_left + kx * g.dilation;
                        row[static_cast<size_t>(oy) * g.out_w + ox] =
                            (ix >= 0 && ix < g.in_w) ? src[static_cast<size_t>(iy) * g.in_w + ix]
                                                     : 0.0;
                    }
                }
            }
        }
    }
}

// scatter-add inverse of im2col
void col2im(const double* cols, int channels, const ConvGeom& g, double* img) {
    const int k = g.kernel, out_hw = g.out_h * g.out_w;
    for (int c = 0; c < channels; ++c) {
        double* dst = img + static_cast<size_t>(c) * g.in_h * g.in_w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = cols + ((static_cast<size_t>(c) * k + ky) * k + kx) * out_hw;
                for (int oy = 0; oy < g.out_h; ++oy) {
                    const int iy = oy * g.stride - g.pad_top + ky * g.dilation;
                    if (iy < 0 || iy >= g.in_h) continue;
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        const int ix = ox * g.stride - g.pad_left + kx * g.dilation;
                        if (ix >= 0 && ix < g.in_w) {
                            dst[static_cast<size_t>(iy) * g.in_w + ix] +=
                                row[static_cast<size_t>(oy) * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

void check_4d_input(const Tensor& x, int channels, const std::string& name) {
    if (x.ndim() != 4) {
        throw std::invalid_argument(name + ": expected 4-d input [N,C,H,W], got shape " +
                                    shape_to_string(x.shape()));
    }
    if (static_cast<int>(x.dim(1)) != channels) {
        throw std::invalid_argument(name + ": input has " + std::to_string(x.dim(1)) +
                                    " channels, layer expects " + std::to_string(channels));
    }
}

void he_normal_init(Tensor& w, size_t fan_in, Rng& rng) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (size_t i = 0; i < w.size(); ++i) w[i] = rng.gauss() * std_dev;
}

}  // namespace

void set_threads(int n) { g_threads = std::max(1, n); }
int threads() { return g_threads; }

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::dilated_conv2d: return "dilated-conv2d";
        case LayerKind::transposed_conv2d: return "transposed-conv2d";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::leaky_relu: return "leaky-relu";
        case LayerKind::shifted_leaky_relu: return "shifted-leaky-relu";
        case LayerKind::softmax: return "softmax";
    }
    return "unknown";
}

LayerKind layer_kind_from_name(const std::string& name) {
    for (int k = 0; k <= static_cast<int>(LayerKind::softmax); ++k) {
        if (name == layer_kind_name(static_cast<LayerKind>(k))) return static_cast<LayerKind>(k);
    }
    throw std::invalid_argument("unknown layer kind: " + name);
}

void LayerSpec::validate() const {
    if (kernel < 1) throw std::invalid_argument("LayerSpec.kernel must be >= 1");
    if (stride < 1) throw std::invalid_argument("LayerSpec.stride must be >= 1");
    if (dilation < 1) throw std::invalid_argument("LayerSpec.dilation must be >= 1");
    if (output_padding < 0) throw std::invalid_argument("LayerSpec.output_padding must be >= 0");
    switch (kind) {
        case LayerKind::conv2d:
        case LayerKind::dilated_conv2d:
        case LayerKind::transposed_conv2d:
        case LayerKind::dense:
            if (channels_in < 1 || channels_out < 1) {
                throw std::invalid_argument(std::string(layer_kind_name(kind)) +
                                            " requires channels_in/channels_out >= 1");
            }
            break;
        case LayerKind::batchnorm:
            if (channels_in < 1) {
                throw std::invalid_argument("batchnorm requires channels_in >= 1");
            }
            break;
        case LayerKind::leaky_relu:
        case LayerKind::shifted_leaky_relu:
            if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
            if (kind == LayerKind::shifted_leaky_relu && t0 < 0.0) {
                throw std::invalid_argument("t0 must be >= 0");
            }
            break;
        default:
            break;
    }
    if (kind == LayerKind::dilated_conv2d && dilation < 2) {
        throw std::invalid_argument("dilated-conv2d requires dilation >= 2");
    }
}

double shifted_leaky_relu(double x, double t0, double alpha) {
    return x >= t0 ? x : -alpha * x + (1.0 + alpha) * t0;
}

double shifted_leaky_relu_grad(double x, double t0, double alpha) {
    return x >= t0 ? 1.0 : -alpha;
}

void Layer::require_forward_ran(bool ran) const {
    if (!ran) throw std::logic_error(name_ + ": backward called before forward");
}

ConvGeom resolve_conv_geom(int in_h, int in_w, const LayerSpec& spec, const std::string& name) {
    ConvGeom g;
    g.in_h = in_h;
    g.in_w = in_w;
    g.kernel = spec.kernel;
    g.stride = spec.stride;
    g.dilation = spec.dilation;
    const int eff = (spec.kernel - 1) * spec.dilation + 1;
    if (spec.padding == Padding::same) {
        g.out_h = ceil_div(in_h, spec.stride);
        g.out_w = ceil_div(in_w, spec.stride);
        const int pad_h = std::max(0, (g.out_h - 1) * spec.stride + eff - in_h);
        const int pad_w = std::max(0, (g.out_w - 1) * spec.stride + eff - in_w);
        g.pad_top = pad_h / 2;
        g.pad_left = pad_w / 2;
    } else {
        if (in_h < eff || in_w < eff) {
            throw std::invalid_argument(name + ": input " + std::to_string(in_h) + "x" +
                                        std::to_string(in_w) +
                                        " smaller than effective kernel " + std::to_string(eff));
        }
        g.out_h = (in_h - eff) / spec.stride + 1;
        g.out_w = (in_w - eff) / spec.stride + 1;
    }
    if (g.out_h < 1 || g.out_w < 1) {
        throw std::invalid_argument(name + ": non-positive output size");
    }
    return g;
}

// Geometry of the mirror convolution whose input gradient this layer computes.
// Same padding doubles the grid exactly: out = in * stride.
ConvGeom resolve_transposed_geom(int in_h, int in_w, const LayerSpec& spec,
                                 const std::string& name) {
    if (spec.padding != Padding::same) {
        throw std::invalid_argument(name + ": transposed-conv2d supports same padding only");
    }
    LayerSpec mirror = spec;
    mirror.kind = LayerKind::conv2d;
    ConvGeom g = resolve_conv_geom(in_h * spec.stride, in_w * spec.stride, mirror, name);
    if (g.out_h != in_h || g.out_w != in_w) {
        throw std::invalid_argument(name + ": transposed geometry does not invert its stride");
    }
    return g;
}

namespace {

class Conv2dLayer : public Layer {
public:
    Conv2dLayer(LayerSpec spec, std::string name)
        : Layer(spec, std::move(name)),
          weight_({static_cast<size_t>(spec.channels_out), static_cast<size_t>(spec.channels_in),
                   static_cast<size_t>(spec.kernel), static_cast<size_t>(spec.kernel)}),
          bias_({static_cast<size_t>(spec.channels_out)}) {
        weight_.ensure_grad();
        bias_.ensure_grad();
    }

    void init_params(Rng& rng) override {
        he_normal_init(weight_,
                       static_cast<size_t>(spec_.channels_in) * spec_.kernel * spec_.kernel, rng);
        bias_.fill(0.0);
    }

    Tensor forward(const Tensor& x, bool) override {
        check_4d_input(x, spec_.channels_in, name_);
        input_ = x;
        geom_ = resolve_conv_geom(static_cast<int>(x.dim(2)), static_cast<int>(x.dim(3)), spec_,
                                  name_);
        const size_t n = x.dim(0);
        const int cin = spec_.channels_in, cout = spec_.channels_out;
        const size_t ckk = static_cast<size_t>(cin) * spec_.kernel * spec_.kernel;
        const size_t out_hw = static_cast<size_t>(geom_.out_h) * geom_.out_w;
        Tensor y({n, static_cast<size_t>(cout), static_cast<size_t>(geom_.out_h),
                  static_cast<size_t>(geom_.out_w)});
        parallel_for(n, [&](size_t i) {
            std::vector<double> cols(ckk * out_hw);
            im2col(x.data() + i * cin * geom_.in_h * geom_.in_w, cin, geom_, cols.data());
            ConstMatMap w(weight_.data(), cout, static_cast<Eigen::Index>(ckk));
            ConstMatMap cm(cols.data(), static_cast<Eigen::Index>(ckk),
                           static_cast<Eigen::Index>(out_hw));
            MatMap ym(y.data() + i * cout * out_hw, cout, static_cast<Eigen::Index>(out_hw));
            ym.noalias() = w * cm;
            for (int co = 0; co < cout; ++co) ym.row(co).array() += bias_[co];
        });
        ran_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        require_forward_ran(ran_);
        const size_t n = input_.dim(0);
        const int cin = spec_.channels_in, cout = spec_.channels_out;
        const size_t ckk = static_cast<size_t>(cin) * spec_.kernel * spec_.kernel;
        const size_t out_hw = static_cast<size_t>(geom_.out_h) * geom_.out_w;
        if (dy.shape() != std::vector<size_t>{n, static_cast<size_t>(cout),
                                              static_cast<size_t>(geom_.out_h),
                                              static_cast<size_t>(geom_.out_w)}) {
            throw std::invalid_argument(name_ + ": gradient shape mismatch");
        }
        Tensor dx(input_.shape());
        const size_t wsize = weight_.size();
        std::vector<double> dw_partial(n * wsize);
        parallel_for(n, [&](size_t i) {
            std::vector<double> cols(ckk * out_hw);
            im2col(input_.data() + i * cin * geom_.in_h * geom_.in_w, cin, geom_, cols.data());
            ConstMatMap dym(dy.data() + i * cout * out_hw, cout,
                            static_cast<Eigen::Index>(out_hw));
            ConstMatMap cm(cols.data(), static_cast<Eigen::Index>(ckk),
                           static_cast<Eigen::Index>(out_hw));
            MatMap dwm(dw_partial.data() + i * wsize, cout, static_cast<Eigen::Index>(ckk));
            dwm.noalias() = dym * cm.transpose();

            std::vector<double> dcols(ckk * out_hw);
            ConstMatMap w(weight_.data(), cout, static_cast<Eigen::Index>(ckk));
            MatMap dcm(dcols.data(), static_cast<Eigen::Index>(ckk),
                       static_cast<Eigen::Index>(out_hw));
            dcm.noalias() = w.transpose() * dym;
            col2im(dcols.data(), cin, geom_, dx.data() + i * cin * geom_.in_h * geom_.in_w);
        });
        // ordered reductions
        for (size_t i = 0; i < n; ++i) {
            const double* src = dw_partial.data() + i * wsize;
            double* dst = weight_.grad();
            for (size_t j = 0; j < wsize; ++j) dst[j] += src[j];
        }
        for (size_t i = 0; i < n; ++i) {
            for (int co = 0; co < cout; ++co) {
                const double* row = dy.data() + (i * cout + co) * out_hw;
                double s = 0.0;
                for (size_t p = 0; p < out_hw; ++p) s += row[p];
                bias_.grad()[co] += s;
            }
        }
        return dx;
    }

    std::vector<std::pair<std::string, Tensor*>> parameters() override {
        return {{"weight", &weight_}, {"bias", &bias_}};
    }

private:
    Tensor weight_, bias_;
    Tensor input_;
    ConvGeom geom_;
    bool ran_ = false;
};

class TransposedConv2dLayer : public Layer {
public:
    TransposedConv2dLayer(LayerSpec spec, std::string name)
        : Layer(spec, std::move(name)),
          weight_({static_cast<size_t>(spec.channels_in), static_cast<size_t>(spec.channels_out),
                   static_cast<size_t>(spec.kernel), static_cast<size_t>(spec.kernel)}),
          bias_({static_cast<size_t>(spec.channels_out)}) {
        weight_.ensure_grad();
        bias_.ensure_grad();
    }

    void init_params(Rng& rng) override {
        he_normal_init(weight_,
                       static_cast<size_t>(spec_.channels_in) * spec_.kernel * spec_.kernel, rng);
        bias_.fill(0.0);
    }

    Tensor forward(const Tensor& x, bool) override {
        check_4d_input(x, spec_.channels_in, name_);
        input_ = x;
        // mirror geometry: tconv output is the mirror conv's input image
        geom_ = resolve_transposed_geom(static_cast<int>(x.dim(2)), static_cast<int>(x.dim(3)),
                                        spec_, name_);
        const size_t n = x.dim(0);
        const int cin = spec_.channels_in, cout = spec_.channels_out;
        const size_t ckk = static_cast<size_t>(cout) * spec_.kernel * spec_.kernel;
        const size_t in_hw = x.dim(2) * x.dim(3);
        const size_t out_hw = static_cast<size_t>(geom_.in_h) * geom_.in_w;
        Tensor y({n, static_cast<size_t>(cout), static_cast<size_t>(geom_.in_h),
                  static_cast<size_t>(geom_.in_w)});
        parallel_for(n, [&](size_t i) {
            ConstMatMap w(weight_.data(), cin, static_cast<Eigen::Index>(ckk));
            ConstMatMap xm(x.data() + i * cin * in_hw, cin, static_cast<Eigen::Index>(in_hw));
            std::vector<double> cols(ckk * in_hw);
            MatMap cm(cols.data(), static_cast<Eigen::Index>(ckk),
                      static_cast<Eigen::Index>(in_hw));
            cm.noalias() = w.transpose() * xm;
            double* out = y.data() + i * cout * out_hw;
            col2im(cols.data(), cout, geom_, out);
            for (int co = 0; co < cout; ++co) {
                for (size_t p = 0; p < out_hw; ++p) out[co * out_hw + p] += bias_[co];
            }
        });
        ran_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        require_forward_ran(ran_);
        const size_t n = input_.dim(0);
        const int cin = spec_.channels_in, cout = spec_.channels_out;
        const size_t ckk = static_cast<size_t>(cout) * spec_.kernel * spec_.kernel;
        const size_t in_hw = input_.dim(2) * input_.dim(3);
        const size_t out_hw = static_cast<size_t>(geom_.in_h) * geom_.in_w;
        if (dy.shape() != std::vector<size_t>{n, static_cast<size_t>(cout),
                                              static_cast<size_t>(geom_.in_h),
                                              static_cast<size_t>(geom_.in_w)}) {
            throw std::invalid_argument(name_ + ": gradient shape mismatch");
        }
        Tensor dx(input_.shape());
        const size_t wsize = weight_.size();
        std::vector<double> dw_partial(n * wsize);
        parallel_for(n, [&](size_t i) {
            std::vector<double> cols(ckk * in_hw);
            im2col(dy.data() + i * cout * out_hw, cout, geom_, cols.data());
            ConstMatMap w(weight_.data(), cin, static_cast<Eigen::Index>(ckk));
            ConstMatMap cm(cols.data(), static_cast<Eigen::Index>(ckk),
                           static_cast<Eigen::Index>(in_hw));
            MatMap dxm(dx.data() + i * cin * in_hw, cin, static_cast<Eigen::Index>(in_hw));
            dxm.noalias() = w * cm;

            ConstMatMap xm(input_.data() + i * cin * in_hw, cin,
                           static_cast<Eigen::Index>(in_hw));
            MatMap dwm(dw_partial.data() + i * wsize, cin, static_cast<Eigen::Index>(ckk));
            dwm.noalias() = xm * cm.transpose();
        });
        for (size_t i = 0; i < n; ++i) {
            const double* src = dw_partial.data() + i * wsize;
            double* dst = weight_.grad();
            for (size_t j = 0; j < wsize; ++j) dst[j] += src[j];
        }
        for (size_t i = 0; i < n; ++i) {
            for (int co = 0; co < cout; ++co) {
                const double* row = dy.data() + (i * cout + co) * out_hw;
                double s = 0.0;
                for (size_t p = 0; p < out_hw; ++p) s += row[p];
                bias_.grad()[co] += s;
            }
        }
        return dx;
    }

    std::vector<std::pair<std::string, Tensor*>> parameters() override {
        return {{"weight", &weight_}, {"bias", &bias_}};
    }

private:
    Tensor weight_, bias_;
    Tensor input_;
    ConvGeom geom_;
    bool ran_ = false;
};

class MaxPool2dLayer : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& x, bool) override {
        if (x.ndim() != 4) {
            throw std::invalid_argument(name_ + ": expected 4-d input [N,C,H,W], got shape " +
                                        shape_to_string(x.shape()));
        }
        geom_ = resolve_conv_geom(static_cast<int>(x.dim(2)), static_cast<int>(x.dim(3)), spec_,
                                  name_);
        const size_t n = x.dim(0), c = x.dim(1);
        in_shape_ = x.shape();
        Tensor y({n, c, static_cast<size_t>(geom_.out_h), static_cast<size_t>(geom_.out_w)});
        argmax_.assign(y.size(), 0);
        const size_t in_hw = x.dim(2) * x.dim(3);
        const size_t out_hw = static_cast<size_t>(geom_.out_h) * geom_.out_w;
        parallel_for(n * c, [&](size_t nc) {
            const double* src = x.data() + nc * in_hw;
            double* dst = y.data() + nc * out_hw;
            size_t* am = argmax_.data() + nc * out_hw;
            for (int oy = 0; oy < geom_.out_h; ++oy) {
                for (int ox = 0; ox < geom_.out_w; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    size_t best_idx = 0;
                    for (int ky = 0; ky < geom_.kernel; ++ky) {
                        const int iy = oy * geom_.stride - geom_.pad_top + ky;
                        if (iy < 0 || iy >= geom_.in_h) continue;
                        for (int kx = 0; kx < geom_.kernel; ++kx) {
                            const int ix = ox * geom_.stride - geom_.pad_left + kx;
                            if (ix < 0 || ix >= geom_.in_w) continue;
                            const size_t idx = static_cast<size_t>(iy) * geom_.in_w + ix;
                            if (src[idx] > best) {
                                best = src[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    dst[static_cast<size_t>(oy) * geom_.out_w + ox] = best;
                    am[static_cast<size_t>(oy) * geom_.out_w + ox] = best_idx;
                }
            }
        });
        ran_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        require_forward_ran(ran_);
        const size_t n = in_shape_[0], c = in_shape_[1];
        const size_t in_hw = in_shape_[2] * in_shape_[3];
        const size_t out_hw = static_cast<size_t>(geom_.out_h) * geom_.out_w;
        if (dy.size() != n * c * out_hw) {
            throw std::invalid_argument(name_ + ": gradient shape mismatch");
        }
        Tensor dx(in_shape_);
        parallel_for(n * c, [&](size_t nc) {
            const double* g = dy.data() + nc * out_hw;
            const size_t* am = argmax_.data() + nc * out_hw;
            double* dst = dx.data() + nc * in_hw;
            for (size_t p = 0; p < out_hw; ++p) dst[am[p]] += g[p];
        });
        return dx;
    }

private:
    ConvGeom geom_;
    std::vector<size_t> in_shape_;
    std::vector<size_t> argmax_;
    bool ran_ = false;
};

// Per-channel normalization over batch and spatial dims. Dim 1 is the channel
// axis; 2-d inputs [N,F] normalize each feature over the batch.
class BatchNormLayer : public Layer {
public:
    BatchNormLayer(LayerSpec spec, std::string name)
        : Layer(spec, std::move(name)),
          gamma_(Tensor::full({static_cast<size_t>(spec.channels_in)}, 1.0)),
          beta_({static_cast<size_t>(spec.channels_in)}),
          running_mean_({static_cast<size_t>(spec.channels_in)}),
          running_var_(Tensor::full({static_cast<size_t>(spec.channels_in)}, 1.0)) {
        gamma_.ensure_grad();
        beta_.ensure_grad();
    }

    Tensor forward(const Tensor& x, bool training) override {
        if (x.ndim() < 2) {
            throw std::invalid_argument(name_ + ": expected >= 2-d input, got shape " +
                                        shape_to_string(x.shape()));
        }
        const size_t c = x.dim(1);
        if (c != gamma_.size()) {
            throw std::invalid_argument(name_ + ": input has " + std::to_string(c) +
                                        " channels, layer expects " +
                                        std::to_string(gamma_.size()));
        }
        outer_ = x.dim(0);
        inner_ = 1;
        for (size_t i = 2; i < x.ndim(); ++i) inner_ *= x.dim(i);
        training_ = training;
        const size_t m = outer_ * inner_;

        Tensor y(x.shape());
        xhat_ = Tensor(x.shape());
        inv_std_.assign(c, 0.0);
        mean_.assign(c, 0.0);

        if (training) {
            for (size_t ch = 0; ch < c; ++ch) {
                double sum = 0.0;
                for (size_t n = 0; n < outer_; ++n) {
                    const double* p = x.data() + (n * c + ch) * inner_;
                    for (size_t i = 0; i < inner_; ++i) sum += p[i];
                }
                const double mean = sum / static_cast<double>(m);
                double var_sum = 0.0;
                for (size_t n = 0; n < outer_; ++n) {
                    const double* p = x.data() + (n * c + ch) * inner_;
                    for (size_t i = 0; i < inner_; ++i) {
                        const double d = p[i] - mean;
                        var_sum += d * d;
                    }
                }
                const double var = var_sum / static_cast<double>(m);
                mean_[ch] = mean;
                inv_std_[ch] = 1.0 / std::sqrt(var + spec_.bn_epsilon);
                running_mean_[ch] =
                    spec_.bn_momentum * running_mean_[ch] + (1.0 - spec_.bn_momentum) * mean;
                running_var_[ch] =
                    spec_.bn_momentum * running_var_[ch] + (1.0 - spec_.bn_momentum) * var;
            }
        } else {
            for (size_t ch = 0; ch < c; ++ch) {
                mean_[ch] = running_mean_[ch];
                inv_std_[ch] = 1.0 / std::sqrt(running_var_[ch] + spec_.bn_epsilon);
            }
        }

        for (size_t n = 0; n < outer_; ++n) {
            for (size_t ch = 0; ch < c; ++ch) {
                const double* p = x.data() + (n * c + ch) * inner_;
                double* xh = xhat_.data() + (n * c + ch) * inner_;
                double* out = y.data() + (n * c + ch) * inner_;
                for (size_t i = 0; i < inner_; ++i) {
                    xh[i] = (p[i] - mean_[ch]) * inv_std_[ch];
                    out[i] = gamma_[ch] * xh[i] + beta_[ch];
                }
            }
        }
        ran_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        require_forward_ran(ran_);
        const size_t c = gamma_.size();
        if (!dy.same_shape(xhat_)) {
            throw std::invalid_argument(name_ + ": gradient shape mismatch");
        }
        const double m = static_cast<double>(outer_ * inner_);
        Tensor dx(xhat_.shape());
        for (size_t ch = 0; ch < c; ++ch) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (size_t n = 0; n < outer_; ++n) {
                const double* g = dy.data() + (n * c + ch) * inner_;
                const double* xh = xhat_.data() + (n * c + ch) * inner_;
                for (size_t i = 0; i < inner_; ++i) {
                    sum_dy += g[i];
                    sum_dy_xhat += g[i] * xh[i];
                }
            }
            gamma_.grad()[ch] += sum_dy_xhat;
            beta_.grad()[ch] += sum_dy;
            const double scale = gamma_[ch] * inv_std_[ch];
            for (size_t n = 0; n < outer_; ++n) {
                const double* g = dy.data() + (n * c + ch) * inner_;
                const double* xh = xhat_.data() + (n * c + ch) * inner_;
                double* d = dx.data() + (n * c + ch) * inner_;
                if (training_) {
                    for (size_t i = 0; i < inner_; ++i) {
                        d[i] = scale * (g[i] - sum_dy / m - xh[i] * sum_dy_xhat / m);
                    }
                } else {
                    for (size_t i = 0; i < inner_; ++i) d[i] = scale * g[i];
                }
            }
        }
        return dx;
    }

    std::vector<std::pair<std::string, Tensor*>> parameters() override {
        return {{"gamma", &gamma_}, {"beta", &beta_}};
    }

    std::vector<std::pair<std::string, Tensor*>> buffers() override {
        return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
    }

private:
    Tensor gamma_, beta_, running_mean_, running_var_;
    Tensor xhat_;
    std::vector<double> inv_std_, mean_;
    size_t outer_ = 0, inner_ = 0;
    bool training_ = true;
    bool ran_ = false;
};

// Fully connected layer; inputs of higher rank are flattened to [N, features].
class DenseLayer : public Layer {
public:
    DenseLayer(LayerSpec spec, std::string name)
        : Layer(spec, std::move(name)),
          weight_({static_cast<size_t>(spec.channels_out), static_cast<size_t>(spec.channels_in)}),
          bias_({static_cast<size_t>(spec.channels_out)}) {
        weight_.ensure_grad();
        bias_.ensure_grad();
    }

    void init_params(Rng& rng) override {
        he_normal_init(weight_, static_cast<size_t>(spec_.channels_in), rng);
        bias_.fill(0.0);
    }

    Tensor forward(const Tensor& x, bool) override {
        if (x.ndim() < 2) {
            throw std::invalid_argument(name_ + ": expected >= 2-d input, got shape " +
                                        shape_to_string(x.shape()));
        }
        const size_t n = x.dim(0);
        const size_t fin = x.size() / n;
        if (fin != static_cast<size_t>(spec_.channels_in)) {
            throw std::invalid_argument(name_ + ": input has " + std::to_string(fin) +
                                        " features per sample, layer expects " +
                                        std::to_string(spec_.channels_in));
        }
        input_ = x;
        const size_t fout = spec_.channels_out;
        Tensor y({n, fout});
        ConstMatMap xm(x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(fin));
        ConstMatMap wm(weight_.data(), static_cast<Eigen::Index>(fout),
                       static_cast<Eigen::Index>(fin));
        MatMap ym(y.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(fout));
        ym.noalias() = xm * wm.transpose();
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < fout; ++j) y.at2(i, j) += bias_[j];
        }
        ran_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        require_forward_ran(ran_);
        const size_t n = input_.dim(0);
        const size_t fin = spec_.channels_in, fout = spec_.channels_out;
        if (dy.ndim() != 2 || dy.dim(0) != n || dy.dim(1) != fout) {
            throw std::invalid_argument(name_ + ": gradient shape mismatch");
        }
        Tensor dx(input_.shape());
        ConstMatMap dym(dy.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(fout));
        ConstMatMap xm(input_.data(), static_cast<Eigen::Index>(n),
                       static_cast<Eigen::Index>(fin));
        ConstMatMap wm(weight_.data(), static_cast<Eigen::Index>(fout),
                       static_cast<Eigen::Index>(fin));
        MatMap dxm(dx.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(fin));
        MatMap dwm(weight_.grad(), static_cast<Eigen::Index>(fout),
                   static_cast<Eigen::Index>(fin));
        dxm.noalias() = dym * wm;
        dwm.noalias() += dym.transpose() * xm;
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < fout; ++j) bias_.grad()[j] += dy.at2(i, j);
        }
        return dx;
    }

    std::vector<std::pair<std::string, Tensor*>> parameters() override {
        return {{"weight", &weight_}, {"bias", &bias_}};
    }

private:
    Tensor weight_, bias_;
    Tensor input_;
    bool ran_ = false;
};

class ReluLayer : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& x, bool) override {
        input_ = x;
        Tensor y(x.shape());
        for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
        ran_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        require_forward_ran(ran_);
        if (!dy.same_shape(input_)) throw std::invalid_argument(name_ + ": gradient shape mismatch");
        Tensor dx(input_.shape());
        for (size_t i = 0; i < dy.size(); ++i) dx[i] = input_[i] > 0.0 ? dy[i] : 0.0;
        return dx;
    }

private:
    Tensor input_;
    bool ran_ = false;
};

class LeakyReluLayer : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& x, bool) override {
        input_ = x;
        Tensor y(x.shape());
        for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] >= 0.0 ? x[i] : spec_.alpha * x[i];
        ran_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        require_forward_ran(ran_);
        if (!dy.same_shape(input_)) throw std::invalid_argument(name_ + ": gradient shape mismatch");
        Tensor dx(input_.shape());
        for (size_t i = 0; i < dy.size(); ++i) {
            dx[i] = input_[i] >= 0.0 ? dy[i] : spec_.alpha * dy[i];
        }
        return dx;
    }

private:
    Tensor input_;
    bool ran_ = false;
};

class ShiftedLeakyReluLayer : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& x, bool) override {
        input_ = x;
        Tensor y(x.shape());
        for (size_t i = 0; i < x.size(); ++i) {
            y[i] = shifted_leaky_relu(x[i], spec_.t0, spec_.alpha);
        }
        ran_ = true;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        require_forward_ran(ran_);
        if (!dy.same_shape(input_)) throw std::invalid_argument(name_ + ": gradient shape mismatch");
        Tensor dx(input_.shape());
        for (size_t i = 0; i < dy.size(); ++i) {
            dx[i] = dy[i] * shifted_leaky_relu_grad(input_[i], spec_.t0, spec_.alpha);
        }
        return dx;
    }

private:
    Tensor input_;
    bool ran_ = false;
};

// Softmax over dim 1: per-pixel class distribution for [N,C,H,W], per-row for [N,F].
class SoftmaxLayer : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& x, bool) override {
        if (x.ndim() < 2) {
            throw std::invalid_argument(name_ + ": expected >= 2-d input, got shape " +
                                        shape_to_string(x.shape()));
        }
        const size_t c = x.dim(1);
        size_t inner = 1;
        for (size_t i = 2; i < x.ndim(); ++i) inner *= x.dim(i);
        const size_t outer = x.dim(0);
        output_ = Tensor(x.shape());
        for (size_t n = 0; n < outer; ++n) {
            for (size_t p = 0; p < inner; ++p) {
                double max_v = -std::numeric_limits<double>::infinity();
                for (size_t ch = 0; ch < c; ++ch) {
                    max_v = std::max(max_v, x.data()[(n * c + ch) * inner + p]);
                }
                double sum = 0.0;
                for (size_t ch = 0; ch < c; ++ch) {
                    const double e = std::exp(x.data()[(n * c + ch) * inner + p] - max_v);
                    output_.data()[(n * c + ch) * inner + p] = e;
                    sum += e;
                }
                for (size_t ch = 0; ch < c; ++ch) output_.data()[(n * c + ch) * inner + p] /= sum;
            }
        }
        inner_ = inner;
        outer_ = outer;
        channels_ = c;
        ran_ = true;
        return output_;
    }

    Tensor backward(const Tensor& dy) override {
        require_forward_ran(ran_);
        if (!dy.same_shape(output_)) throw std::invalid_argument(name_ + ": gradient shape mismatch");
        Tensor dx(output_.shape());
        for (size_t n = 0; n < outer_; ++n) {
            for (size_t p = 0; p < inner_; ++p) {
                double dot = 0.0;
                for (size_t ch = 0; ch < channels_; ++ch) {
                    const size_t idx = (n * channels_ + ch) * inner_ + p;
                    dot += dy[idx] * output_[idx];
                }
                for (size_t ch = 0; ch < channels_; ++ch) {
                    const size_t idx = (n * channels_ + ch) * inner_ + p;
                    dx[idx] = output_[idx] * (dy[idx] - dot);
                }
            }
        }
        return dx;
    }

private:
    Tensor output_;
    size_t inner_ = 0, outer_ = 0, channels_ = 0;
    bool ran_ = false;
};

}  // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const std::string& name) {
    spec.validate();
    switch (spec.kind) {
        case LayerKind::conv2d:
        case LayerKind::dilated_conv2d:
            return std::make_unique<Conv2dLayer>(spec, name);
        case LayerKind::transposed_conv2d:
            return std::make_unique<TransposedConv2dLayer>(spec, name);
        case LayerKind::maxpool2d:
            return std::make_unique<MaxPool2dLayer>(spec, name);
        case LayerKind::batchnorm:
            return std::make_unique<BatchNormLayer>(spec, name);
        case LayerKind::dense:
            return std::make_unique<DenseLayer>(spec, name);
        case LayerKind::relu:
            return std::make_unique<ReluLayer>(spec, name);
        case LayerKind::leaky_relu:
            return std::make_unique<LeakyReluLayer>(spec, name);
        case LayerKind::shifted_leaky_relu:
            return std::make_unique<ShiftedLeakyReluLayer>(spec, name);
        case LayerKind::softmax:
            return std::make_unique<SoftmaxLayer>(spec, name);
    }
    throw std::invalid_argument("unknown layer kind");
}

}  // namespace lvtos::nn
