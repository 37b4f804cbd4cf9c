#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lvtos/rng.hpp"
#include "lvtos/tensor.hpp"

namespace lvtos::nn {

// Number of worker threads layer ops may use for per-sample work. Results are
// bit-identical for every thread count: all reductions run in sample order.
void set_threads(int n);
int threads();

enum class LayerKind {
    conv2d,
    dilated_conv2d,
    transposed_conv2d,
    maxpool2d,
    batchnorm,
    dense,
    relu,
    leaky_relu,
    shifted_leaky_relu,
    softmax,
};

enum class Padding { same, valid };

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int kernel = 1;
    int stride = 1;
    int dilation = 1;
    int channels_in = 0;
    int channels_out = 0;
    Padding padding = Padding::same;
    int output_padding = 0;   // transposed conv only
    double alpha = 0.01;      // leaky / shifted leaky slope constant
    double t0 = 0.0;          // shifted leaky floor
    double bn_momentum = 0.9; // running-stat update weight on the old value
    double bn_epsilon = 1e-5;

    void validate() const; // throws std::invalid_argument naming the bad field
};

// Output floor activation: identity above t0, reflected ramp below it.
// sigma(x) = x for x >= t0, else -alpha*x + (1+alpha)*t0; sigma(x) >= t0 always.
double shifted_leaky_relu(double x, double t0, double alpha);
double shifted_leaky_relu_grad(double x, double t0, double alpha);

class Layer {
public:
    Layer(LayerSpec spec, std::string name) : spec_(spec), name_(std::move(name)) {}
    virtual ~Layer() = default;

    const LayerSpec& spec() const { return spec_; }
    const std::string& name() const { return name_; }

    virtual void init_params(Rng&) {}

    // forward caches whatever backward needs; backward returns d(loss)/d(input)
    // and accumulates parameter gradients into each parameter's grad buffer.
    virtual Tensor forward(const Tensor& input, bool training) = 0;
    virtual Tensor backward(const Tensor& grad_output) = 0;

    virtual std::vector<std::pair<std::string, Tensor*>> parameters() { return {}; }
    // non-trainable state persisted in checkpoints (batchnorm running stats)
    virtual std::vector<std::pair<std::string, Tensor*>> buffers() { return {}; }

protected:
    void require_forward_ran(bool ran) const;

    LayerSpec spec_;
    std::string name_;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const std::string& name);

// Resolved 2-D convolution geometry (padding policy applied).
struct ConvGeom {
    int in_h = 0, in_w = 0;
    int out_h = 0, out_w = 0;
    int kernel = 1, stride = 1, dilation = 1;
    int pad_top = 0, pad_left = 0;
};

ConvGeom resolve_conv_geom(int in_h, int in_w, const LayerSpec& spec, const std::string& name);
ConvGeom resolve_transposed_geom(int in_h, int in_w, const LayerSpec& spec, const std::string& name);

}  // namespace lvtos::nn
