#include "lvtos/segnet.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "lvtos/io.hpp"
#include "lvtos/nn/adam.hpp"
#include "lvtos/nn/loss.hpp"

namespace lvtos::segnet {

namespace {

constexpr double kDegToRad = 0.017453292519943295;

using nn::LayerKind;
using nn::LayerSpec;

LayerSpec dilated_conv(int cin, int cout) {
    LayerSpec s;
    s.kind = LayerKind::dilated_conv2d;
    s.kernel = 3;
    s.dilation = 2;
    s.channels_in = cin;
    s.channels_out = cout;
    return s;
}

LayerSpec tconv(int cin, int cout, int stride) {
    LayerSpec s;
    s.kind = LayerKind::transposed_conv2d;
    s.kernel = 3;
    s.stride = stride;
    s.channels_in = cin;
    s.channels_out = cout;
    return s;
}

LayerSpec bn(int channels, double momentum) {
    LayerSpec s;
    s.kind = LayerKind::batchnorm;
    s.channels_in = channels;
    s.bn_momentum = momentum;
    return s;
}

LayerSpec relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
}

Tensor batch_images(const std::vector<const Tensor*>& images) {
    const size_t n = images.size();
    const size_t c = images[0]->dim(0), h = images[0]->dim(1), w = images[0]->dim(2);
    Tensor out({n, c, h, w});
    for (size_t i = 0; i < n; ++i) {
        std::copy(images[i]->data(), images[i]->data() + c * h * w, out.data() + i * c * h * w);
    }
    return out;
}

Tensor onehot_labels(const std::vector<const Mask*>& labels, int classes) {
    const size_t n = labels.size();
    const size_t h = labels[0]->height, w = labels[0]->width;
    Tensor out({n, static_cast<size_t>(classes), h, w});
    for (size_t i = 0; i < n; ++i) {
        for (size_t p = 0; p < h * w; ++p) {
            const size_t cls = labels[i]->data[p] ? 1 : 0;
            out.data()[(i * classes + cls) * h * w + p] = 1.0;
        }
    }
    return out;
}

}  // namespace

void UNetConfig::validate() const {
    if (classes < 2) throw std::invalid_argument("UNetConfig.classes must be >= 2");
    if (base_width < 1) throw std::invalid_argument("UNetConfig.base_width must be >= 1");
    if (input_size < 8 || input_size % 8 != 0) {
        throw std::invalid_argument(
            "UNetConfig.input_size must be a multiple of 8 so pooled sizes stay integral");
    }
}

nn::LayerGraph build_unet(const UNetConfig& config) {
    config.validate();
    const int w = config.base_width;
    nn::LayerGraph g({1, config.input_size, config.input_size});

    auto encode_block = [&](const std::string& name, int cin, int cout) {
        g.add(name + ".conv1", dilated_conv(cin, cout));
        g.add(name + ".bn1", bn(cout, config.bn_momentum));
        g.add(name + ".relu1", relu());
        g.add(name + ".conv2", dilated_conv(cout, cout));
        g.add(name + ".bn2", bn(cout, config.bn_momentum));
        return g.add(name + ".relu2", relu());
    };
    auto pool = [&](const std::string& name) {
        LayerSpec s;
        s.kind = LayerKind::maxpool2d;
        s.kernel = 3;
        s.stride = 2;
        return g.add(name, s);
    };

    const int e1 = encode_block("enc1", 1, w);
    pool("pool1");
    const int e2 = encode_block("enc2", w, 2 * w);
    pool("pool2");
    const int e3 = encode_block("enc3", 2 * w, 4 * w);
    pool("pool3");
    encode_block("enc4", 4 * w, 8 * w);

    auto decode_block = [&](const std::string& name, int cin, int cout, int skip, int skip_c) {
        g.add(name + ".up", tconv(cin, cout, skip >= 0 ? 2 : 1));
        g.add(name + ".bn1", bn(cout, config.bn_momentum));
        int cur = g.add(name + ".relu1", relu());
        int merged_c = cout;
        if (skip >= 0) {
            cur = g.add_concat(name + ".skip", {cur, skip});
            merged_c = cout + skip_c;
        }
        g.add(name + ".conv2", tconv(merged_c, cout, 1), cur);
        g.add(name + ".bn2", bn(cout, config.bn_momentum));
        return g.add(name + ".relu2", relu());
    };

    decode_block("dec1", 8 * w, 4 * w, e3, 4 * w);
    decode_block("dec2", 4 * w, 2 * w, e2, 2 * w);
    decode_block("dec3", 2 * w, w, e1, w);
    decode_block("dec4", w, w, -1, 0);

    LayerSpec head;
    head.kind = LayerKind::conv2d;
    head.kernel = 1;
    head.channels_in = w;
    head.channels_out = config.classes;
    g.add("head.conv", head);
    LayerSpec sm;
    sm.kind = LayerKind::softmax;
    g.add("head.softmax", sm);
    return g;
}

std::vector<double> inverse_frequency_weights(const Tensor& onehot) {
    const size_t c = onehot.dim(1);
    const size_t n = onehot.dim(0);
    size_t inner = 1;
    for (size_t i = 2; i < onehot.ndim(); ++i) inner *= onehot.dim(i);
    std::vector<double> counts(c, 0.0);
    for (size_t b = 0; b < n; ++b) {
        for (size_t ch = 0; ch < c; ++ch) {
            const double* p = onehot.data() + (b * c + ch) * inner;
            for (size_t i = 0; i < inner; ++i) counts[ch] += p[i];
        }
    }
    const double total = static_cast<double>(n * inner);
    std::vector<double> weights(c, 0.0);
    for (size_t ch = 0; ch < c; ++ch) {
        if (counts[ch] > 0.0) weights[ch] = total / (static_cast<double>(c) * counts[ch]);
    }
    return weights;
}

SegTrainResult train_segnet(nn::LayerGraph& net, const std::vector<SegSample>& train,
                            const std::vector<SegSample>& val, const SegnetHyper& hyper) {
    if (train.empty()) throw std::invalid_argument("train_segnet: empty dataset");
    if (hyper.batch < 1) throw std::invalid_argument("train_segnet: batch must be >= 1");
    SegTrainResult result;
    if (hyper.steps <= 0) return result;

    Rng rng(hyper.seed);
    nn::Adam adam({.lr = hyper.lr}, net.parameters());
    const size_t classes = 2;

    for (int step = 0; step < hyper.steps; ++step) {
        std::vector<Tensor> aug_images;
        std::vector<Mask> aug_labels;
        aug_images.reserve(hyper.batch);
        aug_labels.reserve(hyper.batch);
        for (int b = 0; b < hyper.batch; ++b) {
            const SegSample& s = train[rng.below(train.size())];
            const img::GeomTransform t = img::sample_transform(hyper.augment, rng);
            aug_images.push_back(img::apply_transform_image(s.image, t));
            aug_labels.push_back(img::apply_transform_mask(s.label, t));
        }
        std::vector<const Tensor*> image_ptrs;
        std::vector<const Mask*> label_ptrs;
        for (int b = 0; b < hyper.batch; ++b) {
            image_ptrs.push_back(&aug_images[static_cast<size_t>(b)]);
            label_ptrs.push_back(&aug_labels[static_cast<size_t>(b)]);
        }
        const Tensor input = batch_images(image_ptrs);
        const Tensor onehot = onehot_labels(label_ptrs, static_cast<int>(classes));

        const Tensor prob = net.forward(input, true);
        const std::vector<double> weights = inverse_frequency_weights(onehot);
        Tensor grad;
        const nn::SegLossParts loss = nn::loss_weighted_ce_soft_dice(prob, onehot, weights, &grad);

        net.zero_grad();
        net.backward(grad);
        adam.step();

        if (step == 0) result.initial_loss = loss.total;
        result.final_loss = loss.total;

        TrainLogRow row;
        row.step = step;
        row.loss = loss.total;
        const bool last = step == hyper.steps - 1;
        if (!val.empty() && (last || (hyper.val_every > 0 && step % hyper.val_every == 0))) {
            row.val_dice = mean_val_dice(net, val);
            result.final_val_dice = row.val_dice;
        }
        result.log.push_back(row);
    }
    return result;
}

Tensor predict(nn::LayerGraph& net, const Tensor& image) {
    if (image.ndim() != 3) {
        throw std::invalid_argument("predict: expected [1,H,W] image, got " +
                                    shape_to_string(image.shape()));
    }
    Tensor input({1, image.dim(0), image.dim(1), image.dim(2)}, image.values());
    Tensor out = net.forward(input, false);
    std::vector<size_t> shape(out.shape().begin() + 1, out.shape().end());
    return Tensor(shape, out.values());
}

Tensor predict_tta(nn::LayerGraph& net, const Tensor& image, int rotations, double step_deg) {
    if (rotations < 1) throw std::invalid_argument("predict_tta: need at least one rotation");
    Tensor sum;
    for (int k = 0; k < rotations; ++k) {
        const double angle = static_cast<double>(k) * step_deg * kDegToRad;
        const Tensor rotated = img::rotate_bilinear(image, angle);
        const Tensor prob = predict(net, rotated);
        const Tensor back = img::rotate_bilinear(prob, -angle);
        if (k == 0) {
            sum = back;
        } else {
            for (size_t i = 0; i < sum.size(); ++i) sum[i] += back[i];
        }
    }
    for (size_t i = 0; i < sum.size(); ++i) sum[i] /= static_cast<double>(rotations);
    // renormalize each pixel to a distribution; rotation zero-fill can leak mass
    const size_t c = sum.dim(0), hw = sum.dim(1) * sum.dim(2);
    for (size_t p = 0; p < hw; ++p) {
        double total = 0.0;
        for (size_t ch = 0; ch < c; ++ch) total += sum.data()[ch * hw + p];
        if (total > 0.0) {
            for (size_t ch = 0; ch < c; ++ch) sum.data()[ch * hw + p] /= total;
        } else {
            for (size_t ch = 0; ch < c; ++ch) sum.data()[ch * hw + p] = 1.0 / static_cast<double>(c);
        }
    }
    return sum;
}

Mask mask_from_prob(const Tensor& prob, double threshold) {
    if (prob.ndim() != 3) {
        throw std::invalid_argument("mask_from_prob: expected [C,H,W] probabilities");
    }
    const size_t h = prob.dim(1), w = prob.dim(2), hw = h * w;
    Mask out(h, w);
    for (size_t p = 0; p < hw; ++p) {
        out.data[p] = prob.data()[hw + p] > threshold ? 1 : 0;  // class 1 = foreground
    }
    return out;
}

double mean_val_dice(nn::LayerGraph& net, const std::vector<SegSample>& val) {
    if (val.empty()) return -1.0;
    double sum = 0.0;
    for (const SegSample& s : val) {
        const Mask pred = mask_from_prob(predict(net, s.image));
        sum += metrics::dice(pred, s.label);
    }
    return sum / static_cast<double>(val.size());
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "step,loss,val_dice\n";
    for (const TrainLogRow& row : log) {
        f << row.step << "," << fmt_double(row.loss) << ",";
        if (row.val_dice >= 0.0) f << fmt_double(row.val_dice);
        f << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace lvtos::segnet
