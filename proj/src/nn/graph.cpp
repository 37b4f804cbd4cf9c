#include "lvtos/nn/graph.hpp"

#include <map>
#include <stdexcept>

#include "lvtos/io.hpp"

namespace lvtos::nn {

LayerGraph::LayerGraph(std::vector<size_t> input_shape) : input_shape_(std::move(input_shape)) {
    if (input_shape_.empty()) {
        throw std::invalid_argument("LayerGraph: input shape must be non-empty");
    }
}

void LayerGraph::check_node_ids(const std::vector<int>& ids) const {
    for (int id : ids) {
        if (id < -1 || id >= static_cast<int>(nodes_.size())) {
            throw std::invalid_argument("LayerGraph: input node id " + std::to_string(id) +
                                        " out of range");
        }
    }
}

int LayerGraph::add(const std::string& name, const LayerSpec& spec) {
    return add(name, spec, static_cast<int>(nodes_.size()) - 1);
}

int LayerGraph::add(const std::string& name, const LayerSpec& spec, int input) {
    check_node_ids({input});
    Node node;
    node.name = name;
    node.layer = make_layer(spec, name);
    node.inputs = {input};
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

int LayerGraph::add_concat(const std::string& name, const std::vector<int>& inputs) {
    if (inputs.size() < 2) {
        throw std::invalid_argument("LayerGraph: concat needs at least two inputs");
    }
    check_node_ids(inputs);
    Node node;
    node.name = name;
    node.inputs = inputs;
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

void LayerGraph::init_params(Rng& rng) {
    for (auto& node : nodes_) {
        if (node.layer) node.layer->init_params(rng);
    }
}

Tensor LayerGraph::forward(const Tensor& input, bool training) {
    if (nodes_.empty()) throw std::logic_error("LayerGraph: empty graph");
    if (input.ndim() != input_shape_.size() + 1) {
        throw std::invalid_argument("LayerGraph: expected input rank " +
                                    std::to_string(input_shape_.size() + 1) + " (batch + " +
                                    shape_to_string(input_shape_) + "), got " +
                                    shape_to_string(input.shape()));
    }
    for (size_t i = 0; i < input_shape_.size(); ++i) {
        if (input.dim(i + 1) != input_shape_[i]) {
            throw std::invalid_argument("LayerGraph: input shape " +
                                        shape_to_string(input.shape()) +
                                        " does not match declared per-sample shape " +
                                        shape_to_string(input_shape_));
        }
    }
    input_cache_ = input;
    for (auto& node : nodes_) {
        const Tensor& src = node.inputs[0] < 0 ? input_cache_
                                               : nodes_[static_cast<size_t>(node.inputs[0])].output;
        if (node.layer) {
            node.output = node.layer->forward(src, training);
        } else {
            // channel concat along dim 1
            const size_t n = src.dim(0);
            node.concat_channels.clear();
            size_t total_c = 0;
            size_t inner = 1;
            for (size_t i = 2; i < src.ndim(); ++i) inner *= src.dim(i);
            for (int id : node.inputs) {
                const Tensor& t = id < 0 ? input_cache_ : nodes_[static_cast<size_t>(id)].output;
                if (t.ndim() != src.ndim() || t.dim(0) != n) {
                    throw std::invalid_argument(node.name + ": concat rank/batch mismatch");
                }
                size_t t_inner = 1;
                for (size_t i = 2; i < t.ndim(); ++i) t_inner *= t.dim(i);
                if (t_inner != inner) {
                    throw std::invalid_argument(node.name + ": concat spatial shape mismatch (" +
                                                shape_to_string(t.shape()) + " vs " +
                                                shape_to_string(src.shape()) + ")");
                }
                node.concat_channels.push_back(t.dim(1));
                total_c += t.dim(1);
            }
            std::vector<size_t> out_shape = src.shape();
            out_shape[1] = total_c;
            Tensor out(out_shape);
            for (size_t b = 0; b < n; ++b) {
                size_t c_off = 0;
                for (size_t k = 0; k < node.inputs.size(); ++k) {
                    const Tensor& t = node.inputs[k] < 0
                                          ? input_cache_
                                          : nodes_[static_cast<size_t>(node.inputs[k])].output;
                    const size_t ck = node.concat_channels[k];
                    const double* sp = t.data() + b * ck * inner;
                    double* dp = out.data() + (b * total_c + c_off) * inner;
                    std::copy(sp, sp + ck * inner, dp);
                    c_off += ck;
                }
            }
            node.output = std::move(out);
        }
    }
    forward_ran_ = true;
    return nodes_.back().output;
}

void LayerGraph::backward(const Tensor& grad_output) {
    if (!forward_ran_) {
        throw std::logic_error("LayerGraph: backward called before forward");
    }
    if (!grad_output.same_shape(nodes_.back().output)) {
        throw std::invalid_argument("LayerGraph: loss gradient shape " +
                                    shape_to_string(grad_output.shape()) +
                                    " does not match output shape " +
                                    shape_to_string(nodes_.back().output.shape()));
    }
    std::vector<Tensor> grads(nodes_.size());
    grads.back() = grad_output;
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
        Node& node = nodes_[static_cast<size_t>(id)];
        Tensor& gout = grads[static_cast<size_t>(id)];
        if (gout.size() == 0) {
            // node does not feed the output; nothing to propagate
            continue;
        }
        auto accumulate = [&](int src_id, Tensor&& piece) {
            if (src_id < 0) return;  // gradient w.r.t. the graph input is dropped
            Tensor& slot = grads[static_cast<size_t>(src_id)];
            if (slot.size() == 0) {
                slot = std::move(piece);
            } else {
                for (size_t i = 0; i < slot.size(); ++i) slot[i] += piece[i];
            }
        };
        if (node.layer) {
            accumulate(node.inputs[0], node.layer->backward(gout));
        } else {
            const size_t n = gout.dim(0);
            size_t inner = 1;
            for (size_t i = 2; i < gout.ndim(); ++i) inner *= gout.dim(i);
            const size_t total_c = gout.dim(1);
            size_t c_off = 0;
            for (size_t k = 0; k < node.inputs.size(); ++k) {
                const size_t ck = node.concat_channels[k];
                std::vector<size_t> piece_shape = gout.shape();
                piece_shape[1] = ck;
                Tensor piece(piece_shape);
                for (size_t b = 0; b < n; ++b) {
                    const double* sp = gout.data() + (b * total_c + c_off) * inner;
                    std::copy(sp, sp + ck * inner, piece.data() + b * ck * inner);
                }
                accumulate(node.inputs[k], std::move(piece));
                c_off += ck;
            }
        }
        gout = Tensor();  // release activation gradient early
    }
}

void LayerGraph::zero_grad() {
    for (auto& [name, t] : parameters()) t->zero_grad();
}

std::vector<std::pair<std::string, Tensor*>> LayerGraph::parameters() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& node : nodes_) {
        if (!node.layer) continue;
        for (auto& [pname, t] : node.layer->parameters()) {
            out.emplace_back(node.name + "." + pname, t);
        }
    }
    return out;
}

std::vector<std::pair<std::string, Tensor*>> LayerGraph::buffers() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& node : nodes_) {
        if (!node.layer) continue;
        for (auto& [bname, t] : node.layer->buffers()) {
            out.emplace_back(node.name + "." + bname, t);
        }
    }
    return out;
}

void LayerGraph::save_checkpoint(const std::string& path) const {
    auto* self = const_cast<LayerGraph*>(this);
    std::vector<std::pair<std::string, const Tensor*>> entries;
    for (auto& [name, t] : self->parameters()) entries.emplace_back(name, t);
    for (auto& [name, t] : self->buffers()) entries.emplace_back(name, t);
    tosm_write(path, entries);
}

void LayerGraph::load_checkpoint(const std::string& path) {
    std::map<std::string, Tensor> entries = tosm_read(path);
    auto restore = [&](std::vector<std::pair<std::string, Tensor*>> targets) {
        for (auto& [name, t] : targets) {
            auto it = entries.find(name);
            if (it == entries.end()) {
                throw std::runtime_error("checkpoint " + path + " missing entry " + name);
            }
            if (it->second.shape() != t->shape()) {
                throw std::runtime_error("checkpoint " + path + " entry " + name + " has shape " +
                                         shape_to_string(it->second.shape()) + ", expected " +
                                         shape_to_string(t->shape()));
            }
            t->values() = it->second.values();
            entries.erase(it);
        }
    };
    restore(parameters());
    restore(buffers());
    if (!entries.empty()) {
        throw std::runtime_error("checkpoint " + path + " has unexpected entry " +
                                 entries.begin()->first);
    }
}

}  // namespace lvtos::nn
