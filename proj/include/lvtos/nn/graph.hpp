#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lvtos/nn/layers.hpp"
#include "lvtos/tensor.hpp"

namespace lvtos::nn {

// Layered DAG: nodes are added in topological order and reference earlier
// nodes as inputs. Besides layers there are channel-concat junction nodes for
// skip connections. One graph input, one output (the last node added).
class LayerGraph {
public:
    // declared per-sample input shape, e.g. {1, 64, 64}; the batch dim is free
    explicit LayerGraph(std::vector<size_t> input_shape);

    int add(const std::string& name, const LayerSpec& spec);  // input = previous node
    int add(const std::string& name, const LayerSpec& spec, int input);
    int add_concat(const std::string& name, const std::vector<int>& inputs);

    void init_params(Rng& rng);

    Tensor forward(const Tensor& input, bool training = false);
    // Seeds d(loss)/d(output) and fills every parameter's grad buffer.
    void backward(const Tensor& grad_output);
    void zero_grad();

    std::vector<std::pair<std::string, Tensor*>> parameters();
    std::vector<std::pair<std::string, Tensor*>> buffers();

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

    const std::vector<size_t>& input_shape() const { return input_shape_; }
    size_t node_count() const { return nodes_.size(); }
    const std::string& node_name(int id) const { return nodes_[static_cast<size_t>(id)].name; }

private:
    struct Node {
        std::string name;
        std::unique_ptr<Layer> layer;  // null for concat nodes
        std::vector<int> inputs;
        Tensor output;                 // cached forward value
        std::vector<size_t> concat_channels;  // per-input channel counts
    };

    void check_node_ids(const std::vector<int>& ids) const;

    std::vector<size_t> input_shape_;
    std::vector<Node> nodes_;
    Tensor input_cache_;
    bool forward_ran_ = false;
};

}  // namespace lvtos::nn
