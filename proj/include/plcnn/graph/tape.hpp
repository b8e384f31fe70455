#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plcnn/tensor/batchnorm.hpp"
#include "plcnn/tensor/concat.hpp"
#include "plcnn/tensor/conv.hpp"
#include "plcnn/tensor/elementwise.hpp"
#include "plcnn/tensor/linear.hpp"
#include "plcnn/tensor/pool.hpp"

namespace plcnn {

using NodeId = std::size_t;

/**
 * Records a forward pass over the tensor kernels and replays it backwards.
 *
 * Parameter nodes reference caller-owned tensors and collect their gradients
 * in the tape; every other node owns its value. Gradients of intermediate
 * nodes stay available after backward() so callers can inspect them.
 */
template <typename Scalar>
class Tape {
public:
    using TensorT = BasicTensor<Scalar>;

    explicit Tape(Mode mode = Mode::Training) : mode_(mode) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Mode mode() const noexcept { return mode_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    NodeId input(TensorT x, bool requires_grad = false) {
        Node node;
        node.owned = std::move(x);
        node.requires_grad = requires_grad;
        return push(std::move(node));
    }

    NodeId parameter(const TensorT& value, std::string name) {
        Node node;
        node.external = &value;
        node.requires_grad = true;
        node.name = std::move(name);
        return push(std::move(node));
    }

    const TensorT& value(NodeId id) const { return nodes_.at(id).value(); }

    /// Gradient of the last backward() root with respect to node `id`; empty if unreached.
    const TensorT& grad(NodeId id) const { return nodes_.at(id).grad; }

    NodeId conv2d(NodeId x, NodeId weight, std::optional<NodeId> bias, ConvGeometry g) {
        std::span<const Scalar> b;
        if (bias) b = value(*bias).data();
        TensorT out = conv2d_forward<Scalar>(value(x), value(weight), b, g);
        return push_op(std::move(out), {x, weight}, bias, [x, weight, bias, g](Tape& t, const TensorT& gy) {
            ConvGrads<Scalar> gr = conv2d_backward<Scalar>(t.value(x), t.value(weight), bias.has_value(), g, gy);
            t.accumulate(x, std::move(gr.input));
            t.accumulate(weight, std::move(gr.weight));
            if (bias) t.accumulate(*bias, gr.bias);
        });
    }

    /// Running statistics are updated in training mode only.
    NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, std::span<Scalar> running_mean,
                     std::span<Scalar> running_var) {
        const BatchNormView<Scalar> view{value(gamma).data(), value(beta).data(), running_mean, running_var,
                                         Scalar(kBatchNormEps), Scalar(kBatchNormMomentum), mode_};
        TensorT out = batchnorm_forward(value(x), view);
        // Backward in training mode recomputes batch statistics from x, so the
        // already-updated running stats are not read there.
        return push_op(std::move(out), {x, gamma}, beta, [x, gamma, beta, view](Tape& t, const TensorT& gy) {
            BatchNormView<Scalar> v = view;
            v.gamma = t.value(gamma).data();
            v.beta = t.value(beta).data();
            BatchNormGrads<Scalar> gr = batchnorm_backward(t.value(x), v, gy);
            t.accumulate(x, std::move(gr.input));
            t.accumulate(gamma, gr.gamma);
            t.accumulate(beta, gr.beta);
        });
    }

    NodeId relu(NodeId x) {
        TensorT out = plcnn::relu(value(x));
        return push_op(std::move(out), {x}, std::nullopt, [x](Tape& t, const TensorT& gy) {
            t.accumulate(x, relu_backward(t.value(x), gy));
        });
    }

    NodeId maxpool2(NodeId x) {
        PoolResult<Scalar> r = plcnn::maxpool2(value(x));
        auto argmax = std::make_shared<std::vector<std::size_t>>(std::move(r.argmax));
        const Dims in_dims = value(x).dims();
        return push_op(std::move(r.output), {x}, std::nullopt, [x, argmax, in_dims](Tape& t, const TensorT& gy) {
            t.accumulate(x, maxpool2_backward(in_dims, *argmax, gy));
        });
    }

    NodeId concat(const std::vector<NodeId>& xs) {
        std::vector<const TensorT*> parts;
        std::vector<std::size_t> widths;
        for (NodeId id : xs) {
            parts.push_back(&value(id));
            widths.push_back(value(id).c());
        }
        TensorT out = concat_channels<Scalar>(std::span<const TensorT* const>(parts));
        return push_op(std::move(out), xs, std::nullopt, [xs, widths](Tape& t, const TensorT& gy) {
            std::vector<TensorT> pieces = concat_backward(gy, std::span<const std::size_t>(widths));
            for (std::size_t i = 0; i < xs.size(); ++i) t.accumulate(xs[i], std::move(pieces[i]));
        });
    }

    NodeId add(NodeId a, NodeId b) {
        TensorT out = plcnn::add(value(a), value(b));
        return push_op(std::move(out), {a, b}, std::nullopt, [a, b](Tape& t, const TensorT& gy) {
            t.accumulate(a, gy);
            t.accumulate(b, gy);
        });
    }

    NodeId linear(NodeId x, NodeId weight, NodeId bias) {
        TensorT out = linear_forward<Scalar>(value(x), value(weight), value(bias).data());
        return push_op(std::move(out), {x, weight}, bias, [x, weight, bias](Tape& t, const TensorT& gy) {
            LinearGrads<Scalar> gr = linear_backward(t.value(x), t.value(weight), gy);
            t.accumulate(x, std::move(gr.input));
            t.accumulate(weight, std::move(gr.weight));
            t.accumulate(bias, gr.bias);
        });
    }

    /// Seeds d(root) = seed and propagates to every node that requires a gradient.
    void backward(NodeId root, const TensorT& seed) {
        if (seed.dims() != value(root).dims()) {
            throw ConfigError("backward seed dims " + to_string(seed.dims()) + " do not match root " +
                              to_string(value(root).dims()));
        }
        for (Node& n : nodes_) n.grad = TensorT();
        accumulate(root, seed);
        for (std::size_t i = root + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.backward && !n.grad.empty()) n.backward(*this, n.grad);
        }
    }

    /// Gradients of every parameter node reached by the last backward(), keyed by name.
    std::map<std::string, TensorT> parameter_grads() const {
        std::map<std::string, TensorT> out;
        for (const Node& n : nodes_) {
            if (n.external == nullptr || n.grad.empty()) continue;
            auto [it, inserted] = out.try_emplace(n.name, n.grad);
            if (!inserted) {
                for (std::size_t i = 0; i < n.grad.size(); ++i) it->second[i] += n.grad[i];
            }
        }
        return out;
    }

private:
    using BackwardFn = std::function<void(Tape&, const TensorT&)>;

    struct Node {
        TensorT owned;
        const TensorT* external = nullptr;
        TensorT grad;
        BackwardFn backward;
        std::string name;
        bool requires_grad = false;

        const TensorT& value() const { return external ? *external : owned; }
    };

    NodeId push(Node node) {
        nodes_.push_back(std::move(node));
        return nodes_.size() - 1;
    }

    NodeId push_op(TensorT out, std::vector<NodeId> inputs, std::optional<NodeId> extra, BackwardFn fn) {
        Node node;
        node.owned = std::move(out);
        node.requires_grad = extra && nodes_.at(*extra).requires_grad;
        for (NodeId id : inputs) node.requires_grad = node.requires_grad || nodes_.at(id).requires_grad;
        if (node.requires_grad) node.backward = std::move(fn);
        return push(std::move(node));
    }

    void accumulate(NodeId id, TensorT g) {
        Node& n = nodes_.at(id);
        if (!n.requires_grad) return;
        if (n.grad.empty()) {
            n.grad = std::move(g).reshaped(n.value().dims());
            return;
        }
        for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
    }

    void accumulate(NodeId id, const std::vector<Scalar>& g) {
        Node& n = nodes_.at(id);
        if (!n.requires_grad) return;
        accumulate(id, TensorT(n.value().dims(), g));
    }

    Mode mode_;
    std::vector<Node> nodes_;
};

} // namespace plcnn
