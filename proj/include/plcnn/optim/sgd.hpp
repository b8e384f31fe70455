#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "plcnn/graph/parameters.hpp"

namespace plcnn {

template <typename Scalar>
struct BasicSgdState {
    Scalar lr = Scalar(0.01);
    Scalar momentum = Scalar(0.9);
    Scalar weight_decay = Scalar(1e-4);
    std::map<std::string, std::vector<Scalar>> velocity;
    std::uint64_t iteration = 0;
};

using SgdState = BasicSgdState<float>;

/**
 * Classical momentum SGD:
 *   g' = g + weight_decay * theta   (conv/linear weights only)
 *   v  = momentum * v + g'
 *   theta -= lr * v
 *
 * Trainable parameters without an entry in `grads` use g = 0, so their
 * velocity keeps coasting. Running statistics are never touched.
 */
template <typename Scalar>
void sgd_step(BasicParameters<Scalar>& params, const BasicGradients<Scalar>& grads, BasicSgdState<Scalar>& state) {
    if (!(state.lr > Scalar(0))) throw ConfigError("sgd learning rate must be positive");
    for (const auto& [name, g] : grads) {
        if (!params.contains(name)) throw ConfigError("gradient for unknown parameter " + name);
        const Parameter<Scalar>& p = params.at(name);
        if (!is_trainable(p.kind)) throw ConfigError("gradient supplied for non-trainable parameter " + name);
        if (g.size() != p.value.size()) {
            throw ConfigError("gradient for " + name + " has " + std::to_string(g.size()) + " values, parameter has " +
                              std::to_string(p.value.size()));
        }
    }
    for (auto& [name, p] : params) {
        if (!is_trainable(p.kind)) continue;
        std::vector<Scalar>& v = state.velocity[name];
        if (v.size() != p.value.size()) v.assign(p.value.size(), Scalar(0));
        const auto it = grads.find(name);
        const Scalar decay = is_decayed(p.kind) ? state.weight_decay : Scalar(0);
        std::span<Scalar> theta = p.value.data();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const Scalar g = (it == grads.end() ? Scalar(0) : it->second[i]) + decay * theta[i];
            v[i] = state.momentum * v[i] + g;
            theta[i] -= state.lr * v[i];
        }
    }
    ++state.iteration;
}

} // namespace plcnn
