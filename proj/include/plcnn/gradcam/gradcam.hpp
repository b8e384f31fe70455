#pragma once

#include <algorithm>
#include <optional>
#include <string>

#include "plcnn/data/transforms.hpp"
#include "plcnn/graph/network.hpp"

namespace plcnn {

/// Which recorded tensor the map is computed over.
enum class CamLayer { Features, Dense, Residual, Plain };

inline std::string to_string(CamLayer l) {
    switch (l) {
    case CamLayer::Features: return "features";
    case CamLayer::Dense: return "dense";
    case CamLayer::Residual: return "residual";
    case CamLayer::Plain: return "plain";
    }
    return "?";
}

inline CamLayer cam_layer_from_string(const std::string& s) {
    for (CamLayer l : {CamLayer::Features, CamLayer::Dense, CamLayer::Residual, CamLayer::Plain})
        if (to_string(l) == s) return l;
    throw ConfigError("unknown Grad-CAM layer '" + s + "' (features, dense, residual, plain)");
}

struct AttentionMap {
    Tensor values;  // (1, 1, H_f, W_f), in [0, 1]
    std::size_t target_class = 0;
    std::optional<Tensor> upsampled;
};

/**
 * Grad-CAM from activations A (1, K, H, W) and dy/dA of the same shape:
 * alpha_k is the spatial mean of channel k's gradient, the map is
 * ReLU(sum_k alpha_k A_k), divided by its maximum unless it is all zero.
 */
inline Tensor attention_from(const Tensor& activations, const Tensor& grads) {
    if (activations.dims() != grads.dims() || activations.n() != 1)
        throw ConfigError("Grad-CAM needs matching single-sample activations and gradients, got " +
                          to_string(activations.dims()) + " and " + to_string(grads.dims()));
    const std::size_t hw = activations.h() * activations.w();
    std::vector<double> map(hw, 0.0);
    for (std::size_t k = 0; k < activations.c(); ++k) {
        const auto g = grads.channel(0, k);
        double alpha = 0;
        for (float v : g) alpha += v;
        alpha /= double(hw);
        const auto a = activations.channel(0, k);
        for (std::size_t i = 0; i < hw; ++i) map[i] += alpha * a[i];
    }
    double top = 0;
    for (double& v : map) {
        v = std::max(v, 0.0);
        top = std::max(top, v);
    }
    Tensor out({1, 1, activations.h(), activations.w()});
    for (std::size_t i = 0; i < hw; ++i) out[i] = static_cast<float>(top > 0 ? map[i] / top : 0.0);
    return out;
}

/**
 * Attention of `net` for one normalized image (1, C, H, W). The target
 * defaults to the predicted class. Inference mode: batch norm uses its
 * running statistics.
 */
inline AttentionMap grad_cam(const Network& net, const Tensor& image, std::optional<std::size_t> target = std::nullopt,
                             CamLayer layer = CamLayer::Features, bool upsample = false) {
    if (image.n() != 1) throw InputError("Grad-CAM takes one image at a time");
    Tape<float> tape(Mode::Inference);
    const NetworkTrace t = forward_network(tape, tape.input(image), net.config, net.params);
    const Tensor& logits = tape.value(t.logits);
    const std::size_t classes = net.config.num_classes;
    const std::size_t cls = target ? *target : predict(std::span<const float>(logits.data())).label;
    if (cls >= classes)
        throw InputError("target class " + std::to_string(cls) + " out of range for " + std::to_string(classes) + " classes");

    Tensor seed(logits.dims());
    seed[cls] = 1.0f;
    tape.backward(t.logits, seed);

    NodeId node = t.features;
    switch (layer) {
    case CamLayer::Features: node = t.features; break;
    case CamLayer::Dense: node = t.dense; break;
    case CamLayer::Residual: node = t.residual; break;
    case CamLayer::Plain: node = t.plain; break;
    }
    AttentionMap m{attention_from(tape.value(node), tape.grad(node)), cls, std::nullopt};
    if (upsample) m.upsampled = resize_bilinear(m.values, image.h(), image.w());
    return m;
}

} // namespace plcnn
