#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "plcnn/graph/config.hpp"
#include "plcnn/graph/parameters.hpp"
#include "plcnn/graph/tape.hpp"

namespace plcnn {

// ---------------------------------------------------------------------------
// Parameter declaration. Each block's declare_* mirrors its forward_* below.
// ---------------------------------------------------------------------------

/// He fan-in normal initialization for weights, zeros for biases and beta,
/// ones for gamma, and (0, 1) running statistics.
template <typename Scalar>
class ParameterFactory {
public:
    ParameterFactory(BasicParameters<Scalar>& params, std::uint64_t seed) : params_(params), rng_(seed) {}

    void conv(const std::string& prefix, std::size_t cout, std::size_t cin, std::size_t k, bool bias) {
        params_.add(prefix + ".weight", he_normal({cout, cin, k, k}, cin * k * k), ParamKind::ConvWeight);
        if (bias) params_.add(prefix + ".bias", BasicTensor<Scalar>({cout, 1, 1, 1}), ParamKind::Bias);
    }

    void batchnorm(const std::string& prefix, std::size_t c) {
        params_.add(prefix + ".gamma", BasicTensor<Scalar>({c, 1, 1, 1}, Scalar(1)), ParamKind::Gamma);
        params_.add(prefix + ".beta", BasicTensor<Scalar>({c, 1, 1, 1}), ParamKind::Beta);
        params_.add(prefix + ".running_mean", BasicTensor<Scalar>({c, 1, 1, 1}), ParamKind::RunningMean);
        params_.add(prefix + ".running_var", BasicTensor<Scalar>({c, 1, 1, 1}, Scalar(1)), ParamKind::RunningVar);
    }

    void linear(const std::string& prefix, std::size_t outputs, std::size_t features) {
        params_.add(prefix + ".weight", he_normal({outputs, features, 1, 1}, features), ParamKind::LinearWeight);
        params_.add(prefix + ".bias", BasicTensor<Scalar>({outputs, 1, 1, 1}), ParamKind::Bias);
    }

private:
    BasicTensor<Scalar> he_normal(const Dims& dims, std::size_t fan_in) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        BasicTensor<Scalar> t(dims);
        for (Scalar& v : t.data()) v = static_cast<Scalar>(dist(rng_));
        return t;
    }

    BasicParameters<Scalar>& params_;
    std::mt19937_64 rng_;
};

template <typename Scalar>
void declare_plain(ParameterFactory<Scalar>& f, const std::string& prefix, const BlockSpec& spec) {
    const std::size_t layers = spec.kind == BlockKind::PlainSmall ? 2 : 3;
    for (std::size_t i = 0; i < layers; ++i) {
        f.conv(prefix + ".conv" + std::to_string(i), spec.out_channels, i == 0 ? spec.in_channels : spec.out_channels, 3,
               true);
    }
}

template <typename Scalar>
void declare_conv_bn(ParameterFactory<Scalar>& f, const std::string& prefix, std::size_t cout, std::size_t cin,
                     std::size_t k) {
    f.conv(prefix + ".conv", cout, cin, k, false);
    f.batchnorm(prefix + ".bn", cout);
}

template <typename Scalar>
void declare_residual_unit(ParameterFactory<Scalar>& f, const std::string& prefix, std::size_t c) {
    f.conv(prefix + ".conv1", c, c, 3, false);
    f.batchnorm(prefix + ".bn1", c);
    f.conv(prefix + ".conv2", c, c, 3, false);
    f.batchnorm(prefix + ".bn2", c);
}

/// `stage_in` is the width entering the stage; ResidualSmall adds a strided
/// transition from it.
template <typename Scalar>
void declare_residual(ParameterFactory<Scalar>& f, const std::string& prefix, const BlockSpec& spec,
                      std::size_t stage_in) {
    if (spec.kind == BlockKind::ResidualSmall) {
        declare_conv_bn(f, prefix + ".transition", spec.out_channels, stage_in, 3);
        declare_residual_unit(f, prefix + ".unit0", spec.out_channels);
        declare_residual_unit(f, prefix + ".unit1", spec.out_channels);
    } else {
        declare_residual_unit(f, prefix + ".unit0", spec.in_channels);
        declare_conv_bn(f, prefix + ".downsample", spec.out_channels, spec.in_channels, 3);
        declare_residual_unit(f, prefix + ".unit1", spec.out_channels);
    }
}

template <typename Scalar>
void declare_dense_block(ParameterFactory<Scalar>& f, const std::string& prefix, const BlockSpec& spec) {
    for (std::size_t i = 0; i < spec.dense_layers; ++i) {
        declare_conv_bn(f, prefix + ".layer" + std::to_string(i), spec.growth, spec.in_channels + i * spec.growth, 3);
    }
}

// ---------------------------------------------------------------------------
// Forward composition on a tape.
// ---------------------------------------------------------------------------

/**
 * Looks up parameters by path and records block computations on a tape.
 *
 * In training mode `params` must be mutable so batch-norm running statistics
 * can be updated; in inference mode a const parameter set is accepted.
 */
template <typename Scalar>
class BlockBuilder {
public:
    BlockBuilder(Tape<Scalar>& tape, BasicParameters<Scalar>& params) : tape_(tape), params_(params) {}

    BlockBuilder(Tape<Scalar>& tape, const BasicParameters<Scalar>& params)
        // Inference mode never writes running statistics, so dropping const is safe.
        : tape_(tape), params_(const_cast<BasicParameters<Scalar>&>(params)) {
        if (tape.mode() != Mode::Inference)
            throw ConfigError("a const parameter set can only run in inference mode");
    }

    Tape<Scalar>& tape() { return tape_; }

    NodeId param(const std::string& name) { return tape_.parameter(params_.tensor(name), name); }

    /// Padding (k - 1) / 2, so only strided convs change spatial size.
    NodeId conv(NodeId x, const std::string& prefix, std::size_t stride, bool bias) {
        const NodeId w = param(prefix + ".weight");
        std::optional<NodeId> b;
        if (bias) b = param(prefix + ".bias");
        const std::size_t k = tape_.value(w).h();
        return tape_.conv2d(x, w, b, ConvGeometry{stride, (k - 1) / 2});
    }

    NodeId batchnorm(NodeId x, const std::string& prefix) {
        const NodeId gamma = param(prefix + ".gamma");
        const NodeId beta = param(prefix + ".beta");
        return tape_.batchnorm(x, gamma, beta, params_.tensor(prefix + ".running_mean").data(),
                               params_.tensor(prefix + ".running_var").data());
    }

    /// conv -> BN -> ReLU (the composite function).
    NodeId conv_bn_relu(NodeId x, const std::string& prefix, std::size_t stride = 1) {
        return tape_.relu(batchnorm(conv(x, prefix + ".conv", stride, false), prefix + ".bn"));
    }

    /// P_s: two conv+ReLU, P_l: three; then 2x2 max-pool.
    NodeId plain(NodeId x, const std::string& prefix, const BlockSpec& spec) {
        const std::size_t layers = spec.kind == BlockKind::PlainSmall ? 2 : 3;
        for (std::size_t i = 0; i < layers; ++i) x = tape_.relu(conv(x, prefix + ".conv" + std::to_string(i), 1, true));
        return tape_.maxpool2(x);
    }

    /// BN2(conv2(ReLU(BN1(conv1(x))))) + x.
    NodeId residual_unit(NodeId x, const std::string& prefix) {
        NodeId h = tape_.relu(batchnorm(conv(x, prefix + ".conv1", 1, false), prefix + ".bn1"));
        h = batchnorm(conv(h, prefix + ".conv2", 1, false), prefix + ".bn2");
        return tape_.add(h, x);
    }

    /// R_s: two residual units at constant size.
    NodeId residual_small(NodeId x, const std::string& prefix) {
        return residual_unit(residual_unit(x, prefix + ".unit0"), prefix + ".unit1");
    }

    /// R_l: unit, strided conv+BN+ReLU halving the spatial size, unit.
    NodeId residual_large(NodeId x, const std::string& prefix) {
        x = residual_unit(x, prefix + ".unit0");
        x = conv_bn_relu(x, prefix + ".downsample", 2);
        return residual_unit(x, prefix + ".unit1");
    }

    /// Residual branch of one stage; ResidualSmall is preceded by its transition.
    NodeId residual(NodeId x, const std::string& prefix, const BlockSpec& spec) {
        if (spec.kind == BlockKind::ResidualSmall) {
            return residual_small(conv_bn_relu(x, prefix + ".transition", 2), prefix);
        }
        return residual_large(x, prefix);
    }

    /// Each layer sees the concatenation of the block input and all earlier
    /// layer outputs; returns [y0; y1; ...; yL].
    NodeId dense_block(NodeId x, const std::string& prefix, const BlockSpec& spec) {
        std::vector<NodeId> features{x};
        for (std::size_t i = 0; i < spec.dense_layers; ++i) {
            const NodeId in = features.size() == 1 ? x : tape_.concat(features);
            features.push_back(conv_bn_relu(in, prefix + ".layer" + std::to_string(i)));
        }
        return tape_.concat(features);
    }

    /// 1x1 conv -> BN -> ReLU.
    NodeId compress(NodeId x, const std::string& prefix) { return conv_bn_relu(x, prefix); }

private:
    Tape<Scalar>& tape_;
    BasicParameters<Scalar>& params_;
};

} // namespace plcnn
