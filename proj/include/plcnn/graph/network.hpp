#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plcnn/graph/blocks.hpp"
#include "plcnn/optim/softmax.hpp"

namespace plcnn {

template <typename Scalar>
struct BasicNetwork {
    NetworkConfig config;
    BasicParameters<Scalar> params;
};

using Network = BasicNetwork<float>;

inline std::string stage_prefix(std::size_t stage) { return "stage" + std::to_string(stage + 1); }
inline std::string fusion_prefix(std::size_t stage) { return "fusion" + std::to_string(stage + 1); }

/// Allocates and initializes every parameter of `cfg`; deterministic in `seed`.
template <typename Scalar = float>
BasicParameters<Scalar> build_network(const NetworkConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    BasicParameters<Scalar> params;
    ParameterFactory<Scalar> f(params, seed);
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        const StageSpec& st = cfg.stages[s];
        declare_plain(f, stage_prefix(s) + ".plain", st.plain);
        declare_residual(f, stage_prefix(s) + ".residual", st.residual, st.plain.in_channels);
        if (s > 0) {
            declare_conv_bn(f, fusion_prefix(s), cfg.compression_channels[s - 1],
                            st.plain.out_channels + st.residual.out_channels, 1);
        }
    }
    declare_conv_bn(f, "dense.stem", cfg.dense.stem_channels, cfg.input_dims[0], 3);
    declare_dense_block(f, "dense.block", cfg.dense.block);
    declare_conv_bn(f, "dense.compress", cfg.dense.compression_channels, cfg.dense.block.out_channels, 1);
    f.linear("head", cfg.num_classes, cfg.head_input_width());
    return params;
}

/// Node ids of the interesting tensors of one forward pass.
struct NetworkTrace {
    NodeId input = 0;
    NodeId plain = 0;     ///< last plain-branch block output
    NodeId residual = 0;  ///< last residual-branch block output
    NodeId fused = 0;     ///< compressed [residual; plain] of the last stage
    NodeId dense = 0;     ///< compressed dense-branch output
    NodeId features = 0;  ///< [dense; fused], the stack fed to the head
    NodeId logits = 0;
};

/**
 * Records the three-branch network on `tape`.
 *
 * Stage 1 runs both branch blocks on the input independently and each feeds
 * its own stage-2 block. From stage 2 on, the two branch outputs are
 * concatenated and compressed, and the compressed tensor feeds both blocks of
 * the next stage. The dense branch runs from the input; its compressed output
 * is stacked with the last fusion, flattened and passed to the linear head.
 */
template <typename Scalar, typename Params>
NetworkTrace forward_network(Tape<Scalar>& tape, NodeId input, const NetworkConfig& cfg, Params& params) {
    const Dims in = tape.value(input).dims();
    if (in[1] != cfg.input_dims[0] || in[2] != cfg.input_dims[1] || in[3] != cfg.input_dims[2]) {
        throw ConfigError("network input " + to_string(in) + " does not match config input (" +
                          std::to_string(cfg.input_dims[0]) + "," + std::to_string(cfg.input_dims[1]) + "," +
                          std::to_string(cfg.input_dims[2]) + ")");
    }
    BlockBuilder<Scalar> b(tape, params);
    NetworkTrace t;
    t.input = input;

    NodeId plain_in = input, residual_in = input;
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        const StageSpec& st = cfg.stages[s];
        t.plain = b.plain(plain_in, stage_prefix(s) + ".plain", st.plain);
        t.residual = b.residual(residual_in, stage_prefix(s) + ".residual", st.residual);
        if (s == 0) {
            plain_in = t.plain;
            residual_in = t.residual;
            continue;
        }
        t.fused = b.compress(tape.concat({t.residual, t.plain}), fusion_prefix(s));
        plain_in = residual_in = t.fused;
    }

    NodeId d = b.conv_bn_relu(input, "dense.stem");
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) d = tape.maxpool2(d);
    d = b.dense_block(d, "dense.block", cfg.dense.block);
    t.dense = b.compress(d, "dense.compress");

    t.features = tape.concat({t.dense, t.fused});
    t.logits = tape.linear(t.features, b.param("head.weight"), b.param("head.bias"));
    return t;
}

/// Logits (N, num_classes, 1, 1) for a batch.
template <typename Scalar>
BasicTensor<Scalar> forward_network(const BasicTensor<Scalar>& x, const NetworkConfig& cfg,
                                    BasicParameters<Scalar>& params, Mode mode) {
    Tape<Scalar> tape(mode);
    const NetworkTrace t = forward_network(tape, tape.input(x), cfg, params);
    return tape.value(t.logits);
}

template <typename Scalar>
BasicTensor<Scalar> forward_network(const BasicTensor<Scalar>& x, const NetworkConfig& cfg,
                                    const BasicParameters<Scalar>& params) {
    Tape<Scalar> tape(Mode::Inference);
    const NetworkTrace t = forward_network(tape, tape.input(x), cfg, params);
    return tape.value(t.logits);
}

struct Prediction {
    std::size_t label = 0;
    double confidence = 0.0;
};

/// Argmax of softmax(logits), lowest index on ties, with its probability.
template <typename Scalar>
Prediction predict(std::span<const Scalar> logits) {
    const std::vector<Scalar> q = softmax(logits);
    Prediction p;
    for (std::size_t i = 1; i < q.size(); ++i)
        if (q[i] > q[p.label]) p.label = i;
    p.confidence = static_cast<double>(q[p.label]);
    return p;
}

template <typename Scalar>
Prediction predict(const std::vector<Scalar>& logits) {
    return predict(std::span<const Scalar>(logits));
}

} // namespace plcnn
