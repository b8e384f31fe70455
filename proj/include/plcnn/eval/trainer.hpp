#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "plcnn/data/batch.hpp"
#include "plcnn/graph/network.hpp"
#include "plcnn/optim/loss.hpp"
#include "plcnn/optim/schedule.hpp"
#include "plcnn/optim/sgd.hpp"

namespace plcnn {

struct TrainOptions {
    std::uint64_t iterations = 300;
    std::size_t batch_size = 32;
    double lr = kPaperInitialLr;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::uint64_t halving_period = kDeskHalvingPeriod;
    bool augment = true;
    std::uint64_t seed = 0;
    std::size_t log_interval = 10;
    Normalization norm;
};

struct TrainLogRow {
    std::uint64_t iteration = 0;  // iterations completed
    double lr = 0;
    double loss = 0;
    double accuracy = 0;  // train batch, percent
};

struct TrainHooks {
    std::function<void(const TrainLogRow&)> on_log;
    std::size_t checkpoint_interval = 0;  // 0 disables periodic checkpoints
    std::function<void(std::uint64_t, const Network&)> on_checkpoint;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    double final_loss = 0;
    double final_accuracy = 0;
};

inline void check(const TrainOptions& o) {
    if (o.iterations < 1) throw ConfigError("iterations must be at least 1");
    if (o.batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (!(o.lr > 0)) throw ConfigError("learning rate must be positive");
    if (!(o.momentum >= 0 && o.momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(o.weight_decay >= 0)) throw ConfigError("weight decay must be non-negative");
    if (o.log_interval < 1) throw ConfigError("log interval must be at least 1");
}

/**
 * Minibatch SGD over `indices` of `samples`. With augmentation on, every
 * (sample, variant) pair is one element of the epoch; the epoch order is
 * reshuffled from a generator seeded with `opt.seed`, and batches run on
 * across epoch boundaries.
 */
inline TrainResult train_network(Network& net, const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                                 const TrainOptions& opt, const TrainHooks& hooks = {}) {
    check(opt);
    if (indices.empty()) throw InputError("training set is empty");
    std::vector<BatchItem> pool;
    const std::size_t variants = opt.augment ? kAugmentVariants : 1;
    for (std::size_t i : indices) {
        if (samples.at(i).label >= net.config.num_classes)
            throw InputError("sample " + samples[i].source_path + " has label " + std::to_string(samples[i].label) +
                             " but the network has " + std::to_string(net.config.num_classes) + " classes");
        for (std::size_t v = 0; v < variants; ++v) pool.push_back({i, v});
    }

    std::mt19937_64 rng(opt.seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t cursor = 0;

    SgdState sgd{static_cast<float>(opt.lr), static_cast<float>(opt.momentum), static_cast<float>(opt.weight_decay), {}, 0};
    TrainResult result;
    std::vector<BatchItem> items(opt.batch_size);
    std::vector<std::size_t> labels(opt.batch_size);
    for (std::uint64_t it = 0; it < opt.iterations; ++it) {
        for (std::size_t b = 0; b < opt.batch_size; ++b) {
            if (cursor == pool.size()) {
                std::shuffle(pool.begin(), pool.end(), rng);
                cursor = 0;
            }
            items[b] = pool[cursor++];
            labels[b] = samples[items[b].sample].label;
        }
        const Tensor x = assemble_batch(samples, items, opt.norm);

        Tape<float> tape(Mode::Training);
        const NetworkTrace trace = forward_network(tape, tape.input(x), net.config, net.params);
        const Tensor& logits = tape.value(trace.logits);
        const LossValue loss = cross_entropy(logits, labels);
        if (!std::isfinite(loss.value))
            throw NumericError("loss became non-finite at iteration " + std::to_string(it + 1));
        tape.backward(trace.logits, loss.grad_logits);

        sgd.lr = static_cast<float>(lr_schedule(opt.lr, it, opt.halving_period));
        sgd_step(net.params, tape.parameter_grads(), sgd);

        const std::size_t classes = net.config.num_classes;
        std::size_t hits = 0;
        for (std::size_t b = 0; b < opt.batch_size; ++b)
            hits += predict(std::span<const float>(logits.data().subspan(b * classes, classes))).label == labels[b];
        result.final_loss = loss.value;
        result.final_accuracy = 100.0 * double(hits) / double(opt.batch_size);

        if ((it + 1) % opt.log_interval == 0) {
            result.log.push_back({it + 1, sgd.lr, result.final_loss, result.final_accuracy});
            if (hooks.on_log) hooks.on_log(result.log.back());
        }
        if (hooks.checkpoint_interval && hooks.on_checkpoint && (it + 1) % hooks.checkpoint_interval == 0)
            hooks.on_checkpoint(it + 1, net);
    }
    return result;
}

} // namespace plcnn
