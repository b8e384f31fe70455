#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "plcnn/data/batch.hpp"
#include "plcnn/eval/confusion.hpp"
#include "plcnn/graph/network.hpp"

namespace plcnn {

/// Maps a normalized (B, C, H, W) batch to one prediction per row.
using BatchClassifier = std::function<std::vector<Prediction>(const Tensor&)>;

inline BatchClassifier network_classifier(const Network& net) {
    return [&net](const Tensor& batch) {
        const Tensor logits = forward_network(batch, net.config, net.params);
        const std::size_t classes = logits.size() / logits.n();
        std::vector<Prediction> out;
        for (std::size_t n = 0; n < logits.n(); ++n)
            out.push_back(predict(std::span<const float>(logits.data().subspan(n * classes, classes))));
        return out;
    };
}

/// Classifies `indices` of `samples` (no augmentation), in the given order.
inline EvalReport evaluate(const BatchClassifier& classify, const std::vector<Sample>& samples,
                           const std::vector<std::size_t>& indices, const std::vector<std::string>& class_names,
                           const Normalization& norm, std::size_t batch_size = 32) {
    if (indices.empty()) throw InputError("cannot evaluate an empty test set");
    if (batch_size == 0) throw ConfigError("evaluation batch size must be positive");
    ConfusionMatrix confusion(class_names);
    std::vector<ConfidenceRecord> records;
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t end = std::min(indices.size(), start + batch_size);
        std::vector<BatchItem> items;
        for (std::size_t i = start; i < end; ++i) items.push_back({indices[i], 0});
        const std::vector<Prediction> preds = classify(assemble_batch(samples, items, norm));
        if (preds.size() != items.size()) throw ConfigError("classifier returned the wrong number of predictions");
        for (std::size_t b = 0; b < items.size(); ++b) {
            const Sample& s = samples[items[b].sample];
            confusion.add(s.label, preds[b].label);
            records.push_back({s.source_path, s.label, preds[b].label, preds[b].confidence, s.label == preds[b].label});
        }
    }
    return make_report(std::move(confusion), std::move(records));
}

inline EvalReport evaluate(const Network& net, const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                           const std::vector<std::string>& class_names, const Normalization& norm,
                           std::size_t batch_size = 32) {
    if (class_names.size() != net.config.num_classes)
        throw ConfigError("network predicts " + std::to_string(net.config.num_classes) + " classes, dataset has " +
                          std::to_string(class_names.size()));
    return evaluate(network_classifier(net), samples, indices, class_names, norm, batch_size);
}

} // namespace plcnn
