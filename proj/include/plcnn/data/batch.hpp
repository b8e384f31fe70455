#pragma once

#include <span>
#include <vector>

#include "plcnn/data/dataset.hpp"
#include "plcnn/data/transforms.hpp"

namespace plcnn {

/// One batch slot: which sample and which augmentation variant (0 = as loaded).
struct BatchItem {
    std::size_t sample = 0;
    std::size_t variant = 0;
};

/// Stacks the selected samples into (B, C, H, W) after augmentation and normalization.
inline Tensor assemble_batch(const std::vector<Sample>& samples, std::span<const BatchItem> items, const Normalization& norm) {
    if (items.empty()) throw InputError("empty batch");
    const Dims first = augment_variant(samples.at(items[0].sample).image, items[0].variant).dims();
    Tensor batch({items.size(), first[1], first[2], first[3]});
    const std::size_t stride = first[1] * first[2] * first[3];
    for (std::size_t b = 0; b < items.size(); ++b) {
        const Sample& s = samples.at(items[b].sample);
        const Tensor img = normalize(augment_variant(s.image, items[b].variant), norm.mean, norm.stdev);
        if (img.dims() != first)
            throw ConfigError("image " + s.source_path + " has dims " + to_string(img.dims()) + ", batch expects " +
                              to_string(first));
        std::ranges::copy(img.data(), batch.data().begin() + static_cast<std::ptrdiff_t>(b * stride));
    }
    return batch;
}

} // namespace plcnn
