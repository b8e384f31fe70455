#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace plcnn {

/// exp(z_i) / sum_j exp(z_j), shifted by max(z) so large logits cannot overflow.
template <typename Scalar>
std::vector<Scalar> softmax(std::span<const Scalar> logits) {
    std::vector<Scalar> q(logits.size());
    if (logits.empty()) return q;
    const Scalar top = *std::max_element(logits.begin(), logits.end());
    Scalar sum(0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        q[i] = std::exp(logits[i] - top);
        sum += q[i];
    }
    for (Scalar& v : q) v /= sum;
    return q;
}

template <typename Scalar>
std::vector<Scalar> softmax(const std::vector<Scalar>& logits) {
    return softmax(std::span<const Scalar>(logits));
}

/// log(sum_j exp(z_j)).
template <typename Scalar>
Scalar log_sum_exp(std::span<const Scalar> logits) {
    const Scalar top = *std::max_element(logits.begin(), logits.end());
    Scalar sum(0);
    for (Scalar z : logits) sum += std::exp(z - top);
    return top + std::log(sum);
}

} // namespace plcnn
