#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "plcnn/optim/softmax.hpp"
#include "plcnn/tensor/tensor.hpp"

namespace plcnn {

template <typename Scalar>
struct BasicLossValue {
    Scalar value = 0;
    /// d(value)/d(logits); each row sums to zero.
    BasicTensor<Scalar> grad_logits;
};

using LossValue = BasicLossValue<float>;

/// Batch-mean cross-entropy between softmax(logits) and one-hot labels.
/// `logits` is (N, C, 1, 1) or any (N, C*...) layout whose per-sample block is the class row.
template <typename Scalar>
BasicLossValue<Scalar> cross_entropy(const BasicTensor<Scalar>& logits, std::span<const std::size_t> labels) {
    const std::size_t n = logits.n();
    const std::size_t classes = logits.size() / n;
    if (labels.size() != n) {
        throw InputError("cross_entropy got " + std::to_string(labels.size()) + " labels for a batch of " +
                         std::to_string(n));
    }
    BasicLossValue<Scalar> out{Scalar(0), BasicTensor<Scalar>(logits.dims())};
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= classes) {
            throw InputError("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                             " is outside [0, " + std::to_string(classes) + ")");
        }
        std::span<const Scalar> row = logits.data().subspan(i * classes, classes);
        const Scalar lse = log_sum_exp(row);
        out.value += (lse - row[labels[i]]) * inv_n;
        Scalar* g = out.grad_logits.ptr() + i * classes;
        for (std::size_t c = 0; c < classes; ++c) {
            const Scalar q = std::exp(row[c] - lse);
            g[c] = (q - (c == labels[i] ? Scalar(1) : Scalar(0))) * inv_n;
        }
    }
    return out;
}

template <typename Scalar>
BasicLossValue<Scalar> cross_entropy(const BasicTensor<Scalar>& logits, const std::vector<std::size_t>& labels) {
    return cross_entropy(logits, std::span<const std::size_t>(labels));
}

} // namespace plcnn
