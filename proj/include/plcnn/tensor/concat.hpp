#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "plcnn/tensor/tensor.hpp"

namespace plcnn {

/// Concatenates along channels, in the given order.
template <typename Scalar>
BasicTensor<Scalar> concat_channels(std::span<const BasicTensor<Scalar>* const> xs) {
    if (xs.empty()) throw ConfigError("concat_channels needs at least one input");
    const Dims first = xs.front()->dims();
    std::size_t channels = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Dims d = xs[i]->dims();
        if (d[0] != first[0] || d[2] != first[2] || d[3] != first[3]) {
            throw ConfigError("concat input 0 " + to_string(first) + " and input " + std::to_string(i) + " " +
                              to_string(d) + " disagree on N, H or W");
        }
        channels += d[1];
    }
    BasicTensor<Scalar> out({first[0], channels, first[2], first[3]});
    const std::size_t plane = first[2] * first[3];
    for (std::size_t n = 0; n < first[0]; ++n) {
        std::size_t offset = 0;
        for (const BasicTensor<Scalar>* x : xs) {
            const std::size_t len = x->c() * plane;
            std::copy(x->plane(n, 0), x->plane(n, 0) + len, out.plane(n, offset));
            offset += x->c();
        }
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> concat_channels(const std::vector<BasicTensor<Scalar>>& xs) {
    std::vector<const BasicTensor<Scalar>*> ptrs;
    ptrs.reserve(xs.size());
    for (const auto& x : xs) ptrs.push_back(&x);
    return concat_channels<Scalar>(std::span<const BasicTensor<Scalar>* const>(ptrs));
}

/// Splits a channel-concatenated gradient back into pieces of the given widths.
template <typename Scalar>
std::vector<BasicTensor<Scalar>> concat_backward(const BasicTensor<Scalar>& grad_out,
                                                 std::span<const std::size_t> channels) {
    std::size_t total = 0;
    for (std::size_t c : channels) total += c;
    if (total != grad_out.c()) {
        throw ConfigError("concat_backward widths sum to " + std::to_string(total) + " but grad_out is " +
                          to_string(grad_out.dims()));
    }
    const std::size_t plane = grad_out.h() * grad_out.w();
    std::vector<BasicTensor<Scalar>> parts;
    parts.reserve(channels.size());
    for (std::size_t c : channels) parts.emplace_back(Dims{grad_out.n(), c, grad_out.h(), grad_out.w()});
    for (std::size_t n = 0; n < grad_out.n(); ++n) {
        std::size_t offset = 0;
        for (auto& part : parts) {
            const Scalar* src = grad_out.plane(n, offset);
            std::copy(src, src + part.c() * plane, part.plane(n, 0));
            offset += part.c();
        }
    }
    return parts;
}

} // namespace plcnn
