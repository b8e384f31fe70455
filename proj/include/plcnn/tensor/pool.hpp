#pragma once

#include <cstddef>
#include <vector>

#include "plcnn/tensor/tensor.hpp"

namespace plcnn {

template <typename Scalar>
struct PoolResult {
    BasicTensor<Scalar> output;
    /// Flat input offset of the winning element for each output element.
    std::vector<std::size_t> argmax;
};

/// 2x2 max pooling with stride 2 and no padding. Ties go to the first
/// element in row-major window order.
template <typename Scalar>
PoolResult<Scalar> maxpool2(const BasicTensor<Scalar>& x) {
    if (x.h() % 2 != 0 || x.w() % 2 != 0) {
        throw ConfigError("maxpool2 needs even spatial dims, got " + to_string(x.dims()) +
                          "; align the input size to a multiple of 2^stages");
    }
    const std::size_t oh = x.h() / 2, ow = x.w() / 2;
    PoolResult<Scalar> r{BasicTensor<Scalar>({x.n(), x.c(), oh, ow}), std::vector<std::size_t>(x.n() * x.c() * oh * ow)};
    std::size_t o = 0;
    for (std::size_t n = 0; n < x.n(); ++n) {
        for (std::size_t c = 0; c < x.c(); ++c) {
            const std::size_t base = x.offset(n, c, 0, 0);
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
                    std::size_t best = base + (2 * oy) * x.w() + 2 * ox;
                    for (std::size_t dy = 0; dy < 2; ++dy) {
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t i = base + (2 * oy + dy) * x.w() + 2 * ox + dx;
                            if (x[i] > x[best]) best = i;
                        }
                    }
                    r.output[o] = x[best];
                    r.argmax[o] = best;
                }
            }
        }
    }
    return r;
}

/// Routes each output gradient to its recorded winner.
template <typename Scalar>
BasicTensor<Scalar> maxpool2_backward(const Dims& input_dims, const std::vector<std::size_t>& argmax,
                                      const BasicTensor<Scalar>& grad_out) {
    if (grad_out.size() != argmax.size() || input_dims[2] != 2 * grad_out.h() || input_dims[3] != 2 * grad_out.w()) {
        throw ConfigError("maxpool2 grad_out dims " + to_string(grad_out.dims()) + " do not match input " +
                          to_string(input_dims));
    }
    BasicTensor<Scalar> gx(input_dims);
    for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += grad_out[o];
    return gx;
}

} // namespace plcnn
