#pragma once

#include <algorithm>
#include <cstddef>

#include "plcnn/tensor/tensor.hpp"

namespace plcnn {

template <typename Scalar>
BasicTensor<Scalar> relu(const BasicTensor<Scalar>& x) {
    BasicTensor<Scalar> out(x.dims());
    const Scalar* src = x.ptr();
    Scalar* dst = out.ptr();
    for (std::size_t i = 0; i < x.size(); ++i) dst[i] = std::max(src[i], Scalar(0));
    return out;
}

/// Passes grad_out through where x > 0; zero elsewhere (including x == 0).
template <typename Scalar>
BasicTensor<Scalar> relu_backward(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& grad_out) {
    if (x.dims() != grad_out.dims()) {
        throw ConfigError("relu grad_out dims " + to_string(grad_out.dims()) + " do not match input " +
                          to_string(x.dims()));
    }
    BasicTensor<Scalar> out(x.dims());
    const Scalar* src = x.ptr();
    const Scalar* dy = grad_out.ptr();
    Scalar* dx = out.ptr();
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = src[i] > Scalar(0) ? dy[i] : Scalar(0);
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> add(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& y) {
    if (x.dims() != y.dims()) {
        throw ConfigError("add operands differ in dims: " + to_string(x.dims()) + " vs " + to_string(y.dims()));
    }
    BasicTensor<Scalar> out(x.dims());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return out;
}

} // namespace plcnn
