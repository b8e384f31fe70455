#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "plcnn/tensor/conv.hpp"

namespace plcnn {

template <typename Scalar>
struct LinearGrads {
    BasicTensor<Scalar> input;
    BasicTensor<Scalar> weight;
    std::vector<Scalar> bias;
};

namespace detail {

template <typename Scalar>
void check_linear(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& weight, std::size_t bias_len) {
    const std::size_t features = x.c() * x.h() * x.w();
    if (weight.c() * weight.h() * weight.w() != features) {
        throw ConfigError("linear input flattens to " + std::to_string(features) + " features but weight " +
                          to_string(weight.dims()) + " expects " +
                          std::to_string(weight.c() * weight.h() * weight.w()));
    }
    if (bias_len != weight.n()) {
        throw ConfigError("linear bias length " + std::to_string(bias_len) + " does not match weight " +
                          to_string(weight.dims()));
    }
}

} // namespace detail

/// logits[n, i] = sum_j weight[i, j] * flatten(x[n])[j] + bias[i].
/// Weight dims are (outputs, features, 1, 1); returns (N, outputs, 1, 1).
template <typename Scalar>
BasicTensor<Scalar> linear_forward(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& weight,
                                   std::span<const Scalar> bias) {
    detail::check_linear(x, weight, bias.size());
    const auto n = static_cast<Eigen::Index>(x.n());
    const auto d = static_cast<Eigen::Index>(x.size() / x.n());
    const auto k = static_cast<Eigen::Index>(weight.n());
    BasicTensor<Scalar> out({x.n(), weight.n(), 1, 1});
    detail::ConstMatrixMap<Scalar> xm(x.ptr(), n, d);
    detail::ConstMatrixMap<Scalar> wm(weight.ptr(), k, d);
    detail::MatrixMap<Scalar> om(out.ptr(), n, k);
    om.noalias() = xm * wm.transpose();
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index i = 0; i < k; ++i) om(r, i) += bias[static_cast<std::size_t>(i)];
    }
    return out;
}

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& weight,
                                    const BasicTensor<Scalar>& grad_out) {
    detail::check_linear(x, weight, weight.n());
    if (grad_out.n() != x.n() || grad_out.size() != x.n() * weight.n()) {
        throw ConfigError("linear grad_out dims " + to_string(grad_out.dims()) + " do not match (" +
                          std::to_string(x.n()) + ", " + std::to_string(weight.n()) + ")");
    }
    const auto n = static_cast<Eigen::Index>(x.n());
    const auto d = static_cast<Eigen::Index>(x.size() / x.n());
    const auto k = static_cast<Eigen::Index>(weight.n());
    LinearGrads<Scalar> g{BasicTensor<Scalar>(x.dims()), BasicTensor<Scalar>(weight.dims()),
                          std::vector<Scalar>(weight.n(), Scalar(0))};
    detail::ConstMatrixMap<Scalar> xm(x.ptr(), n, d);
    detail::ConstMatrixMap<Scalar> wm(weight.ptr(), k, d);
    detail::ConstMatrixMap<Scalar> gm(grad_out.ptr(), n, k);
    detail::MatrixMap<Scalar>(g.input.ptr(), n, d).noalias() = gm * wm;
    detail::MatrixMap<Scalar>(g.weight.ptr(), k, d).noalias() = gm.transpose() * xm;
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index i = 0; i < k; ++i) g.bias[static_cast<std::size_t>(i)] += gm(r, i);
    }
    return g;
}

} // namespace plcnn
