#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "plcnn/tensor/tensor.hpp"

namespace plcnn {

struct ConvGeometry {
    std::size_t stride = 1;
    std::size_t padding = 0;
};

/// Weight (C_out, C_in, k, k) with k in {1, 3}; empty bias means no bias term.
template <typename Scalar>
struct BasicConvParams {
    BasicTensor<Scalar> weight;
    std::vector<Scalar> bias;
    std::size_t stride = 1;
    std::size_t padding = 0;

    ConvGeometry geometry() const { return {stride, padding}; }
};

using ConvParams = BasicConvParams<float>;

template <typename Scalar>
struct ConvGrads {
    BasicTensor<Scalar> input;
    BasicTensor<Scalar> weight;
    std::vector<Scalar> bias;
};

/// Output dims of a convolution; throws ConfigError on any inconsistency.
inline Dims conv2d_output_dims(const Dims& x, const Dims& w, std::size_t bias_len, ConvGeometry g) {
    if (w[2] != w[3] || (w[2] != 1 && w[2] != 3)) {
        throw ConfigError("conv kernel must be 1x1 or 3x3, got weight " + to_string(w));
    }
    if (x[1] != w[1]) {
        throw ConfigError("conv input " + to_string(x) + " has " + std::to_string(x[1]) +
                          " channels but weight " + to_string(w) + " expects " + std::to_string(w[1]));
    }
    if (bias_len != 0 && bias_len != w[0]) {
        throw ConfigError("conv bias length " + std::to_string(bias_len) + " does not match weight " + to_string(w));
    }
    if (g.stride == 0) throw ConfigError("conv stride must be positive");
    const std::size_t k = w[2];
    if (x[2] + 2 * g.padding < k || x[3] + 2 * g.padding < k) {
        throw ConfigError("conv output dims non-positive for input " + to_string(x) + " and weight " + to_string(w));
    }
    const std::size_t oh = (x[2] + 2 * g.padding - k) / g.stride + 1;
    const std::size_t ow = (x[3] + 2 * g.padding - k) / g.stride + 1;
    return {x[0], w[0], oh, ow};
}

namespace detail {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

inline bool is_pointwise(std::size_t k, ConvGeometry g) { return k == 1 && g.stride == 1 && g.padding == 0; }

// Unfolds one sample (C, H, W) into (C*k*k, OH*OW).
template <typename Scalar>
void im2col(const Scalar* src, std::size_t c, std::size_t h, std::size_t w, std::size_t k, ConvGeometry g,
            std::size_t oh, std::size_t ow, Scalar* col) {
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    const auto stride = static_cast<std::ptrdiff_t>(g.stride);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const Scalar* plane = src + ch * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                Scalar* row = col + ((ch * k + ky) * k + kx) * oh * ow;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ky);
                    Scalar* out = row + oy * ow;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                        std::fill(out, out + ow, Scalar(0));
                        continue;
                    }
                    const Scalar* in = plane + static_cast<std::size_t>(iy) * w;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox) * stride - pad + static_cast<std::ptrdiff_t>(kx);
                        out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? Scalar(0)
                                                                                   : in[static_cast<std::size_t>(ix)];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatters-adds columns back into (C, H, W).
template <typename Scalar>
void col2im(const Scalar* col, std::size_t c, std::size_t h, std::size_t w, std::size_t k, ConvGeometry g,
            std::size_t oh, std::size_t ow, Scalar* dst) {
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    const auto stride = static_cast<std::ptrdiff_t>(g.stride);
    for (std::size_t ch = 0; ch < c; ++ch) {
        Scalar* plane = dst + ch * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const Scalar* row = col + ((ch * k + ky) * k + kx) * oh * ow;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ky);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    const Scalar* in = row + oy * ow;
                    Scalar* out = plane + static_cast<std::size_t>(iy) * w;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox) * stride - pad + static_cast<std::ptrdiff_t>(kx);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) out[static_cast<std::size_t>(ix)] += in[ox];
                    }
                }
            }
        }
    }
}

} // namespace detail

/// Cross-correlation (no kernel flip) of `x` with `weight`, plus bias.
template <typename Scalar>
BasicTensor<Scalar> conv2d_forward(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& weight,
                                   std::span<const Scalar> bias, ConvGeometry g) {
    const Dims od = conv2d_output_dims(x.dims(), weight.dims(), bias.size(), g);
    const std::size_t cin = x.c(), h = x.h(), w = x.w(), k = weight.h();
    const std::size_t cout = od[1], oh = od[2], ow = od[3];
    const std::size_t patch = cin * k * k, pixels = oh * ow;

    BasicTensor<Scalar> out(od);
    std::vector<Scalar> col(detail::is_pointwise(k, g) ? 0 : patch * pixels);
    detail::ConstMatrixMap<Scalar> wmat(weight.ptr(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));

    for (std::size_t n = 0; n < x.n(); ++n) {
        const Scalar* src = x.plane(n, 0);
        if (!col.empty()) {
            detail::im2col(src, cin, h, w, k, g, oh, ow, col.data());
            src = col.data();
        }
        detail::ConstMatrixMap<Scalar> cmat(src, static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(pixels));
        detail::MatrixMap<Scalar> omat(out.plane(n, 0), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(pixels));
        omat.noalias() = wmat * cmat;
        if (!bias.empty()) {
            for (std::size_t co = 0; co < cout; ++co) omat.row(static_cast<Eigen::Index>(co)).array() += bias[co];
        }
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> conv2d_forward(const BasicTensor<Scalar>& x, const BasicConvParams<Scalar>& p) {
    return conv2d_forward<Scalar>(x, p.weight, std::span<const Scalar>(p.bias), p.geometry());
}

/// Gradients of sum(grad_out * conv2d_forward(x)) with respect to input, weight and bias.
/// Bias gradient is empty when `has_bias` is false.
template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& weight, bool has_bias,
                                  ConvGeometry g, const BasicTensor<Scalar>& grad_out) {
    const Dims od = conv2d_output_dims(x.dims(), weight.dims(), 0, g);
    if (grad_out.dims() != od) {
        throw ConfigError("conv grad_out dims " + to_string(grad_out.dims()) + " do not match forward output " +
                          to_string(od));
    }
    const std::size_t cin = x.c(), h = x.h(), w = x.w(), k = weight.h();
    const std::size_t cout = od[1], oh = od[2], ow = od[3];
    const std::size_t patch = cin * k * k, pixels = oh * ow;
    const bool pointwise = detail::is_pointwise(k, g);

    ConvGrads<Scalar> grads{BasicTensor<Scalar>(x.dims()), BasicTensor<Scalar>(weight.dims()),
                            std::vector<Scalar>(has_bias ? cout : 0, Scalar(0))};
    std::vector<Scalar> col(pointwise ? 0 : patch * pixels);
    std::vector<Scalar> gcol(pointwise ? 0 : patch * pixels);

    const auto rows = static_cast<Eigen::Index>(cout);
    const auto cols = static_cast<Eigen::Index>(patch);
    const auto px = static_cast<Eigen::Index>(pixels);
    detail::ConstMatrixMap<Scalar> wmat(weight.ptr(), rows, cols);
    detail::MatrixMap<Scalar> gw(grads.weight.ptr(), rows, cols);

    for (std::size_t n = 0; n < x.n(); ++n) {
        detail::ConstMatrixMap<Scalar> go(grad_out.plane(n, 0), rows, px);
        const Scalar* src = x.plane(n, 0);
        if (!pointwise) {
            detail::im2col(x.plane(n, 0), cin, h, w, k, g, oh, ow, col.data());
            src = col.data();
        }
        detail::ConstMatrixMap<Scalar> cmat(src, cols, px);
        gw.noalias() += go * cmat.transpose();

        if (pointwise) {
            detail::MatrixMap<Scalar> gx(grads.input.plane(n, 0), cols, px);
            gx.noalias() = wmat.transpose() * go;
        } else {
            detail::MatrixMap<Scalar> gc(gcol.data(), cols, px);
            gc.noalias() = wmat.transpose() * go;
            detail::col2im(gcol.data(), cin, h, w, k, g, oh, ow, grads.input.plane(n, 0));
        }
        if (has_bias) {
            // Plain loop: Eigen's vectorized sum() order depends on buffer alignment.
            for (std::size_t co = 0; co < cout; ++co) {
                const Scalar* row = grad_out.plane(n, co);
                Scalar acc(0);
                for (std::size_t i = 0; i < static_cast<std::size_t>(px); ++i) acc += row[i];
                grads.bias[co] += acc;
            }
        }
    }
    return grads;
}

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const BasicTensor<Scalar>& x, const BasicConvParams<Scalar>& p,
                                  const BasicTensor<Scalar>& grad_out) {
    if (!p.bias.empty() && p.bias.size() != p.weight.n()) {
        throw ConfigError("conv bias length does not match weight " + to_string(p.weight.dims()));
    }
    return conv2d_backward<Scalar>(x, p.weight, !p.bias.empty(), p.geometry(), grad_out);
}

} // namespace plcnn
