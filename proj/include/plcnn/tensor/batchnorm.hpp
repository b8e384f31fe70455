#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "plcnn/tensor/tensor.hpp"

namespace plcnn {

enum class Mode { Training, Inference };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Non-owning view of per-channel batch-norm state. Running statistics are
/// updated in place by a training-mode forward pass.
template <typename Scalar>
struct BatchNormView {
    std::span<const Scalar> gamma;
    std::span<const Scalar> beta;
    std::span<Scalar> running_mean;
    std::span<Scalar> running_var;
    Scalar eps = Scalar(kBatchNormEps);
    Scalar momentum = Scalar(kBatchNormMomentum);
    Mode mode = Mode::Training;
};

template <typename Scalar>
struct BasicBatchNormParams {
    std::vector<Scalar> gamma;
    std::vector<Scalar> beta;
    std::vector<Scalar> running_mean;
    std::vector<Scalar> running_var;
    Scalar eps = Scalar(kBatchNormEps);
    Scalar momentum = Scalar(kBatchNormMomentum);
    Mode mode = Mode::Training;

    /// gamma = 1, beta = 0, running mean 0 and variance 1.
    static BasicBatchNormParams identity(std::size_t channels, Mode mode = Mode::Training) {
        return {std::vector<Scalar>(channels, Scalar(1)), std::vector<Scalar>(channels, Scalar(0)),
                std::vector<Scalar>(channels, Scalar(0)), std::vector<Scalar>(channels, Scalar(1)),
                Scalar(kBatchNormEps), Scalar(kBatchNormMomentum), mode};
    }

    BatchNormView<Scalar> view() {
        return {gamma, beta, running_mean, running_var, eps, momentum, mode};
    }
};

using BatchNormParams = BasicBatchNormParams<float>;

template <typename Scalar>
struct BatchNormGrads {
    BasicTensor<Scalar> input;
    std::vector<Scalar> gamma;
    std::vector<Scalar> beta;
};

namespace detail {

template <typename Scalar>
void check_batchnorm(const BasicTensor<Scalar>& x, const BatchNormView<Scalar>& p) {
    const std::size_t c = x.c();
    if (p.gamma.size() != c || p.beta.size() != c || p.running_mean.size() != c || p.running_var.size() != c) {
        throw ConfigError("batchnorm expects " + std::to_string(p.gamma.size()) + " channels, input has dims " +
                          to_string(x.dims()));
    }
    if (!(p.eps > Scalar(0))) throw ConfigError("batchnorm eps must be positive");
    if (p.mode == Mode::Training && x.n() * x.h() * x.w() == 1) {
        throw DegenerateStatisticsError("batchnorm in training mode needs more than one value per channel, got " +
                                        to_string(x.dims()));
    }
}

// Per-channel biased batch statistics, two passes.
template <typename Scalar>
void channel_moments(const BasicTensor<Scalar>& x, std::size_t ch, Scalar& mean, Scalar& var) {
    const std::size_t plane = x.h() * x.w();
    const auto count = static_cast<Scalar>(x.n() * plane);
    Scalar sum(0);
    for (std::size_t n = 0; n < x.n(); ++n) {
        const Scalar* p = x.plane(n, ch);
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    }
    mean = sum / count;
    Scalar sq(0);
    for (std::size_t n = 0; n < x.n(); ++n) {
        const Scalar* p = x.plane(n, ch);
        for (std::size_t i = 0; i < plane; ++i) {
            const Scalar d = p[i] - mean;
            sq += d * d;
        }
    }
    var = sq / count;
}

} // namespace detail

/**
 * Per-channel batch normalization over (N, H, W).
 *
 * Training mode standardizes with batch statistics and folds them into the
 * running estimates (running_var tracks the unbiased batch variance).
 * Inference mode applies the running estimates as a fixed affine map.
 */
template <typename Scalar>
BasicTensor<Scalar> batchnorm_forward(const BasicTensor<Scalar>& x, const BatchNormView<Scalar>& p) {
    detail::check_batchnorm(x, p);
    BasicTensor<Scalar> out(x.dims());
    const std::size_t plane = x.h() * x.w();
    const std::size_t count = x.n() * plane;
    for (std::size_t ch = 0; ch < x.c(); ++ch) {
        Scalar mean, var;
        if (p.mode == Mode::Training) {
            detail::channel_moments(x, ch, mean, var);
            const Scalar unbiased = var * static_cast<Scalar>(count) / static_cast<Scalar>(count - 1);
            p.running_mean[ch] = (Scalar(1) - p.momentum) * p.running_mean[ch] + p.momentum * mean;
            p.running_var[ch] = (Scalar(1) - p.momentum) * p.running_var[ch] + p.momentum * unbiased;
        } else {
            mean = p.running_mean[ch];
            var = p.running_var[ch];
        }
        const Scalar scale = p.gamma[ch] / std::sqrt(var + p.eps);
        const Scalar shift = p.beta[ch] - mean * scale;
        for (std::size_t n = 0; n < x.n(); ++n) {
            const Scalar* src = x.plane(n, ch);
            Scalar* dst = out.plane(n, ch);
            for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * scale + shift;
        }
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> batchnorm_forward(const BasicTensor<Scalar>& x, BasicBatchNormParams<Scalar>& p) {
    return batchnorm_forward(x, p.view());
}

/// Backward pass. Training mode differentiates through the batch mean and
/// variance, which are recomputed from `x`; inference mode treats the running
/// statistics as constants.
template <typename Scalar>
BatchNormGrads<Scalar> batchnorm_backward(const BasicTensor<Scalar>& x, const BatchNormView<Scalar>& p,
                                          const BasicTensor<Scalar>& grad_out) {
    detail::check_batchnorm(x, p);
    if (grad_out.dims() != x.dims()) {
        throw ConfigError("batchnorm grad_out dims " + to_string(grad_out.dims()) + " do not match input " +
                          to_string(x.dims()));
    }
    const std::size_t c = x.c(), plane = x.h() * x.w();
    const auto count = static_cast<Scalar>(x.n() * plane);
    BatchNormGrads<Scalar> g{BasicTensor<Scalar>(x.dims()), std::vector<Scalar>(c), std::vector<Scalar>(c)};

    for (std::size_t ch = 0; ch < c; ++ch) {
        Scalar mean, var;
        if (p.mode == Mode::Training) {
            detail::channel_moments(x, ch, mean, var);
        } else {
            mean = p.running_mean[ch];
            var = p.running_var[ch];
        }
        const Scalar inv_std = Scalar(1) / std::sqrt(var + p.eps);
        Scalar sum_dy(0), sum_dy_xhat(0);
        for (std::size_t n = 0; n < x.n(); ++n) {
            const Scalar* xs = x.plane(n, ch);
            const Scalar* dy = grad_out.plane(n, ch);
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * (xs[i] - mean) * inv_std;
            }
        }
        g.beta[ch] = sum_dy;
        g.gamma[ch] = sum_dy_xhat;

        const Scalar k = p.gamma[ch] * inv_std;
        for (std::size_t n = 0; n < x.n(); ++n) {
            const Scalar* xs = x.plane(n, ch);
            const Scalar* dy = grad_out.plane(n, ch);
            Scalar* dx = g.input.plane(n, ch);
            if (p.mode == Mode::Training) {
                const Scalar mean_dy = sum_dy / count;
                const Scalar mean_dy_xhat = sum_dy_xhat / count;
                for (std::size_t i = 0; i < plane; ++i) {
                    const Scalar xhat = (xs[i] - mean) * inv_std;
                    dx[i] = k * (dy[i] - mean_dy - xhat * mean_dy_xhat);
                }
            } else {
                for (std::size_t i = 0; i < plane; ++i) dx[i] = k * dy[i];
            }
        }
    }
    return g;
}

template <typename Scalar>
BatchNormGrads<Scalar> batchnorm_backward(const BasicTensor<Scalar>& x, BasicBatchNormParams<Scalar>& p,
                                          const BasicTensor<Scalar>& grad_out) {
    return batchnorm_backward(x, p.view(), grad_out);
}

} // namespace plcnn
