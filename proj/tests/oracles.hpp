#pragma once

// Independent reference implementations used only by the test suites. These
// are deliberately naive loops in double precision and share no code with
// the library kernels they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "plcnn/tensor/tensor.hpp"

namespace plcnn::oracle {

/// Quadruple-loop cross-correlation with zero padding.
template <typename Scalar>
BasicTensor<Scalar> naive_conv(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& w, const std::vector<Scalar>& b,
                               std::size_t stride, std::size_t pad) {
    const std::size_t k = w.h();
    const std::size_t oh = (x.h() + 2 * pad - k) / stride + 1;
    const std::size_t ow = (x.w() + 2 * pad - k) / stride + 1;
    BasicTensor<Scalar> out({x.n(), w.n(), oh, ow});
    for (std::size_t n = 0; n < x.n(); ++n)
        for (std::size_t co = 0; co < w.n(); ++co)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    long double acc = b.empty() ? 0.0L : static_cast<long double>(b[co]);
                    for (std::size_t ci = 0; ci < x.c(); ++ci)
                        for (std::size_t ky = 0; ky < k; ++ky)
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(x.h()) || ix >= static_cast<long>(x.w()))
                                    continue;
                                acc += static_cast<long double>(x(n, ci, static_cast<std::size_t>(iy),
                                                                  static_cast<std::size_t>(ix))) *
                                       static_cast<long double>(w(co, ci, ky, kx));
                            }
                    out(n, co, oy, ox) = static_cast<Scalar>(acc);
                }
    return out;
}

/// Max over each 2x2 window, scanning the four cells explicitly.
template <typename Scalar>
BasicTensor<Scalar> window_max(const BasicTensor<Scalar>& x) {
    BasicTensor<Scalar> out({x.n(), x.c(), x.h() / 2, x.w() / 2});
    for (std::size_t n = 0; n < x.n(); ++n)
        for (std::size_t c = 0; c < x.c(); ++c)
            for (std::size_t y = 0; y < x.h() / 2; ++y)
                for (std::size_t xx = 0; xx < x.w() / 2; ++xx)
                    out(n, c, y, xx) = std::max({x(n, c, 2 * y, 2 * xx), x(n, c, 2 * y, 2 * xx + 1),
                                                 x(n, c, 2 * y + 1, 2 * xx), x(n, c, 2 * y + 1, 2 * xx + 1)});
    return out;
}

struct Moments {
    double mean;
    double var;
};

/// Two-pass mean and biased variance of one channel over (N, H, W).
template <typename Scalar>
Moments channel_moments(const BasicTensor<Scalar>& x, std::size_t c) {
    long double sum = 0;
    for (std::size_t n = 0; n < x.n(); ++n)
        for (std::size_t i = 0; i < x.h() * x.w(); ++i) sum += x.plane(n, c)[i];
    const long double count = static_cast<long double>(x.n() * x.h() * x.w());
    const long double mean = sum / count;
    long double sq = 0;
    for (std::size_t n = 0; n < x.n(); ++n)
        for (std::size_t i = 0; i < x.h() * x.w(); ++i) {
            const long double d = x.plane(n, c)[i] - mean;
            sq += d * d;
        }
    return {static_cast<double>(mean), static_cast<double>(sq / count)};
}

/// y = W x + b on a flattened sample.
inline std::vector<double> mat_vec(const std::vector<double>& w, std::size_t rows, const std::vector<double>& x,
                                   const std::vector<double>& b) {
    std::vector<double> y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        long double acc = b[r];
        for (std::size_t j = 0; j < x.size(); ++j) acc += static_cast<long double>(w[r * x.size() + j]) * x[j];
        y[r] = static_cast<double>(acc);
    }
    return y;
}

/// Direct exp(y_i) / sum exp(y_j) in extended precision, no shift.
inline std::vector<double> direct_softmax(const std::vector<double>& y) {
    long double sum = 0;
    for (double v : y) sum += std::exp(static_cast<long double>(v));
    std::vector<double> q;
    for (double v : y) q.push_back(static_cast<double>(std::exp(static_cast<long double>(v)) / sum));
    return q;
}

/// Central difference of `loss` with respect to `*value`, restoring it afterwards.
template <typename Scalar>
double central_difference(const std::function<double()>& loss, Scalar* value, double step) {
    const Scalar saved = *value;
    *value = static_cast<Scalar>(saved + step);
    const double plus = loss();
    *value = static_cast<Scalar>(saved - step);
    const double minus = loss();
    *value = saved;
    return (plus - minus) / (2 * step);
}

/// Relative agreement with an absolute floor for near-zero gradients.
inline bool gradients_agree(double analytic, double numeric, double rel_tol, double abs_floor = 1e-4) {
    const double diff = std::abs(analytic - numeric);
    if (diff <= abs_floor) return true;
    return diff <= rel_tol * std::max(std::abs(analytic), std::abs(numeric));
}

/// sum_i weights[i] * t[i]; a scalarized loss with a fixed random upstream gradient.
template <typename Scalar>
double weighted_sum(const BasicTensor<Scalar>& t, const BasicTensor<Scalar>& weights) {
    long double acc = 0;
    for (std::size_t i = 0; i < t.size(); ++i) acc += static_cast<long double>(t[i]) * weights[i];
    return static_cast<double>(acc);
}

template <typename Scalar>
BasicTensor<Scalar> random_tensor(const Dims& dims, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    BasicTensor<Scalar> t(dims);
    for (Scalar& v : t.data()) v = static_cast<Scalar>(dist(rng));
    return t;
}

/// Fraction of `test` items whose nearest class centroid (squared L2 over raw values, built from `train`) is the true class.
template <typename Scalar>
double nearest_centroid_accuracy(const std::vector<const BasicTensor<Scalar>*>& train, const std::vector<std::size_t>& train_labels,
                                 const std::vector<const BasicTensor<Scalar>*>& test, const std::vector<std::size_t>& test_labels,
                                 std::size_t classes) {
    const std::size_t d = train.front()->size();
    std::vector<std::vector<double>> centroid(classes, std::vector<double>(d, 0.0));
    std::vector<std::size_t> count(classes, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) centroid[train_labels[i]][j] += (*train[i])[j];
        ++count[train_labels[i]];
    }
    for (std::size_t c = 0; c < classes; ++c)
        for (double& v : centroid[c]) v /= double(count[c]);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t c = 0; c < classes; ++c) {
            double dist = 0;
            for (std::size_t j = 0; j < d; ++j) {
                const double e = (*test[i])[j] - centroid[c][j];
                dist += e * e;
            }
            if (dist < best_d) best_d = dist, best = c;
        }
        hits += best == test_labels[i];
    }
    return double(hits) / double(test.size());
}

} // namespace plcnn::oracle
