#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "plcnn/error.hpp"
#include "plcnn/tensor/tensor.hpp"

namespace plcnn {

inline constexpr std::array<float, 3> kImageNetMean{0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kImageNetStd{0.229f, 0.224f, 0.225f};

struct Normalization {
    std::array<float, 3> mean = kImageNetMean;
    std::array<float, 3> stdev = kImageNetStd;
};

/// Bilinear resize of every plane, pixel-center convention (corners not aligned).
inline Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) throw ConfigError("resize target must be positive");
    if (image.h() == height && image.w() == width) return image;
    Tensor out({image.n(), image.c(), height, width});

    struct Tap {
        std::size_t i0, i1;
        double t;
    };
    auto taps = [](std::size_t in, std::size_t out_len) {
        std::vector<Tap> v(out_len);
        const double scale = double(in) / double(out_len);
        for (std::size_t o = 0; o < out_len; ++o) {
            double s = (double(o) + 0.5) * scale - 0.5;
            s = std::clamp(s, 0.0, double(in - 1));
            const auto i0 = static_cast<std::size_t>(std::floor(s));
            v[o] = {i0, std::min(i0 + 1, in - 1), s - double(i0)};
        }
        return v;
    };
    const std::vector<Tap> ty = taps(image.h(), height), tx = taps(image.w(), width);
    for (std::size_t n = 0; n < image.n(); ++n)
        for (std::size_t c = 0; c < image.c(); ++c)
            for (std::size_t y = 0; y < height; ++y)
                for (std::size_t x = 0; x < width; ++x) {
                    const Tap& a = ty[y];
                    const Tap& b = tx[x];
                    const double top = (1 - b.t) * image(n, c, a.i0, b.i0) + b.t * image(n, c, a.i0, b.i1);
                    const double bot = (1 - b.t) * image(n, c, a.i1, b.i0) + b.t * image(n, c, a.i1, b.i1);
                    out(n, c, y, x) = static_cast<float>((1 - a.t) * top + a.t * bot);
                }
    return out;
}

/// Replicates a single grey channel to `channels` channels.
inline Tensor replicate_channels(const Tensor& image, std::size_t channels) {
    if (image.c() == channels) return image;
    if (image.c() != 1) throw ConfigError("cannot map " + std::to_string(image.c()) + " channels to " + std::to_string(channels));
    Tensor out({image.n(), channels, image.h(), image.w()});
    for (std::size_t n = 0; n < image.n(); ++n)
        for (std::size_t c = 0; c < channels; ++c) std::ranges::copy(image.channel(n, 0), out.channel(n, c).begin());
    return out;
}

namespace detail {

inline void check_stats(const Tensor& image, std::span<const float> mean, std::span<const float> stdev) {
    if (mean.size() != image.c() || stdev.size() != image.c())
        throw ConfigError("normalization needs one mean and std per channel (" + std::to_string(image.c()) + ")");
    for (float s : stdev)
        if (!(s > 0)) throw ConfigError("normalization std must be positive");
}

} // namespace detail

inline Tensor normalize(Tensor image, std::span<const float> mean, std::span<const float> stdev) {
    detail::check_stats(image, mean, stdev);
    for (std::size_t n = 0; n < image.n(); ++n)
        for (std::size_t c = 0; c < image.c(); ++c)
            for (float& v : image.channel(n, c)) v = (v - mean[c]) / stdev[c];
    return image;
}

inline Tensor denormalize(Tensor image, std::span<const float> mean, std::span<const float> stdev) {
    detail::check_stats(image, mean, stdev);
    for (std::size_t n = 0; n < image.n(); ++n)
        for (std::size_t c = 0; c < image.c(); ++c)
            for (float& v : image.channel(n, c)) v = v * stdev[c] + mean[c];
    return image;
}

inline Tensor flip_horizontal(const Tensor& image) {
    Tensor out(image.dims());
    const std::size_t w = image.w();
    for (std::size_t n = 0; n < image.n(); ++n)
        for (std::size_t c = 0; c < image.c(); ++c)
            for (std::size_t y = 0; y < image.h(); ++y)
                for (std::size_t x = 0; x < w; ++x) out(n, c, y, x) = image(n, c, y, w - 1 - x);
    return out;
}

inline Tensor flip_vertical(const Tensor& image) {
    Tensor out(image.dims());
    const std::size_t h = image.h();
    for (std::size_t n = 0; n < image.n(); ++n)
        for (std::size_t c = 0; c < image.c(); ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < image.w(); ++x) out(n, c, y, x) = image(n, c, h - 1 - y, x);
    return out;
}

/// Rotates by 90 degrees counter-clockwise `quarter_turns` times. Non-square images swap H and W.
inline Tensor rotate90(const Tensor& image, unsigned quarter_turns = 1) {
    quarter_turns %= 4;
    if (quarter_turns == 0) return image;
    const std::size_t h = image.h(), w = image.w();
    Tensor out({image.n(), image.c(), w, h});
    for (std::size_t n = 0; n < image.n(); ++n)
        for (std::size_t c = 0; c < image.c(); ++c)
            for (std::size_t y = 0; y < w; ++y)
                for (std::size_t x = 0; x < h; ++x) out(n, c, y, x) = image(n, c, x, w - 1 - y);
    return rotate90(out, quarter_turns - 1);
}

inline constexpr std::size_t kAugmentVariants = 6;

/// Variant 0 is the original, then horizontal flip, vertical flip, and 90/180/270 degree rotations.
inline Tensor augment_variant(const Tensor& image, std::size_t variant) {
    switch (variant) {
    case 0: return image;
    case 1: return flip_horizontal(image);
    case 2: return flip_vertical(image);
    case 3: return rotate90(image, 1);
    case 4: return rotate90(image, 2);
    case 5: return rotate90(image, 3);
    default: throw InputError("augmentation variant " + std::to_string(variant) + " out of range");
    }
}

} // namespace plcnn
