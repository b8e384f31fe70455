#pragma once

#include <algorithm>
#include <array>
#include <filesystem>

#include "plcnn/data/png.hpp"
#include "plcnn/data/transforms.hpp"

namespace plcnn {

/// Black-red-yellow-white ramp; every channel is non-decreasing in t.
inline std::array<float, 3> hot_colormap(float t) {
    t = std::clamp(t, 0.0f, 1.0f);
    return {std::clamp(3.0f * t, 0.0f, 1.0f), std::clamp(3.0f * t - 1.0f, 0.0f, 1.0f), std::clamp(3.0f * t - 2.0f, 0.0f, 1.0f)};
}

/**
 * RGB overlay (1, 3, H, W): 0.5 * grey(base) + 0.5 * hot(map), with the map
 * bilinearly resized to the base image. Grey is the channel mean.
 */
inline Tensor blend_heatmap(const Tensor& map, const Tensor& base) {
    if (base.n() != 1 || map.n() != 1 || map.c() != 1)
        throw ConfigError("heatmap needs a (1, 1, h, w) map and a (1, C, H, W) base image");
    const std::size_t h = base.h(), w = base.w();
    const Tensor up = resize_bilinear(map, h, w);
    Tensor out({1, 3, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            float grey = 0;
            for (std::size_t c = 0; c < base.c(); ++c) grey += base(0, c, y, x);
            grey /= float(base.c());
            const auto rgb = hot_colormap(up(0, 0, y, x));
            for (std::size_t c = 0; c < 3; ++c) out(0, c, y, x) = 0.5f * grey + 0.5f * rgb[c];
        }
    return out;
}

inline void render_heatmap(const Tensor& map, const Tensor& base, const std::filesystem::path& out) {
    write_png(out, blend_heatmap(map, base));
}

} // namespace plcnn
