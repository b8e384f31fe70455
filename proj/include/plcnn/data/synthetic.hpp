#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include "plcnn/data/png.hpp"
#include "plcnn/error.hpp"
#include "plcnn/tensor/tensor.hpp"

namespace plcnn {

struct SyntheticSpec {
    std::size_t classes = 3;
    std::size_t per_class = 12;
    std::size_t height = 64;
    std::size_t width = 64;
    std::uint64_t seed = 5;
    double noise = 0.1;
};

/**
 * One grayscale grating image, (1, 1, H, W) in [0, 1]. Class c sets the
 * spatial frequency (spread between 3 cycles and ~0.35 of the shorter side),
 * the orientation and the phase; each image jitters phase, angle and
 * contrast and adds Gaussian noise. Frequency alone separates the classes,
 * so they stay distinguishable under flips and right-angle rotations.
 */
inline Tensor synthetic_image(std::size_t label, const SyntheticSpec& spec, std::mt19937_64& rng) {
    const double side = double(std::min(spec.height, spec.width));
    const double f_lo = 3.0, f_hi = std::max(f_lo + 1.0, 0.35 * side);
    const double freq = spec.classes > 1 ? f_lo + (f_hi - f_lo) * double(label) / double(spec.classes - 1) : f_lo;
    const double angle0 = std::numbers::pi * double(label) / double(spec.classes) / 2.0;
    const double phase0 = 1.3 * double(label);

    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    const double phase = phase0 + 0.3 * jitter(rng);
    const double angle = angle0 + 0.08 * jitter(rng);
    const double contrast = 0.35 + 0.05 * jitter(rng);
    std::normal_distribution<double> noise(0.0, spec.noise);

    Tensor img({1, 1, spec.height, spec.width});
    const double kx = 2 * std::numbers::pi * freq * std::cos(angle) / side;
    const double ky = 2 * std::numbers::pi * freq * std::sin(angle) / side;
    for (std::size_t y = 0; y < spec.height; ++y)
        for (std::size_t x = 0; x < spec.width; ++x) {
            const double v = 0.5 + contrast * std::sin(kx * double(x) + ky * double(y) + phase) + noise(rng);
            img(0, 0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    return img;
}

inline std::string synthetic_class_name(std::size_t label) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%02zu", label);
    return buf;
}

/// Writes `root/class_XX/img_YYY.png` as 8-bit grayscale. Deterministic per spec.
inline void make_synthetic(const std::filesystem::path& root, const SyntheticSpec& spec) {
    if (spec.classes < 2) throw ConfigError("synthetic corpus needs at least 2 classes");
    if (spec.per_class < 1 || spec.height < 1 || spec.width < 1) throw ConfigError("synthetic corpus dims must be positive");
    std::mt19937_64 rng(spec.seed);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        const std::filesystem::path dir = root / synthetic_class_name(c);
        for (std::size_t i = 0; i < spec.per_class; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "img_%03zu.png", i);
            write_png(dir / name, synthetic_image(c, spec, rng));
        }
    }
}

} // namespace plcnn
