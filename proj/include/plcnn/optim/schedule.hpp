#pragma once

#include <cmath>
#include <cstdint>

namespace plcnn {

inline constexpr double kPaperInitialLr = 1e-2;
inline constexpr std::uint64_t kPaperHalvingPeriod = 100000;
inline constexpr std::uint64_t kDeskHalvingPeriod = 500;

/// Step decay: the rate halves after every `halving_period` iterations.
inline double lr_schedule(double initial_lr, std::uint64_t iteration,
                          std::uint64_t halving_period = kPaperHalvingPeriod) {
    const std::uint64_t halvings = halving_period == 0 ? 0 : iteration / halving_period;
    return initial_lr * std::ldexp(1.0, -static_cast<int>(halvings > 1000 ? 1000 : halvings));
}

} // namespace plcnn
