#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "plcnn/error.hpp"

namespace plcnn {

using Dims = std::array<std::size_t, 4>;

inline std::size_t element_count(const Dims& d) { return d[0] * d[1] * d[2] * d[3]; }

inline std::string to_string(const Dims& d) {
    std::ostringstream os;
    os << '(' << d[0] << ',' << d[1] << ',' << d[2] << ',' << d[3] << ')';
    return os.str();
}

/**
 * Dense (N, C, H, W) array in row-major order with an optional gradient
 * buffer of the same length.
 *
 * A default-constructed tensor is empty (all dims zero) and is only useful
 * as a placeholder; every constructed tensor has positive dims.
 */
template <typename Scalar>
class BasicTensor {
public:
    using value_type = Scalar;

    BasicTensor() = default;

    explicit BasicTensor(const Dims& dims, Scalar fill = Scalar(0))
        : dims_(checked(dims)), data_(element_count(dims), fill) {}

    BasicTensor(const Dims& dims, std::vector<Scalar> data) : dims_(checked(dims)), data_(std::move(data)) {
        if (data_.size() != element_count(dims_)) {
            throw ConfigError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                              to_string(dims_));
        }
    }

    const Dims& dims() const noexcept { return dims_; }
    std::size_t n() const noexcept { return dims_[0]; }
    std::size_t c() const noexcept { return dims_[1]; }
    std::size_t h() const noexcept { return dims_[2]; }
    std::size_t w() const noexcept { return dims_[3]; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<Scalar> data() noexcept { return data_; }
    std::span<const Scalar> data() const noexcept { return data_; }
    std::vector<Scalar>& values() noexcept { return data_; }
    const std::vector<Scalar>& values() const noexcept { return data_; }

    Scalar* ptr() noexcept { return data_.data(); }
    const Scalar* ptr() const noexcept { return data_.data(); }

    std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return ((n * dims_[1] + c) * dims_[2] + y) * dims_[3] + x;
    }
    Scalar& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[offset(n, c, y, x)];
    }
    Scalar operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[offset(n, c, y, x)];
    }
    Scalar& operator[](std::size_t i) noexcept { return data_[i]; }
    Scalar operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Pointer to the start of sample `n`, channel `c`.
    Scalar* plane(std::size_t n, std::size_t c) noexcept { return data_.data() + offset(n, c, 0, 0); }
    const Scalar* plane(std::size_t n, std::size_t c) const noexcept { return data_.data() + offset(n, c, 0, 0); }
    std::span<Scalar> channel(std::size_t n, std::size_t c) noexcept { return {plane(n, c), h() * w()}; }
    std::span<const Scalar> channel(std::size_t n, std::size_t c) const noexcept { return {plane(n, c), h() * w()}; }

    bool has_grad() const noexcept { return !grad_.empty(); }
    std::span<Scalar> grad() noexcept { return grad_; }
    std::span<const Scalar> grad() const noexcept { return grad_; }
    /// Allocates a zeroed gradient buffer if none exists.
    std::span<Scalar> ensure_grad() {
        if (grad_.empty()) grad_.assign(data_.size(), Scalar(0));
        return grad_;
    }
    void zero_grad() { std::fill(grad_.begin(), grad_.end(), Scalar(0)); }
    void drop_grad() { grad_.clear(); grad_.shrink_to_fit(); }

    bool all_finite() const noexcept {
        for (Scalar v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// Same data viewed with different dims of equal element count.
    BasicTensor reshaped(const Dims& dims) const& {
        return BasicTensor(dims, data_);
    }
    BasicTensor reshaped(const Dims& dims) && {
        return BasicTensor(dims, std::move(data_));
    }

    /// Copy of sample `n` as a batch of one.
    BasicTensor sample(std::size_t n) const {
        const std::size_t stride = dims_[1] * dims_[2] * dims_[3];
        std::vector<Scalar> out(data_.begin() + static_cast<std::ptrdiff_t>(n * stride),
                                data_.begin() + static_cast<std::ptrdiff_t>((n + 1) * stride));
        return BasicTensor({1, dims_[1], dims_[2], dims_[3]}, std::move(out));
    }

    template <typename Other>
    BasicTensor<Other> cast() const {
        std::vector<Other> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<Other>(data_[i]);
        return BasicTensor<Other>(dims_, std::move(out));
    }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
        return a.dims_ == b.dims_ && a.data_ == b.data_;
    }

private:
    static const Dims& checked(const Dims& d) {
        for (std::size_t v : d) {
            if (v == 0) throw ConfigError("tensor dims must be positive, got " + to_string(d));
        }
        return d;
    }

    Dims dims_{0, 0, 0, 0};
    std::vector<Scalar> data_;
    std::vector<Scalar> grad_;
};

using Tensor = BasicTensor<float>;

/// Stacks single-sample tensors of identical (C, H, W) into one batch.
template <typename Scalar>
BasicTensor<Scalar> stack_batch(std::span<const BasicTensor<Scalar>* const> items) {
    if (items.empty()) throw InputError("cannot stack an empty batch");
    const Dims first = items.front()->dims();
    const std::size_t stride = first[1] * first[2] * first[3];
    BasicTensor<Scalar> out({items.size(), first[1], first[2], first[3]});
    for (std::size_t i = 0; i < items.size(); ++i) {
        const Dims d = items[i]->dims();
        if (d[0] != 1 || d[1] != first[1] || d[2] != first[2] || d[3] != first[3]) {
            throw ConfigError("batch item " + std::to_string(i) + " has dims " + to_string(d) + ", expected " +
                              to_string(first));
        }
        std::copy(items[i]->ptr(), items[i]->ptr() + stride, out.ptr() + i * stride);
    }
    return out;
}

} // namespace plcnn
