#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>

#include "plcnn/tensor/tensor.hpp"

namespace plcnn {

enum class ParamKind { ConvWeight, LinearWeight, Bias, Gamma, Beta, RunningMean, RunningVar };

inline bool is_trainable(ParamKind k) { return k != ParamKind::RunningMean && k != ParamKind::RunningVar; }

/// Only conv and linear weights receive weight decay.
inline bool is_decayed(ParamKind k) { return k == ParamKind::ConvWeight || k == ParamKind::LinearWeight; }

/// Rank of the tensor as stored on disk: 4 for conv kernels, 2 for linear
/// weights, 1 for per-channel vectors.
inline std::size_t natural_rank(ParamKind k) {
    switch (k) {
    case ParamKind::ConvWeight: return 4;
    case ParamKind::LinearWeight: return 2;
    default: return 1;
    }
}

template <typename Scalar>
struct Parameter {
    BasicTensor<Scalar> value;
    ParamKind kind;

    friend bool operator==(const Parameter&, const Parameter&) = default;
};

/// Named parameter tensors, keyed by dotted path (e.g. "stage1.plain.conv0.weight").
template <typename Scalar>
class BasicParameters {
public:
    using Map = std::map<std::string, Parameter<Scalar>>;

    Parameter<Scalar>& add(const std::string& name, BasicTensor<Scalar> value, ParamKind kind) {
        auto [it, inserted] = entries_.try_emplace(name, Parameter<Scalar>{std::move(value), kind});
        if (!inserted) throw ConfigError("duplicate parameter path " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    Parameter<Scalar>& at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ConfigError("unknown parameter path " + name);
        return it->second;
    }
    const Parameter<Scalar>& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ConfigError("unknown parameter path " + name);
        return it->second;
    }

    BasicTensor<Scalar>& tensor(const std::string& name) { return at(name).value; }
    const BasicTensor<Scalar>& tensor(const std::string& name) const { return at(name).value; }

    std::size_t size() const noexcept { return entries_.size(); }
    auto begin() noexcept { return entries_.begin(); }
    auto end() noexcept { return entries_.end(); }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    /// Total scalar count of trainable tensors.
    std::size_t trainable_count() const {
        std::size_t n = 0;
        for (const auto& [name, p] : entries_)
            if (is_trainable(p.kind)) n += p.value.size();
        return n;
    }

    template <typename Other>
    BasicParameters<Other> cast() const {
        BasicParameters<Other> out;
        for (const auto& [name, p] : entries_) out.add(name, p.value.template cast<Other>(), p.kind);
        return out;
    }

    friend bool operator==(const BasicParameters&, const BasicParameters&) = default;

private:
    Map entries_;
};

using Parameters = BasicParameters<float>;

template <typename Scalar>
using BasicGradients = std::map<std::string, BasicTensor<Scalar>>;
using Gradients = BasicGradients<float>;

} // namespace plcnn
