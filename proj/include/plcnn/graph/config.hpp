#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "plcnn/error.hpp"

namespace plcnn {

enum class BlockKind { PlainSmall, PlainLarge, ResidualSmall, ResidualLarge, Dense };

inline const char* to_string(BlockKind k) {
    switch (k) {
    case BlockKind::PlainSmall: return "PlainSmall";
    case BlockKind::PlainLarge: return "PlainLarge";
    case BlockKind::ResidualSmall: return "ResidualSmall";
    case BlockKind::ResidualLarge: return "ResidualLarge";
    case BlockKind::Dense: return "Dense";
    }
    return "?";
}

struct BlockSpec {
    BlockKind kind = BlockKind::PlainSmall;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    /// Dense only.
    std::size_t dense_layers = 0;
    std::size_t growth = 0;

    friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

/// One stage of the plain/residual branches. Both branch blocks receive
/// tensors with `plain.in_channels` channels; a ResidualSmall block is
/// preceded by a strided transition conv from that width to its own.
struct StageSpec {
    BlockSpec plain;
    BlockSpec residual;

    friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

/// Stem conv, pooling down to the final resolution, one dense block and a
/// 1x1 compression.
struct DenseBranchSpec {
    std::size_t stem_channels = 0;
    BlockSpec block;
    std::size_t compression_channels = 0;

    friend bool operator==(const DenseBranchSpec&, const DenseBranchSpec&) = default;
};

struct NetworkConfig {
    std::string preset;
    std::array<std::size_t, 3> input_dims{3, 64, 64};  // (C, H, W)
    std::vector<StageSpec> stages;
    /// Width after fusing stage s + 2 (the first stage is never fused).
    std::vector<std::size_t> compression_channels;
    DenseBranchSpec dense;
    std::size_t num_classes = 2;

    std::size_t final_height() const { return input_dims[1] >> stages.size(); }
    std::size_t final_width() const { return input_dims[2] >> stages.size(); }
    /// Channels of the final [dense; fused residual+plain] stack.
    std::size_t final_channels() const {
        return dense.compression_channels + (compression_channels.empty() ? 0 : compression_channels.back());
    }
    std::size_t head_input_width() const { return final_channels() * final_height() * final_width(); }

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Knobs that determine a NetworkConfig. Unset fields take the preset's values.
struct NetworkOptions {
    std::string preset = "desk64";
    std::size_t num_classes = 2;
    std::optional<std::size_t> input_size;
    std::optional<std::vector<std::size_t>> widths;
    std::optional<std::vector<std::size_t>> compression;
    std::optional<std::size_t> stem_channels;
    std::optional<std::size_t> dense_layers;
    std::optional<std::size_t> growth;
    std::optional<std::size_t> dense_compression;
};

inline void validate(const NetworkConfig& cfg) {
    auto fail = [](const std::string& msg) { throw ConfigError("invalid network config: " + msg); };
    if (cfg.num_classes < 2) fail("num_classes must be at least 2, got " + std::to_string(cfg.num_classes));
    const auto [c, h, w] = cfg.input_dims;
    if (c == 0 || h == 0 || w == 0) fail("input dims must be positive");
    if (cfg.stages.size() < 2) fail("at least 2 stages are required");
    if (cfg.stages.size() >= 16) fail("too many stages");
    const std::size_t scale = std::size_t{1} << cfg.stages.size();
    if (h % scale != 0 || w % scale != 0) {
        fail("input " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by 2^" +
             std::to_string(cfg.stages.size()));
    }
    if (cfg.compression_channels.size() + 1 != cfg.stages.size()) {
        fail("expected " + std::to_string(cfg.stages.size() - 1) + " compression widths, got " +
             std::to_string(cfg.compression_channels.size()));
    }
    for (std::size_t v : cfg.compression_channels)
        if (v == 0) fail("compression widths must be positive");

    std::size_t expected_in = c;
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        const StageSpec& st = cfg.stages[s];
        const std::string where = "stage" + std::to_string(s + 1);
        if (st.plain.kind != BlockKind::PlainSmall && st.plain.kind != BlockKind::PlainLarge)
            fail(where + " plain block has kind " + to_string(st.plain.kind));
        if (st.plain.in_channels != expected_in) {
            fail(where + " plain block expects " + std::to_string(st.plain.in_channels) + " input channels, receives " +
                 std::to_string(expected_in));
        }
        if (st.plain.out_channels == 0 || st.residual.out_channels == 0) fail(where + " widths must be positive");
        if (st.residual.kind == BlockKind::ResidualSmall) {
            if (st.residual.in_channels != st.residual.out_channels)
                fail(where + " ResidualSmall needs in_channels == out_channels for its identity skip");
        } else if (st.residual.kind == BlockKind::ResidualLarge) {
            if (st.residual.in_channels != expected_in) {
                fail(where + " ResidualLarge expects " + std::to_string(st.residual.in_channels) +
                     " input channels, receives " + std::to_string(expected_in));
            }
        } else {
            fail(where + " residual block has kind " + to_string(st.residual.kind));
        }
        if (s == 0) {
            if (st.plain.out_channels != st.residual.out_channels)
                fail("stage1 plain and residual widths must match to feed stage2");
            expected_in = st.plain.out_channels;
        } else {
            expected_in = cfg.compression_channels[s - 1];
        }
    }
    const DenseBranchSpec& d = cfg.dense;
    if (d.stem_channels == 0) fail("dense stem width must be positive");
    if (d.block.kind != BlockKind::Dense) fail("dense branch block must have kind Dense");
    if (d.block.in_channels != d.stem_channels) fail("dense block input must equal the stem width");
    if (d.block.dense_layers < 1) fail("dense block needs at least one layer");
    if (d.block.growth == 0) fail("dense growth must be positive");
    if (d.block.out_channels != d.stem_channels + d.block.dense_layers * d.block.growth)
        fail("dense block out_channels must equal stem + layers * growth");
    if (d.compression_channels == 0) fail("dense compression width must be positive");
}

/// Builds the stage plan: small blocks for the first two stages, large after.
inline NetworkConfig make_network_config(const NetworkOptions& opt) {
    NetworkConfig cfg;
    cfg.preset = opt.preset;
    cfg.num_classes = opt.num_classes;
    std::vector<std::size_t> widths, compression;
    std::size_t size = 0;
    if (opt.preset == "desk64") {
        size = 64;
        widths = {8, 16, 32, 64};
        compression = {16, 32, 64};
    } else if (opt.preset == "paper224") {
        size = 224;
        widths = {64, 128, 256, 512};
        compression = {128, 256, 512};
    } else {
        throw ConfigError("unknown preset '" + opt.preset + "' (expected desk64 or paper224)");
    }
    if (opt.input_size) size = *opt.input_size;
    if (opt.widths) widths = *opt.widths;
    if (opt.compression) compression = *opt.compression;
    if (widths.empty()) throw ConfigError("invalid network config: widths must not be empty");
    cfg.input_dims = {3, size, size};

    std::size_t in = 3;
    for (std::size_t s = 0; s < widths.size(); ++s) {
        const bool small = s < 2;
        StageSpec st;
        st.plain = {small ? BlockKind::PlainSmall : BlockKind::PlainLarge, in, widths[s]};
        st.residual = small ? BlockSpec{BlockKind::ResidualSmall, widths[s], widths[s]}
                            : BlockSpec{BlockKind::ResidualLarge, in, widths[s]};
        cfg.stages.push_back(st);
        if (s == 0) {
            in = widths[0];
        } else if (s - 1 < compression.size()) {
            in = compression[s - 1];
        }
    }
    cfg.compression_channels = compression;

    const std::size_t stem = opt.stem_channels.value_or(widths.front());
    const std::size_t layers = opt.dense_layers.value_or(4);
    const std::size_t growth = opt.growth.value_or(std::max<std::size_t>(1, widths.back() / 4));
    cfg.dense.stem_channels = stem;
    cfg.dense.block = {BlockKind::Dense, stem, stem + layers * growth, layers, growth};
    cfg.dense.compression_channels = opt.dense_compression.value_or(widths.back());
    validate(cfg);
    return cfg;
}

inline NetworkConfig make_preset(const std::string& preset, std::size_t num_classes) {
    NetworkOptions o;
    o.preset = preset;
    o.num_classes = num_classes;
    return make_network_config(o);
}

namespace detail {

inline std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline std::size_t parse_size(std::string_view text, std::string_view key) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError("bad value '" + std::string(text) + "' for " + std::string(key));
    return v;
}

inline std::vector<std::size_t> parse_size_list(std::string_view text, std::string_view key) {
    std::vector<std::size_t> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        out.push_back(parse_size(text.substr(0, comma), key));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    if (out.empty()) throw ConfigError("empty list for " + std::string(key));
    return out;
}

} // namespace detail

/// Self-describing text form stored in checkpoints.
inline std::string network_tag(const NetworkConfig& cfg) {
    std::vector<std::size_t> widths;
    for (const auto& st : cfg.stages) widths.push_back(st.plain.out_channels);
    std::ostringstream os;
    os << cfg.preset << ";classes=" << cfg.num_classes << ";input=" << cfg.input_dims[1]
       << ";widths=" << detail::join(widths) << ";compression=" << detail::join(cfg.compression_channels)
       << ";stem=" << cfg.dense.stem_channels << ";dense_layers=" << cfg.dense.block.dense_layers
       << ";growth=" << cfg.dense.block.growth << ";dense_compression=" << cfg.dense.compression_channels;
    return os.str();
}

inline NetworkConfig config_from_tag(std::string_view tag) {
    NetworkOptions o;
    const auto first = tag.find(';');
    o.preset = std::string(tag.substr(0, first));
    std::string_view rest = first == std::string_view::npos ? std::string_view{} : tag.substr(first + 1);
    while (!rest.empty()) {
        const auto semi = rest.find(';');
        const std::string_view item = rest.substr(0, semi);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) throw ConfigError("malformed network tag entry '" + std::string(item) + "'");
        const std::string_view key = item.substr(0, eq), val = item.substr(eq + 1);
        if (key == "classes") o.num_classes = detail::parse_size(val, key);
        else if (key == "input") o.input_size = detail::parse_size(val, key);
        else if (key == "widths") o.widths = detail::parse_size_list(val, key);
        else if (key == "compression") o.compression = detail::parse_size_list(val, key);
        else if (key == "stem") o.stem_channels = detail::parse_size(val, key);
        else if (key == "dense_layers") o.dense_layers = detail::parse_size(val, key);
        else if (key == "growth") o.growth = detail::parse_size(val, key);
        else if (key == "dense_compression") o.dense_compression = detail::parse_size(val, key);
        else throw ConfigError("unknown network tag key '" + std::string(key) + "'");
        if (semi == std::string_view::npos) break;
        rest.remove_prefix(semi + 1);
    }
    return make_network_config(o);
}

} // namespace plcnn
