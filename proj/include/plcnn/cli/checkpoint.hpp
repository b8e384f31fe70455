#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "plcnn/data/atomic_file.hpp"
#include "plcnn/graph/network.hpp"

namespace plcnn {

/*
 * Layout, all integers little-endian:
 *   "PLCN" | u32 version | u32 tag length, tag bytes | u64 iteration | u32 record count
 *   per record: u32 name length, name bytes | u32 rank | rank x u32 dims | float32 values
 */
inline constexpr char kCheckpointMagic[4] = {'P', 'L', 'C', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    friend bool operator==(const TensorRecord&, const TensorRecord&) = default;
};

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string preset_tag;
    std::uint64_t iteration = 0;
    std::vector<TensorRecord> tensors;

    const TensorRecord* find(const std::string& name) const {
        for (const TensorRecord& r : tensors)
            if (r.name == name) return &r;
        return nullptr;
    }

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::string_view s) { out_.append(s); }
    void text(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s);
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class ByteReader {
public:
    ByteReader(std::string_view data, std::string source) : data_(data), source_(std::move(source)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        return lo | (std::uint64_t(u32()) << 32);
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string_view bytes(std::size_t n) {
        need(n);
        std::string_view v = data_.substr(pos_, n);
        pos_ += n;
        return v;
    }
    std::string text() { return std::string(bytes(u32())); }
    bool done() const { return pos_ == data_.size(); }
    [[noreturn]] void fail(const std::string& what) const {
        throw IoError(source_ + ": " + what + " at byte " + std::to_string(pos_));
    }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) fail("truncated checkpoint");
    }
    std::string_view data_;
    std::string source_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string encode_checkpoint(const Checkpoint& cp) {
    detail::ByteWriter w;
    w.bytes(std::string_view(kCheckpointMagic, 4));
    w.u32(cp.version);
    w.text(cp.preset_tag);
    w.u64(cp.iteration);
    w.u32(static_cast<std::uint32_t>(cp.tensors.size()));
    for (const TensorRecord& r : cp.tensors) {
        std::size_t count = 1;
        for (std::uint32_t d : r.dims) count *= d;
        if (count != r.values.size()) throw ConfigError("tensor record " + r.name + " dims do not match its values");
        w.text(r.name);
        w.u32(static_cast<std::uint32_t>(r.dims.size()));
        for (std::uint32_t d : r.dims) w.u32(d);
        for (float v : r.values) w.f32(v);
    }
    return w.take();
}

inline Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source = "checkpoint") {
    detail::ByteReader r(bytes, source);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw IoError(source + ": not a PLCN checkpoint (bad magic)");
    r.bytes(4);
    Checkpoint cp;
    cp.version = r.u32();
    if (cp.version != kCheckpointVersion)
        throw IoError(source + ": unsupported checkpoint version " + std::to_string(cp.version));
    cp.preset_tag = r.text();
    cp.iteration = r.u64();
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorRecord t;
        t.name = r.text();
        const std::uint32_t rank = r.u32();
        if (rank > 8) r.fail("implausible rank " + std::to_string(rank) + " for " + t.name);
        std::uint64_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            t.dims.push_back(r.u32());
            n *= t.dims.back();
        }
        if (n * 4 > bytes.size()) r.fail("tensor " + t.name + " larger than the file");
        t.values.resize(n);
        for (float& v : t.values) v = r.f32();
        cp.tensors.push_back(std::move(t));
    }
    if (!r.done()) r.fail("trailing bytes after last record");
    return cp;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
    const std::string bytes = encode_checkpoint(cp);
    write_atomically(path, [&](const std::filesystem::path& tmp) {
        std::ofstream out(tmp, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        if (!out) throw IoError("cannot write " + path.string());
    });
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_text(path), path.string());
}

/// Dims as stored: conv weights rank 4, linear weights rank 2 (outputs, inputs), the rest rank 1.
inline std::vector<std::uint32_t> stored_dims(const Parameter<float>& p) {
    const Dims d = p.value.dims();
    switch (natural_rank(p.kind)) {
    case 4: return {std::uint32_t(d[0]), std::uint32_t(d[1]), std::uint32_t(d[2]), std::uint32_t(d[3])};
    case 2: return {std::uint32_t(d[0]), std::uint32_t(d[1] * d[2] * d[3])};
    default: return {std::uint32_t(p.value.size())};
    }
}

inline Checkpoint to_checkpoint(const Network& net, std::uint64_t iteration) {
    Checkpoint cp;
    cp.preset_tag = network_tag(net.config);
    cp.iteration = iteration;
    for (const auto& [name, p] : net.params) cp.tensors.push_back({name, stored_dims(p), p.value.values()});
    return cp;
}

namespace detail {

inline void assign_record(Parameter<float>& p, const std::string& name, const TensorRecord& r) {
    if (r.dims != stored_dims(p)) {
        std::ostringstream msg;
        msg << "tensor " << r.name << " has dims [";
        for (std::size_t i = 0; i < r.dims.size(); ++i) msg << (i ? "," : "") << r.dims[i];
        msg << "] but parameter " << name << " expects [";
        const auto want = stored_dims(p);
        for (std::size_t i = 0; i < want.size(); ++i) msg << (i ? "," : "") << want[i];
        msg << "]";
        throw ConfigError(msg.str());
    }
    std::ranges::copy(r.values, p.value.data().begin());
}

} // namespace detail

/// Rebuilds the network described by the checkpoint's tag and loads every parameter.
inline Network network_from_checkpoint(const Checkpoint& cp) {
    Network net{config_from_tag(cp.preset_tag), {}};
    net.params = build_network(net.config, 0);
    if (cp.tensors.size() != net.params.size())
        throw ConfigError("checkpoint holds " + std::to_string(cp.tensors.size()) + " tensors, network " +
                          cp.preset_tag + " has " + std::to_string(net.params.size()));
    for (auto& [name, p] : net.params) {
        const TensorRecord* r = cp.find(name);
        if (!r) throw ConfigError("checkpoint lacks parameter " + name);
        detail::assign_record(p, name, *r);
    }
    return net;
}

/// Pairs of (source tensor name, target parameter name).
using WeightMapping = std::vector<std::pair<std::string, std::string>>;

/// Lines of `source target` or `source = target`; `#` starts a comment.
inline WeightMapping parse_mapping(const std::string& text, const std::string& source = "mapping") {
    WeightMapping m;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        for (char& c : line)
            if (c == '=') c = ' ';
        std::istringstream f(line);
        std::string a, b, extra;
        if (!(f >> a)) continue;
        if (!(f >> b) || (f >> extra))
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'source target'");
        m.emplace_back(a, b);
    }
    return m;
}

struct ImportResult {
    std::vector<std::string> mapped;
    std::vector<std::string> unmapped;  // kept their initialization
};

/// Copies mapped source tensors into `net`. Any dims mismatch is an error naming both entries.
inline ImportResult import_weights(Network& net, const Checkpoint& source, const WeightMapping& mapping) {
    ImportResult result;
    std::map<std::string, std::string> target_to_source;
    for (const auto& [src, dst] : mapping) {
        if (!net.params.contains(dst)) throw ConfigError("mapping target " + dst + " is not a parameter of the network");
        if (!source.find(src)) throw ConfigError("mapping source " + src + " is not in the source file");
        if (!target_to_source.emplace(dst, src).second) throw ConfigError("parameter " + dst + " is mapped twice");
    }
    for (auto& [name, p] : net.params) {
        const auto it = target_to_source.find(name);
        if (it == target_to_source.end()) {
            result.unmapped.push_back(name);
            continue;
        }
        detail::assign_record(p, name, *source.find(it->second));
        result.mapped.push_back(name);
    }
    return result;
}

} // namespace plcnn
