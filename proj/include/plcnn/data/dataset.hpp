#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "plcnn/data/png.hpp"
#include "plcnn/data/transforms.hpp"
#include "plcnn/error.hpp"
#include "plcnn/tensor/tensor.hpp"

namespace plcnn {

enum class SplitRole { None, Train, Val, Test };

struct Sample {
    Tensor image;             // (1, C, H, W), values in [0, 1]
    std::size_t label = 0;
    std::string source_path;  // relative to the dataset root, '/' separated
    std::size_t fold = 0;
    SplitRole role = SplitRole::None;
};

struct DatasetMeta {
    std::vector<std::string> class_names;
    std::vector<std::size_t> counts;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    bool has_manifest = false;

    std::size_t total() const {
        std::size_t t = 0;
        for (std::size_t c : counts) t += c;
        return t;
    }
};

struct Dataset {
    DatasetMeta meta;
    std::vector<Sample> samples;
};

struct LoadOptions {
    std::size_t k = 10;  // 0 skips fold assignment
    std::uint64_t seed = 0;
    std::size_t height = 0;  // 0 keeps the stored size
    std::size_t width = 0;
    std::size_t channels = 3;
};

inline std::vector<Sample> augment(const Sample& s) {
    std::vector<Sample> out;
    out.reserve(kAugmentVariants);
    for (std::size_t v = 0; v < kAugmentVariants; ++v) {
        Sample a = s;
        a.image = augment_variant(s.image, v);
        out.push_back(std::move(a));
    }
    return out;
}

/**
 * Stratified fold assignment. Within each class the members are shuffled
 * with a generator seeded by `seed`, then dealt round-robin; the dealing
 * position carries over from one class to the next so fold sizes stay
 * balanced overall. `labels` must be in canonical order.
 */
inline std::vector<std::size_t> assign_folds(const std::vector<std::size_t>& labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be at least 2, got " + std::to_string(k));
    std::map<std::size_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
    for (const auto& [label, idx] : members)
        if (idx.size() < k)
            throw ConfigError("k = " + std::to_string(k) + " exceeds the " + std::to_string(idx.size()) +
                              " samples of class " + std::to_string(label));
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> folds(labels.size());
    std::size_t deal = 0;
    for (auto& [label, idx] : members) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i : idx) folds[i] = deal++ % k;
    }
    return folds;
}

namespace detail {

inline bool is_png(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::ranges::transform(ext, ext.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return ext == ".png";
}

inline std::map<std::string, SplitRole> read_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::map<std::string, SplitRole> roles;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string path, role;
        if (!(fields >> path)) continue;
        fields >> role;
        SplitRole r;
        if (role == "train") r = SplitRole::Train;
        else if (role == "val") r = SplitRole::Val;
        else if (role == "test") r = SplitRole::Test;
        else throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": expected train|val|test, got '" + role + "'");
        roles[path] = r;
    }
    return roles;
}

} // namespace detail

/**
 * Loads `root/<class>/<image>.png`. Classes are labelled by sorted directory
 * name and files are taken in sorted order, so the result does not depend on
 * directory listing order. A `split.txt` manifest, if present, tags each
 * sample with its role; folds are assigned either way.
 */
inline Dataset load_dataset(const std::filesystem::path& root, const LoadOptions& opt) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " is not a directory");
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && e.path().filename().string().front() != '.') class_dirs.push_back(e.path());
    std::ranges::sort(class_dirs);
    if (class_dirs.empty()) throw IoError("no class directories under " + root.string());

    Dataset ds;
    ds.meta.k = opt.k;
    ds.meta.seed = opt.seed;
    for (std::size_t label = 0; label < class_dirs.size(); ++label) {
        const fs::path& dir = class_dirs[label];
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && detail::is_png(e.path())) files.push_back(e.path());
        std::ranges::sort(files);
        if (files.empty()) throw IoError("class directory " + dir.string() + " contains no PNG images");
        ds.meta.class_names.push_back(dir.filename().string());
        ds.meta.counts.push_back(files.size());
        for (const fs::path& f : files) {
            Tensor img = replicate_channels(read_png(f), opt.channels);
            if (opt.height && opt.width) img = resize_bilinear(img, opt.height, opt.width);
            ds.samples.push_back({std::move(img), label, fs::relative(f, root).generic_string(), 0, SplitRole::None});
        }
    }

    if (opt.k != 0) {
        std::vector<std::size_t> labels;
        for (const Sample& s : ds.samples) labels.push_back(s.label);
        const std::vector<std::size_t> folds = assign_folds(labels, opt.k, opt.seed);
        for (std::size_t i = 0; i < folds.size(); ++i) ds.samples[i].fold = folds[i];
    }

    if (fs::exists(root / "split.txt")) {
        const auto roles = detail::read_manifest(root / "split.txt");
        for (Sample& s : ds.samples) {
            const auto it = roles.find(s.source_path);
            if (it == roles.end()) throw ConfigError("split.txt has no entry for " + s.source_path);
            s.role = it->second;
        }
        ds.meta.has_manifest = true;
    }
    return ds;
}

/// Index sets into a sample list.
struct Partition {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::size_t> validation;  // filled only from a split manifest
};

inline Partition split(const std::vector<Sample>& samples, std::size_t fold_index, std::size_t k) {
    if (fold_index >= k)
        throw InputError("fold index " + std::to_string(fold_index) + " out of range for k = " + std::to_string(k));
    Partition p;
    for (std::size_t i = 0; i < samples.size(); ++i) (samples[i].fold == fold_index ? p.test : p.train).push_back(i);
    return p;
}

/// Number of training samples for a class of `n` at `fraction`: round half up, keeping one sample on each side.
inline std::size_t ratio_train_count(std::size_t n, double fraction) {
    if (n < 2) return n;
    const auto t = static_cast<std::size_t>(std::floor(fraction * double(n) + 0.5 + 1e-9));
    return std::clamp<std::size_t>(t, 1, n - 1);
}

/// Seeded stratified split at `train_fraction`; each class contributes ratio_train_count members to train.
inline Partition ratio_split(const std::vector<Sample>& samples, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InputError("train fraction must lie in (0, 1), got " + std::to_string(train_fraction));
    std::map<std::size_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < samples.size(); ++i) members[samples[i].label].push_back(i);
    std::mt19937_64 rng(seed);
    Partition p;
    for (auto& [label, idx] : members) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::size_t t = ratio_train_count(idx.size(), train_fraction);
        p.train.insert(p.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(t));
        p.test.insert(p.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(t), idx.end());
    }
    std::ranges::sort(p.train);
    std::ranges::sort(p.test);
    return p;
}

inline Partition manifest_split(const std::vector<Sample>& samples) {
    Partition p;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        switch (samples[i].role) {
        case SplitRole::Train: p.train.push_back(i); break;
        case SplitRole::Test: p.test.push_back(i); break;
        case SplitRole::Val: p.validation.push_back(i); break;
        case SplitRole::None: throw InputError(samples[i].source_path + " has no split role");
        }
    }
    return p;
}

} // namespace plcnn
