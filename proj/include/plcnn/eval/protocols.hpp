#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "plcnn/data/dataset.hpp"
#include "plcnn/eval/evaluate.hpp"
#include "plcnn/eval/trainer.hpp"

namespace plcnn {

struct CrossValidation {
    std::vector<EvalReport> folds;
    EvalReport aggregate;
};

using FoldLogFn = std::function<void(std::size_t fold, const TrainLogRow&)>;

namespace detail {

inline void sort_by_path(std::vector<std::size_t>& idx, const std::vector<Sample>& samples) {
    std::ranges::sort(idx, [&](std::size_t a, std::size_t b) { return samples[a].source_path < samples[b].source_path; });
}

} // namespace detail

/**
 * k-fold cross-validation over the folds assigned at load time. Fold f
 * trains a fresh network initialized with seed + f on the other folds and
 * evaluates it on fold f; the aggregate pools the confusion matrices.
 */
inline CrossValidation cross_validate(const NetworkConfig& cfg, const Dataset& ds, const TrainOptions& opt,
                                      const FoldLogFn& on_log = {}, std::size_t eval_batch = 32) {
    const std::size_t k = ds.meta.k;
    if (k < 2) throw ConfigError("cross-validation needs k >= 2, got " + std::to_string(k));
    if (cfg.num_classes != ds.meta.class_names.size())
        throw ConfigError("network has " + std::to_string(cfg.num_classes) + " classes, dataset has " +
                          std::to_string(ds.meta.class_names.size()));
    CrossValidation cv;
    for (std::size_t f = 0; f < k; ++f) {
        Partition p = split(ds.samples, f, k);
        detail::sort_by_path(p.test, ds.samples);
        Network net{cfg, build_network(cfg, opt.seed + f)};
        TrainOptions fold_opt = opt;
        fold_opt.seed = opt.seed + f;
        TrainHooks hooks;
        if (on_log) hooks.on_log = [&](const TrainLogRow& row) { on_log(f, row); };
        train_network(net, ds.samples, p.train, fold_opt, hooks);
        cv.folds.push_back(evaluate(net, ds.samples, p.test, ds.meta.class_names, opt.norm, eval_batch));
    }
    cv.aggregate = merge_reports(cv.folds);
    return cv;
}

struct AblationRow {
    double train_fraction = 0;
    double accuracy = 0;
    EvalReport report;
};

inline const std::vector<double> kAblationFractions{0.9, 0.8, 0.7, 0.6};

/// One train/evaluate cycle per fraction on a seeded stratified ratio split.
inline std::vector<AblationRow> split_ablation(const NetworkConfig& cfg, const Dataset& ds, const std::vector<double>& fractions,
                                              const TrainOptions& opt,
                                              const std::function<void(double, const TrainLogRow&)>& on_log = {},
                                              std::size_t eval_batch = 32) {
    if (fractions.empty()) throw InputError("no train fractions given");
    for (double f : fractions)
        if (!(f > 0 && f < 1)) throw InputError("train fraction must lie in (0, 1), got " + std::to_string(f));
    std::vector<AblationRow> rows;
    for (double f : fractions) {
        Partition p = ratio_split(ds.samples, f, opt.seed);
        detail::sort_by_path(p.test, ds.samples);
        Network net{cfg, build_network(cfg, opt.seed)};
        TrainHooks hooks;
        if (on_log) hooks.on_log = [&](const TrainLogRow& row) { on_log(f, row); };
        train_network(net, ds.samples, p.train, opt, hooks);
        EvalReport r = evaluate(net, ds.samples, p.test, ds.meta.class_names, opt.norm, eval_batch);
        rows.push_back({f, r.overall_accuracy, std::move(r)});
    }
    return rows;
}

} // namespace plcnn
