#pragma once

#include <string>
#include <vector>

#include "plcnn/error.hpp"

namespace plcnn {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::string> class_names)
        : names_(std::move(class_names)), counts_(names_.size() * names_.size(), 0) {}

    std::size_t classes() const noexcept { return names_.size(); }
    const std::vector<std::string>& class_names() const noexcept { return names_; }

    void add(std::size_t truth, std::size_t predicted) {
        if (truth >= classes() || predicted >= classes())
            throw InputError("confusion entry (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                             ") outside " + std::to_string(classes()) + " classes");
        ++counts_[truth * classes() + predicted];
    }

    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * classes() + predicted); }

    std::size_t row_sum(std::size_t truth) const {
        std::size_t s = 0;
        for (std::size_t p = 0; p < classes(); ++p) s += at(truth, p);
        return s;
    }

    std::size_t total() const {
        std::size_t s = 0;
        for (std::size_t v : counts_) s += v;
        return s;
    }

    std::size_t trace() const {
        std::size_t s = 0;
        for (std::size_t c = 0; c < classes(); ++c) s += at(c, c);
        return s;
    }

    /// Percentage in [0, 100]; 0 for an empty matrix.
    double accuracy() const { return total() == 0 ? 0.0 : 100.0 * double(trace()) / double(total()); }

    /// Per-class recall in percent; 0 for classes with no samples.
    std::vector<double> per_class_accuracy() const {
        std::vector<double> out(classes(), 0.0);
        for (std::size_t c = 0; c < classes(); ++c)
            if (const std::size_t r = row_sum(c)) out[c] = 100.0 * double(at(c, c)) / double(r);
        return out;
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        if (o.names_ != names_) throw InputError("cannot add confusion matrices over different classes");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
        return *this;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::vector<std::string> names_;
    std::vector<std::size_t> counts_;
};

struct ConfidenceRecord {
    std::string path;
    std::size_t truth = 0;
    std::size_t predicted = 0;
    double confidence = 0;
    bool correct = false;
};

struct EvalReport {
    ConfusionMatrix confusion;
    double overall_accuracy = 0;
    std::vector<double> per_class_accuracy;
    std::vector<ConfidenceRecord> confidences;
};

inline EvalReport make_report(ConfusionMatrix confusion, std::vector<ConfidenceRecord> records) {
    EvalReport r;
    r.overall_accuracy = confusion.accuracy();
    r.per_class_accuracy = confusion.per_class_accuracy();
    r.confusion = std::move(confusion);
    r.confidences = std::move(records);
    return r;
}

/// Pools reports: confusion matrices summed, records concatenated in order.
inline EvalReport merge_reports(const std::vector<EvalReport>& parts) {
    if (parts.empty()) throw InputError("no reports to merge");
    ConfusionMatrix total(parts.front().confusion.class_names());
    std::vector<ConfidenceRecord> records;
    for (const EvalReport& p : parts) {
        total += p.confusion;
        records.insert(records.end(), p.confidences.begin(), p.confidences.end());
    }
    return make_report(std::move(total), std::move(records));
}

} // namespace plcnn
