#pragma once

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "plcnn/data/atomic_file.hpp"
#include "plcnn/eval/confusion.hpp"
#include "plcnn/eval/protocols.hpp"

namespace plcnn {

namespace detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// CSV field quoting for names that contain separators.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

} // namespace detail

inline std::string format_accuracy(double percent) { return detail::fmt("%.1f", percent); }

inline std::string confusion_csv(const ConfusionMatrix& m) {
    std::ostringstream out;
    out << "true_class";
    for (const std::string& n : m.class_names()) out << ',' << detail::csv_field(n);
    out << '\n';
    for (std::size_t t = 0; t < m.classes(); ++t) {
        out << detail::csv_field(m.class_names()[t]);
        for (std::size_t p = 0; p < m.classes(); ++p) out << ',' << m.at(t, p);
        out << '\n';
    }
    return out.str();
}

inline std::string confidences_csv(const std::vector<ConfidenceRecord>& records, const std::vector<std::string>& names) {
    std::ostringstream out;
    out << "path,true,predicted,confidence,correct\n";
    for (const ConfidenceRecord& r : records)
        out << detail::csv_field(r.path) << ',' << detail::csv_field(names.at(r.truth)) << ','
            << detail::csv_field(names.at(r.predicted)) << ',' << detail::fmt("%.8f", r.confidence) << ','
            << (r.correct ? 1 : 0) << '\n';
    return out.str();
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << "train_fraction,accuracy\n";
    for (const AblationRow& r : rows) out << detail::fmt("%.2f", r.train_fraction) << ',' << format_accuracy(r.accuracy) << '\n';
    return out.str();
}

inline std::string report_summary(const EvalReport& r, const std::string& heading) {
    std::ostringstream out;
    out << heading << '\n';
    out << "samples " << r.confusion.total() << '\n';
    out << "accuracy " << format_accuracy(r.overall_accuracy) << '\n';
    for (std::size_t c = 0; c < r.confusion.classes(); ++c)
        out << "  " << r.confusion.class_names()[c] << ' ' << format_accuracy(r.per_class_accuracy[c]) << " ("
            << r.confusion.at(c, c) << '/' << r.confusion.row_sum(c) << ")\n";
    return out.str();
}

inline std::string cross_validation_summary(const CrossValidation& cv, const std::string& header) {
    std::ostringstream out;
    out << header;
    for (std::size_t f = 0; f < cv.folds.size(); ++f)
        out << "fold " << f << " accuracy " << format_accuracy(cv.folds[f].overall_accuracy) << " ("
            << cv.folds[f].confusion.trace() << '/' << cv.folds[f].confusion.total() << ")\n";
    out << report_summary(cv.aggregate, "aggregate");
    return out.str();
}

} // namespace plcnn
