#include "propdetect/eval.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <tuple>

#include "propdetect/error.hpp"
#include "propdetect/textio.hpp"

namespace propdetect {

BinaryScore BinaryScore::from_counts(long long tp, long long fp, long long fn) {
    BinaryScore s;
    s.tp = tp;
    s.fp = fp;
    s.fn = fn;
    s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

BinaryScore slc_scores(const SlcLabels& predicted, const SlcLabels& gold) {
    long long tp = 0, fp = 0, fn = 0;
    for (const auto& [key, truth] : gold) {
        auto it = predicted.find(key);
        if (it == predicted.end()) {
            throw DataError("missing prediction for sentence " + key.article_id + ":" + std::to_string(key.index));
        }
        tp += it->second && truth;
        fp += it->second && !truth;
        fn += !it->second && truth;
    }
    return BinaryScore::from_counts(tp, fp, fn);
}

SpanScoreReport flc_strict_scores(const std::vector<Fragment>& predicted, const std::vector<Fragment>& gold) {
    using Key = std::tuple<std::string, std::size_t, std::size_t, std::string>;
    std::map<Key, long long> unmatched_gold;
    std::set<std::string> techniques;
    std::map<std::string, std::array<long long, 3>> counts;  // tp, fp, fn
    for (const auto& g : gold) {
        ++unmatched_gold[{g.article_id, g.start, g.end, g.technique}];
        techniques.insert(g.technique);
    }
    for (const auto& p : predicted) {
        techniques.insert(p.technique);
        auto it = unmatched_gold.find({p.article_id, p.start, p.end, p.technique});
        if (it != unmatched_gold.end() && it->second > 0) {
            --it->second;
            ++counts[p.technique][0];
        } else {
            ++counts[p.technique][1];
        }
    }
    for (const auto& [key, remaining] : unmatched_gold) {
        counts[std::get<3>(key)][2] += remaining;
    }
    SpanScoreReport report;
    long long tp = 0, fp = 0, fn = 0;
    double f1_sum = 0.0;
    for (const auto& t : techniques) {
        const auto& c = counts[t];
        report.per_technique[t] = BinaryScore::from_counts(c[0], c[1], c[2]);
        f1_sum += report.per_technique[t].f1;
        tp += c[0];
        fp += c[1];
        fn += c[2];
    }
    report.macro_f1 = techniques.empty() ? 0.0 : f1_sum / static_cast<double>(techniques.size());
    report.micro = BinaryScore::from_counts(tp, fp, fn);
    return report;
}

FoldReport score_folds(const std::vector<BinaryScore>& per_fold) {
    if (per_fold.empty()) {
        throw UsageError("score_folds: no folds");
    }
    FoldReport r;
    r.folds = per_fold;
    long long tp = 0, fp = 0, fn = 0;
    for (const auto& s : per_fold) {
        tp += s.tp;
        fp += s.fp;
        fn += s.fn;
    }
    r.pooled = BinaryScore::from_counts(tp, fp, fn);
    return r;
}

SpanFoldReport score_span_folds(const std::vector<SpanScoreReport>& per_fold) {
    if (per_fold.empty()) {
        throw UsageError("score_span_folds: no folds");
    }
    SpanFoldReport r;
    r.folds = per_fold;
    std::map<std::string, std::array<long long, 3>> counts;
    for (const auto& fold : per_fold) {
        for (const auto& [t, s] : fold.per_technique) {
            counts[t][0] += s.tp;
            counts[t][1] += s.fp;
            counts[t][2] += s.fn;
        }
    }
    long long tp = 0, fp = 0, fn = 0;
    double f1_sum = 0.0;
    for (const auto& [t, c] : counts) {
        r.pooled.per_technique[t] = BinaryScore::from_counts(c[0], c[1], c[2]);
        f1_sum += r.pooled.per_technique[t].f1;
        tp += c[0];
        fp += c[1];
        fn += c[2];
    }
    r.pooled.macro_f1 = counts.empty() ? 0.0 : f1_sum / static_cast<double>(counts.size());
    r.pooled.micro = BinaryScore::from_counts(tp, fp, fn);
    return r;
}

std::string format_binary_tsv(const BinaryScore& s, const std::string& prefix) {
    std::string out;
    auto row = [&](const std::string& metric, const std::string& value) {
        out += prefix + metric + "\t-\t" + value + '\n';
    };
    row("tp", std::to_string(s.tp));
    row("fp", std::to_string(s.fp));
    row("fn", std::to_string(s.fn));
    row("precision", format_double(s.precision));
    row("recall", format_double(s.recall));
    row("f1", format_double(s.f1));
    return out;
}

std::string format_span_tsv(const SpanScoreReport& report, const std::string& prefix) {
    std::string out;
    for (const auto& [t, s] : report.per_technique) {
        out += prefix + "strict_precision\t" + t + '\t' + format_double(s.precision) + '\n';
        out += prefix + "strict_recall\t" + t + '\t' + format_double(s.recall) + '\n';
        out += prefix + "strict_f1\t" + t + '\t' + format_double(s.f1) + '\n';
    }
    out += prefix + "strict_macro_f1\t-\t" + format_double(report.macro_f1) + '\n';
    out += format_binary_tsv(report.micro, prefix + "strict_micro_");
    return out;
}

namespace {

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string format_binary_table(const BinaryScore& s, const std::string& title) {
    return title + "\n  precision " + fixed(s.precision) + "  recall " + fixed(s.recall) + "  F1 " + fixed(s.f1) +
           "  (tp=" + std::to_string(s.tp) + " fp=" + std::to_string(s.fp) + " fn=" + std::to_string(s.fn) + ")\n";
}

std::string format_span_table(const SpanScoreReport& report, const std::string& title) {
    std::size_t width = 12;
    for (const auto& [t, s] : report.per_technique) {
        width = std::max(width, t.size() + 2);
    }
    std::string out = title + " (strict boundary matching)\n";
    out += "  " + pad("technique", width) + "precision  recall     F1\n";
    for (const auto& [t, s] : report.per_technique) {
        out += "  " + pad(t, width) + pad(fixed(s.precision), 11) + pad(fixed(s.recall), 11) + fixed(s.f1) + '\n';
    }
    out += "  macro F1 " + fixed(report.macro_f1) + "  micro F1 " + fixed(report.micro.f1) + '\n';
    return out;
}

}  // namespace propdetect
