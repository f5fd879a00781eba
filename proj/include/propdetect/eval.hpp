#pragma once

// Binary sentence scores and strict-boundary fragment scores.

#include <map>
#include <string>
#include <vector>

#include "propdetect/corpus.hpp"

namespace propdetect {

struct BinaryScore {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    static BinaryScore from_counts(long long tp, long long fp, long long fn);
};

struct SpanScoreReport {
    std::map<std::string, BinaryScore> per_technique;
    double macro_f1 = 0.0;
    BinaryScore micro;
};

/// Propaganda is the positive class. Every gold key needs a prediction;
/// predictions for sentences outside the gold set are ignored.
BinaryScore slc_scores(const SlcLabels& predicted, const SlcLabels& gold);

/// Exact (article, start, end, technique) matching, one-to-one, greedy in
/// input order. Macro F1 averages over techniques seen in gold or predictions.
SpanScoreReport flc_strict_scores(const std::vector<Fragment>& predicted, const std::vector<Fragment>& gold);

struct FoldReport {
    std::vector<BinaryScore> folds;
    BinaryScore pooled;
};

/// Per-fold scores plus the score of the summed counts.
FoldReport score_folds(const std::vector<BinaryScore>& per_fold);

struct SpanFoldReport {
    std::vector<SpanScoreReport> folds;
    SpanScoreReport pooled;  // per-technique counts summed across folds
};

SpanFoldReport score_span_folds(const std::vector<SpanScoreReport>& per_fold);

// `metric<TAB>technique<TAB>value` rows; "-" stands for no technique.
std::string format_binary_tsv(const BinaryScore& score, const std::string& prefix = {});
std::string format_span_tsv(const SpanScoreReport& report, const std::string& prefix = {});
std::string format_binary_table(const BinaryScore& score, const std::string& title);
std::string format_span_table(const SpanScoreReport& report, const std::string& title);

}  // namespace propdetect
