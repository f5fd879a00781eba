#pragma once

// Hard-label voting over sentence predictions, fragment span merging and the
// repetition postprocess.

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "propdetect/corpus.hpp"
#include "propdetect/features.hpp"
#include "propdetect/logreg.hpp"

namespace propdetect {

enum class VoteMode { majority, relax };

VoteMode parse_vote_mode(std::string_view s);
std::string to_string(VoteMode mode);

inline const std::vector<double> kDefaultRelaxGrid = {0.2, 0.3, 0.4};

struct EnsembleConfig {
    VoteMode mode = VoteMode::relax;
    double relax_fraction = 0.3;
    std::map<std::string, double> model_dev_f1;  // used only to break majority ties
};

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct PredictionMatrix {
    std::vector<SentenceKey> rows;
    std::vector<std::string> columns;
    BoolMatrix cells;  // rows x columns

    std::vector<bool> row(std::size_t i) const;
};

/// Strict majority; on an exact tie the vote of the model with the highest dev
/// F1 (then lowest model id) decides. Throws UsageError if a tie needs a
/// missing F1.
bool majority_vote(const std::vector<std::string>& model_ids, const std::vector<bool>& votes,
                   const EnsembleConfig& config);

/// Propaganda iff the share of propaganda votes is at least relax_fraction.
bool relax_vote(const std::vector<bool>& votes, const EnsembleConfig& config);

bool vote(const std::vector<std::string>& model_ids, const std::vector<bool>& votes, const EnsembleConfig& config);

/// One ensemble column: a model's probabilities thresholded at tau.
struct PredictionColumn {
    std::string column_id;
    std::string model_id;
    int fold = 0;  // 1-based; 0 when not tied to a fold
    double tau = 0.5;
    std::vector<SentencePrediction> predictions;
};

/// Rectangular matrix over `targets` (or the union of all keys when empty).
/// A column that misses any row is a DataError naming the column and row.
PredictionMatrix build_prediction_matrix(const std::vector<PredictionColumn>& columns,
                                         std::vector<SentenceKey> targets = {});

SlcLabels vote_matrix(const PredictionMatrix& matrix, const EnsembleConfig& config);

struct EnsembleResult {
    PredictionMatrix matrix;
    SlcLabels labels;
};

/// Pools the same model roster from every fold into |folds| x |models|
/// columns and votes per row. Dev F1 entries may be keyed by column id or by
/// model id.
EnsembleResult ensemble_plus(const std::vector<std::vector<PredictionColumn>>& per_fold,
                             const EnsembleConfig& config, std::vector<SentenceKey> targets = {});

/// Merges per-model fragment lists (earlier lists have higher priority):
/// identical spans collapse to their plurality label; overlapping spans with
/// the same label reduce to the largest (earliest on ties); overlaps with
/// different labels are kept.
std::vector<Fragment> merge_fragments(const std::vector<std::vector<Fragment>>& fragment_sets);

/// Labels flip to propaganda when the cosine to any of the `window` preceding
/// embeddings exceeds `lambda`. Embeddings and labels are aligned with the
/// retained sentences of one document.
std::vector<bool> repetition_postprocess(const std::vector<Eigen::VectorXd>& embeddings,
                                         const std::vector<bool>& labels, int window, double lambda);

/// Document-level form; sentences missing from `labels` are left out.
SlcLabels repetition_postprocess(const Document& document, const EmbeddingTable& table,
                                 const SlcLabels& labels, int window, double lambda);

}  // namespace propdetect
