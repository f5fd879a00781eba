#pragma once

// End-to-end orchestration behind the command line tool: configuration,
// external prediction ingestion, fold experiments for both tasks.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "propdetect/corpus.hpp"
#include "propdetect/crf.hpp"
#include "propdetect/ensemble.hpp"
#include "propdetect/eval.hpp"
#include "propdetect/features.hpp"
#include "propdetect/logreg.hpp"
#include "propdetect/topics.hpp"

namespace propdetect {

struct PipelineConfig {
    std::filesystem::path corpus;
    std::filesystem::path slc_labels;
    std::filesystem::path flc_labels;
    std::filesystem::path dev_corpus;  // "dev (external)" evaluation set
    std::filesystem::path dev_slc_labels;
    std::filesystem::path dev_flc_labels;
    std::filesystem::path sentiment_lexicon;
    std::filesystem::path emotion_lexicon;
    std::filesystem::path loaded_lexicon;
    std::filesystem::path sense_lexicon;
    std::filesystem::path embeddings;
    std::filesystem::path annotations;
    std::filesystem::path dev_annotations;
    std::filesystem::path manifest;      // SLC prediction columns
    std::filesystem::path flc_manifest;  // FLC fragment sources
    std::filesystem::path output_dir = "propdetect-out";

    bool fallback_tagger = true;
    FeatureToggles features{false, true, true, true};
    std::vector<std::string> slc_models = {"linguistic,layout,topical"};  // one logreg per feature set
    std::vector<std::string> flc_configs = {"all", "word,shape,punct,loaded"};

    std::vector<double> tau_grid = kDefaultTauGrid;
    VoteMode ensemble_mode = VoteMode::relax;
    double relax_fraction = 0.3;
    bool postprocess = false;
    int window = 10;
    double lambda = 0.99;

    int slc_folds = 5;
    int flc_folds = 3;
    std::uint64_t seed = 42;

    double l2 = 1e-3;
    int epochs = 300;
    double learning_rate = 1.0;
    double crf_l2 = 0.1;
    int crf_epochs = 100;
    double crf_learning_rate = 0.5;

    int lda_topics = 10;
    int lda_iterations = 500;
    int lda_inference_passes = 50;
};

/// Sets one `key=value` entry. Throws UsageError on an unknown key or bad value.
/// Relative paths are resolved against `base_dir` when it is non-empty.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value,
                   const std::filesystem::path& base_dir = {});

/// Flat `key=value` file; `#` starts a comment line.
void load_config_file(PipelineConfig& config, const std::filesystem::path& path);

/// Canonical record of every setting, one `key=value` per line, sorted.
std::string format_config(const PipelineConfig& config);

/// Checks folds, ranges and that every referenced path exists.
void validate_config(const PipelineConfig& config);

struct ManifestEntry {
    std::string model_id;
    int fold = 0;  // 1-based, 0 when not tied to a fold
    std::filesystem::path path;
    double dev_f1 = 0.0;
    std::optional<double> tau;

    std::string column_id() const;
};

/// Lines are `key=value` parameters (mode, relax_fraction, tau) or
/// `model<TAB>model_id<TAB>fold|-<TAB>path<TAB>dev_f1[<TAB>tau]`.
struct Manifest {
    std::optional<VoteMode> mode;
    std::optional<double> relax_fraction;
    double tau = 0.5;
    std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::filesystem::path& path);

struct PredictionStore {
    std::vector<PredictionColumn> columns;
    std::map<std::string, double> dev_f1;  // by column id
};

/// Reads every SLC prediction file in the manifest. Checks probability
/// bounds, duplicate rows, model ids, and that every column covers every
/// target (all keys seen across files when `targets` is null).
PredictionStore ingest_predictions(const Manifest& manifest, const std::vector<SentenceKey>* targets = nullptr);

struct FragmentSource {
    std::string column_id;
    std::vector<Fragment> fragments;
};

/// Reads FLC prediction files (gold format plus a model_id column).
std::vector<FragmentSource> ingest_fragment_predictions(const Manifest& manifest);

/// Loaded corpus with annotations (and fallback tags when enabled).
DocumentSet load_corpus(const std::filesystem::path& dir, const std::filesystem::path& annotations,
                        bool fallback_tagger);

std::vector<SentenceKey> retained_keys(const DocumentSet& documents);

struct Resources {
    Lexicons lexicons;
    std::optional<EmbeddingTable> embeddings;
    std::optional<LdaModel> lda;
};

/// Lexicons and embeddings from the config; LDA is fitted on `corpus` when
/// topical features are on.
Resources load_resources(const PipelineConfig& config, const DocumentSet& corpus, const FeatureToggles& toggles);

using SentenceFeatures = std::map<SentenceKey, FeatureVector>;

SentenceFeatures featurize(const DocumentSet& documents, const Resources& resources, const FeatureToggles& toggles,
                           std::vector<std::string>* warnings = nullptr);

std::string format_feature_table(const SentenceFeatures& features);

struct SlcFoldResult {
    int fold = 0;  // 1-based
    std::vector<double> taus;  // chosen per native model
    std::vector<BinaryScore> internal;  // per native model, at the chosen tau
};

struct SlcRunResult {
    FoldPlan plan;
    std::vector<SlcFoldResult> folds;
    std::vector<BinaryScore> pooled_internal;  // per native model
    PredictionMatrix matrix;
    SlcLabels labels;
    std::optional<BinaryScore> external;
};

/// Fold experiment for sentence classification; writes its artifacts under
/// config.output_dir.
SlcRunResult run_slc(const PipelineConfig& config);

struct FlcRunResult {
    FoldPlan plan;
    std::vector<std::string> source_ids;  // sources fed into the merge
    std::vector<SpanScoreReport> internal_per_config;  // pooled held-out scores
    SpanScoreReport internal_merged;  // configs merged within each fold
    std::vector<Fragment> merged;
    std::optional<SpanScoreReport> external;
};

FlcRunResult run_flc(const PipelineConfig& config);

/// Training and prediction on a whole corpus, for the single-stage commands.
LogRegModel train_slc_model(const PipelineConfig& config, const DocumentSet& corpus, const SlcLabels& labels,
                            const Resources& resources, const FeatureToggles& toggles);
CrfModel train_flc_model(const PipelineConfig& config, const DocumentSet& corpus, unsigned families,
                         std::uint64_t seed);
std::vector<Fragment> predict_fragments(const CrfModel& model, const DocumentSet& documents, const Lexicons& lex);

}  // namespace propdetect
