#pragma once

// LDA by collapsed Gibbs sampling and the dominant-topic sentence features.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "propdetect/corpus.hpp"
#include "propdetect/features.hpp"

namespace propdetect {

struct LdaOptions {
    int topics = 10;
    double alpha = -1.0;  // <= 0 selects 50 / topics
    double beta = 0.01;
    int iterations = 500;
    int inference_passes = 50;
    std::uint64_t seed = 1;
    int min_token_length = 3;
    int min_count = 2;
    bool use_stopwords = true;
    // Called after every training sweep with the topic-word counts.
    std::function<void(int, const Eigen::MatrixXi&)> on_sweep;
};

struct LdaModel {
    int topics = 0;
    std::vector<std::string> vocabulary;
    std::unordered_map<std::string, int> word_ids;
    Eigen::MatrixXi topic_word_counts;  // topics x vocabulary
    Eigen::VectorXi topic_totals;
    double alpha = 0.0;
    double beta = 0.0;
    std::uint64_t seed = 0;
    int inference_passes = 50;
    int min_token_length = 3;
    bool use_stopwords = true;

    int vocabulary_size() const { return static_cast<int>(vocabulary.size()); }
    /// Smoothed topic-word distributions; each row sums to one.
    Eigen::MatrixXd topic_word_distribution() const;
};

using TopicProportions = Eigen::VectorXd;

bool is_stopword(std::string_view lowercased);

/// Lowercases and drops short tokens and stopwords (no vocabulary check).
std::vector<std::string> lda_preprocess(const std::vector<std::string>& tokens, int min_token_length,
                                        bool use_stopwords);

/// Trains on token lists. Tokens below `min_count` corpus-wide are dropped
/// after preprocessing. Throws DataError when nothing is left.
LdaModel fit_lda(const std::vector<std::vector<std::string>>& documents, const LdaOptions& options);

/// One pseudo-document per article built from its retained sentences.
LdaModel fit_lda(const DocumentSet& documents, const LdaOptions& options);

std::vector<std::string> sentence_words(const Sentence& sentence);
std::vector<std::string> document_words(const Document& document);

/// Gibbs passes against frozen model counts. All-OOV input gives the uniform
/// distribution.
TopicProportions infer_doc_topics(const LdaModel& model, const std::vector<std::string>& tokens);

/// Argmax with ties going to the lowest index.
int dominant_topic(const TopicProportions& proportions);

struct DocumentTopics {
    int document_topic = 0;
    std::map<int, int> sentence_topics;  // retained sentence index -> dominant topic
};

DocumentTopics compute_document_topics(const Document& document, const LdaModel& model);

/// dt_sent_eq_doc, dt_sent_eq_next, dt_sent_eq_prev. Missing neighbours give 0.
FeatureVector topical_features(const Sentence& sentence, const DocumentTopics& topics);
FeatureVector topical_features(const Sentence& sentence, const Document& document, const LdaModel& model);

std::string save_lda(const LdaModel& model);
LdaModel load_lda(std::string_view content);

}  // namespace propdetect
