#pragma once

// Feature-based linear-chain CRF over BIO tags: scoring, exact Viterbi
// decoding, log-domain forward-backward and full-batch likelihood training.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "propdetect/corpus.hpp"
#include "propdetect/features.hpp"

namespace propdetect {

/// Feature names per token.
using TokenFeatures = std::vector<std::vector<std::string>>;

/// Added to the score of O -> I-t and B-s/I-s -> I-t (s != t) transitions and
/// to a sequence starting with I-t. It is a constant, not a parameter.
inline constexpr double kInvalidTransitionPenalty = -1.0e4;

struct CrfModel {
    std::vector<std::string> tags;  // tags[0] is "O" for BIO tag sets
    std::vector<std::string> features;
    std::unordered_map<std::string, int> feature_ids;
    Eigen::MatrixXd emission;    // features x tags
    Eigen::MatrixXd transition;  // from-tag x to-tag
    Eigen::VectorXd start;       // score of the first tag
    double l2 = 0.0;
    bool bio_constraints = true;

    int tag_count() const { return static_cast<int>(tags.size()); }
    int tag_index(std::string_view tag) const;  // throws DataError if unknown
    Eigen::MatrixXd transition_penalty() const;
    Eigen::VectorXd start_penalty() const;

    /// Parameters laid out as [emission (column-major), transition, start].
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& theta);
    Eigen::Index parameter_count() const;
};

/// Tag set {O} followed by B-t, I-t for each technique in order.
std::vector<std::string> bio_tag_set(const std::vector<std::string>& techniques);

/// Zero-weight model over the given tags and feature vocabulary.
CrfModel make_crf(std::vector<std::string> tags, std::vector<std::string> features, bool bio_constraints = true);

/// Feature ids per token; unknown names are dropped.
using EncodedFeatures = std::vector<std::vector<int>>;
EncodedFeatures encode_features(const CrfModel& model, const TokenFeatures& features);

/// Emission scores, tokens x tags.
Eigen::MatrixXd emission_scores(const CrfModel& model, const EncodedFeatures& features);

double crf_score(const CrfModel& model, const TokenFeatures& features, const std::vector<std::string>& tags);
double crf_score_ids(const CrfModel& model, const EncodedFeatures& features, const std::vector<int>& tags);

std::vector<int> viterbi_ids(const CrfModel& model, const EncodedFeatures& features);
std::vector<std::string> viterbi(const CrfModel& model, const TokenFeatures& features);

double log_partition(const CrfModel& model, const EncodedFeatures& features);

struct CrfExample {
    EncodedFeatures features;
    std::vector<int> tags;
};

/// Sum of gold log-likelihoods minus (l2/2)|theta|^2, with its gradient in
/// the flatten() layout.
struct CrfObjective {
    double value = 0.0;
    Eigen::VectorXd gradient;
};

CrfObjective crf_objective(const CrfModel& model, const std::vector<CrfExample>& data, double l2);

struct CrfOptions {
    double l2 = 0.1;
    int epochs = 100;
    double learning_rate = 0.5;  // divided by the number of sequences
    std::uint64_t seed = 1;
    std::vector<double>* objective_history = nullptr;
};

/// Tag set is O plus B/I for every technique seen in `gold_tags`, sorted.
/// Throws DataError on a malformed tag or length mismatch.
CrfModel train_crf(const std::vector<TokenFeatures>& sequences,
                   const std::vector<std::vector<std::string>>& gold_tags, const CrfOptions& options);

/// Same, with an explicit tag set; gold tags outside it are a DataError.
CrfModel train_crf(const std::vector<TokenFeatures>& sequences,
                   const std::vector<std::vector<std::string>>& gold_tags, std::vector<std::string> tag_set,
                   const CrfOptions& options);

enum TokenFeatureFamily : unsigned {
    kFeatWord = 1u << 0,
    kFeatPos = 1u << 1,
    kFeatNer = 1u << 2,
    kFeatPolarity = 1u << 3,
    kFeatShape = 1u << 4,
    kFeatPunct = 1u << 5,
    kFeatLoaded = 1u << 6,
    kFeatAll = 0x7Fu,
};

unsigned parse_token_families(std::string_view spec);  // "word,pos,ner,polarity,shape,punct,loaded" or "all"
std::string format_token_families(unsigned families);

std::string shape_of(std::string_view token);

/// Features of token `i`: bias, lowercased identity, POS, NER, polarity
/// bucket, capitalization shape, punctuation flag and loaded-phrase membership.
std::vector<std::string> token_features(const Sentence& sentence, std::size_t i, const Lexicons& lex,
                                        const std::vector<bool>& loaded_mask, unsigned families = kFeatAll);
TokenFeatures sentence_token_features(const Sentence& sentence, const Lexicons& lex, unsigned families = kFeatAll);

std::string save_crf(const CrfModel& model);
CrfModel load_crf(std::string_view content);

}  // namespace propdetect
