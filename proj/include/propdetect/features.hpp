#pragma once

// Sentence feature extractors and the resources they read.

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "propdetect/corpus.hpp"

namespace propdetect {

struct DocumentTopics;  // topics.hpp

/// Named, ordered feature values. Vectors with equal schema_id share names.
struct FeatureVector {
    std::string schema_id;
    std::vector<std::string> names;
    Eigen::VectorXd values;

    Eigen::Index size() const { return values.size(); }
    double operator[](std::string_view name) const;  // throws if absent
    bool has(std::string_view name) const;
    void append(const FeatureVector& other);
    void push(std::string name, double value);
};

inline constexpr std::array<const char*, 5> kEmotions = {"sadness", "joy", "fear", "disgust", "anger"};

inline constexpr std::array<const char*, 10> kSelectedNer = {
    "PERSON", "NORP", "FAC", "ORG", "GPE", "LOC", "EVENT", "WORK_OF_ART", "LAW", "LANGUAGE"};

inline constexpr std::array<const char*, 12> kCoarsePos = {
    "NOUN", "PROPN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ", "PUNCT", "OTHER"};

/// Maps universal or Penn Treebank tags onto kCoarsePos.
std::string coarse_pos(std::string_view tag);

struct Lexicons {
    std::unordered_map<std::string, double> sentiment;
    std::unordered_map<std::string, std::set<std::string>> emotion;
    std::vector<std::vector<std::string>> loaded;  // lowercased phrases, tokenized
    std::map<std::pair<std::string, std::string>, long long> senses;  // (lemma, coarse POS)

    void add_loaded_phrase(std::string_view phrase);
};

Lexicons load_lexicons(const std::filesystem::path& sentiment, const std::filesystem::path& emotion,
                       const std::filesystem::path& loaded, const std::filesystem::path& senses);
// Each loader skips an empty path.
void load_sentiment_lexicon(const std::filesystem::path& path, Lexicons& lex);
void load_emotion_lexicon(const std::filesystem::path& path, Lexicons& lex);
void load_loaded_lexicon(const std::filesystem::path& path, Lexicons& lex);
void load_sense_lexicon(const std::filesystem::path& path, Lexicons& lex);

struct EmbeddingTable {
    int dimension = 0;
    std::unordered_map<std::string, Eigen::VectorXd> vectors;

    const Eigen::VectorXd* find(std::string_view token) const;
};

EmbeddingTable load_word_vectors(const std::filesystem::path& path);
EmbeddingTable parse_word_vectors(std::string_view content, std::string_view source = "<memory>");

/// Applies `article_id, sentence_index, token_index, token, POS, NER` rows to
/// the matching tokens. A token text mismatch is a DataError.
void load_annotations(const std::filesystem::path& path, DocumentSet& documents);

/// Naive hermetic tagger for tokens that lack POS/NER annotations.
void apply_fallback_tags(Document& document);

// Extractors. Counts are stored as reals; ratios are over the token count.
FeatureVector char_features(const Sentence& sentence);
FeatureVector readability_features(const Sentence& sentence);
FeatureVector sentiment_features(const Sentence& sentence, const Lexicons& lex);
FeatureVector emotion_features(const Sentence& sentence, const Lexicons& lex);
FeatureVector loaded_word_features(const Sentence& sentence, const Lexicons& lex);
FeatureVector multi_meaning_features(const Sentence& sentence, const Lexicons& lex);
/// Pushes a warning when no token in the sentence carries POS or NER.
FeatureVector pos_ner_features(const Sentence& sentence, std::vector<std::string>* warnings = nullptr);
FeatureVector layout_features(const Sentence& sentence, const Document& document);

int count_syllables(std::string_view word);

/// Per-token flags: true where the token is part of a loaded phrase occurrence.
std::vector<bool> loaded_phrase_mask(const Sentence& sentence, const Lexicons& lex);

Eigen::VectorXd sentence_embedding(const Sentence& sentence, const EmbeddingTable& table);
double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

struct FeatureToggles {
    bool embedding = true;
    bool linguistic = true;
    bool layout = true;
    bool topical = true;
};

std::string schema_id(const FeatureToggles& toggles, int embedding_dim);
FeatureToggles parse_toggles(std::string_view spec);  // "embedding,linguistic,layout,topical"
std::string format_toggles(const FeatureToggles& toggles);

/// Concatenates the enabled blocks in the order embedding, linguistic, layout,
/// topical. `table` and `topics` may be null when their blocks are off.
FeatureVector assemble_features(const Sentence& sentence, const Document& document, const Lexicons& lex,
                                const EmbeddingTable* table, const DocumentTopics* topics,
                                const FeatureToggles& toggles, std::vector<std::string>* warnings = nullptr);

/// Throws DataError unless `v` carries the expected schema.
void check_schema(const FeatureVector& v, std::string_view expected);

}  // namespace propdetect
