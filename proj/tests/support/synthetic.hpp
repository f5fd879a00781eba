#pragma once

// Synthetic corpora and scratch directories for the tests.
//
// Propaganda sentences carry a planted loaded word (technique
// Loaded_Language, one token) and sometimes an all-caps slogan run
// (technique Slogans). Nothing else in the corpus is upper case or loaded.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "propdetect/corpus.hpp"

namespace testsupport {

namespace fs = std::filesystem;

/// Directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

struct SyntheticOptions {
    int articles = 20;
    int sentences = 15;  // lines per article, title included
    std::uint64_t seed = 7;
    int first_id = 1000;
    double propaganda_rate = 0.4;
    double slogan_rate = 0.6;  // among propaganda sentences
    bool plant_duplicates = false;
    bool plant_filtered_lines = true;  // an empty or one-token line now and then
};

struct SyntheticCorpus {
    std::map<std::string, std::string> articles;  // id -> raw text
    propdetect::SlcLabels slc;                     // retained sentences only
    std::vector<propdetect::Fragment> fragments;

    propdetect::DocumentSet documents() const;
};

SyntheticCorpus make_synthetic(const SyntheticOptions& options);

/// Writes <dir>/article<ID>.txt files.
void write_articles(const SyntheticCorpus& corpus, const fs::path& dir);
void write_slc_labels(const SyntheticCorpus& corpus, const fs::path& path);
void write_flc_labels(const SyntheticCorpus& corpus, const fs::path& path);

struct LexiconPaths {
    fs::path sentiment;
    fs::path emotion;
    fs::path loaded;
    fs::path senses;
    fs::path embeddings;
};

/// Lexicons matching the synthetic vocabulary, plus seeded random embeddings.
LexiconPaths write_lexicons(const fs::path& dir, std::uint64_t seed = 11);

const std::vector<std::string>& neutral_words();
const std::vector<std::string>& loaded_words();

/// Noisy probabilities for every retained sentence: propaganda sentences
/// draw from [hi_lo, hi_hi], the rest from [lo_lo, lo_hi].
void write_external_predictions(const SyntheticCorpus& corpus, const fs::path& path, const std::string& model_id,
                                std::uint64_t seed, double lo_lo = 0.05, double lo_hi = 0.45, double hi_lo = 0.4,
                                double hi_hi = 0.95);

/// Everything run-slc / run-flc needs, laid out under `dir`; returns the
/// config file path. External SLC columns are listed in a manifest when
/// `external_models` > 0 (one file per model and fold).
fs::path write_experiment(const fs::path& dir, const SyntheticOptions& options, int slc_folds, int flc_folds,
                          int external_models);

}  // namespace testsupport
