#pragma once

// Articles, sentences and tokens with character offsets; gold label files;
// BIO conversion; article-level folds.
//
// All offsets count Unicode scalar values, never bytes. Spans are half-open.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace propdetect {

struct Span {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive

    std::size_t length() const { return end - start; }
    bool intersects(const Span& o) const { return start < o.end && o.start < end; }
    auto operator<=>(const Span&) const = default;
};

struct Token {
    std::string text;  // UTF-8
    Span span;         // document-absolute
    std::optional<std::string> pos;
    std::optional<std::string> ner;  // empty string means "no entity"
};

struct Sentence {
    int index = 0;  // 1-based line number, never renumbered
    Span span;      // line content without the newline
    std::vector<Token> tokens;
    bool retained = false;
};

struct Fragment {
    std::string article_id;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string technique;

    Span span() const { return {start, end}; }
    auto operator<=>(const Fragment&) const = default;
};

struct Document {
    std::string article_id;
    std::u32string text;
    std::vector<Sentence> sentences;
    std::vector<Fragment> gold;  // attached by load_flc_labels

    std::size_t length() const { return text.size(); }
    std::string slice(Span span) const;
    const Sentence* sentence(int index) const;
    std::vector<const Sentence*> retained_sentences() const;
};

struct SentenceKey {
    std::string article_id;
    int index = 0;
    auto operator<=>(const SentenceKey&) const = default;
};

using SlcLabels = std::map<SentenceKey, bool>;

/// Documents ordered by article id.
class DocumentSet {
public:
    DocumentSet() = default;
    explicit DocumentSet(std::vector<Document> docs);

    void add(Document doc);  // throws DataError on duplicate id
    const Document* find(std::string_view article_id) const;
    Document* find(std::string_view article_id);

    const std::vector<Document>& documents() const { return docs_; }
    std::vector<Document>& documents() { return docs_; }
    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    auto begin() const { return docs_.begin(); }
    auto end() const { return docs_.end(); }

    /// Subset with the given ids, in id order.
    DocumentSet subset(const std::set<std::string>& ids) const;

private:
    std::vector<Document> docs_;
};

struct TagSequence {
    std::string article_id;
    int sentence_index = 0;
    std::vector<std::string> tags;
};

struct FoldPlan {
    int k = 0;
    std::map<std::string, int> assignments;

    std::set<std::string> test_ids(int fold) const;
    std::set<std::string> train_ids(int fold) const;
};

/// Offset-preserving tokenizer: whitespace split, then leading and trailing
/// punctuation peeled off one character at a time. A trailing period stays on
/// abbreviations with an internal period followed by a letter ("U.S.").
/// Offsets are relative to `text` plus `base_offset`.
std::vector<Token> tokenize(std::u32string_view text, std::size_t base_offset = 0);
std::vector<Token> tokenize(std::string_view utf8_text);

bool is_punctuation(char32_t c);
bool is_punctuation_token(std::string_view utf8_text);

/// Builds a document from raw UTF-8 text: one sentence per LF-terminated line,
/// tokenized, sentences with at most one token marked not retained.
Document make_document(std::string article_id, std::string_view utf8_text);

/// Reads every `article<ID>.txt` in `directory`. Other files are ignored.
DocumentSet load_articles(const std::filesystem::path& directory);

/// Parses an FLC TSV (`article_id, technique, start, end`, plus an optional
/// fifth `model_id` column). Checks only the row format.
std::vector<Fragment> read_fragment_file(const std::filesystem::path& path,
                                         std::vector<std::string>* model_ids = nullptr);

/// Parses and validates gold fragments against `documents`, attaching them.
std::vector<Fragment> load_flc_labels(const std::filesystem::path& path, DocumentSet& documents);

/// Checks fragment bounds against the documents; `where` prefixes errors.
void validate_fragments(const std::vector<Fragment>& fragments, const DocumentSet& documents,
                        std::string_view where);

std::set<std::string> technique_vocabulary(const std::vector<Fragment>& fragments);

/// Parses an SLC TSV (`article_id, sentence_index, label`).
SlcLabels read_slc_label_file(const std::filesystem::path& path);
SlcLabels load_slc_labels(const std::filesystem::path& path, const DocumentSet& documents);

std::string format_fragments(const std::vector<Fragment>& fragments,
                             std::string_view model_id = {});
std::string format_slc_labels(const SlcLabels& labels);

/// Reduces overlapping fragments to one non-overlapping layer: earliest start
/// wins, ties go to the longer span. Input order does not matter.
std::vector<Fragment> project_single_layer(std::vector<Fragment> fragments);

/// BIO tags for one sentence. Fragments are snapped outward to token
/// boundaries and reduced with project_single_layer.
TagSequence encode_bio(const Sentence& sentence, std::string_view article_id,
                       const std::vector<Fragment>& fragments);

/// Converts tags back to fragments. An I-t without a B-t or I-t predecessor
/// opens a new fragment. Throws DataError on an unknown tag.
std::vector<Fragment> decode_bio(const TagSequence& tags, const Sentence& sentence);

FoldPlan make_folds(const DocumentSet& documents, int k, std::uint64_t seed);
FoldPlan make_folds(std::vector<std::string> article_ids, int k, std::uint64_t seed);

std::string format_fold_plan(const FoldPlan& plan);

}  // namespace propdetect
