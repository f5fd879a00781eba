#include "propdetect/corpus.hpp"

#include <algorithm>
#include <regex>

#include "propdetect/error.hpp"
#include "propdetect/random.hpp"
#include "propdetect/textio.hpp"

namespace propdetect {

namespace {

bool is_space(char32_t c) {
    switch (c) {
        case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
        case 0x00A0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
        case 0x205F: case 0x3000: case 0xFEFF:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

bool is_ascii_letter(char32_t c) {
    return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z');
}

bool is_letter(char32_t c) {
    // Anything that is not ASCII, space or punctuation counts as word material.
    return is_ascii_letter(c) || (c >= 0x80 && !is_punctuation(c) && !is_space(c));
}

Token make_token(std::u32string_view text, std::size_t begin, std::size_t end,
                 std::size_t base) {
    Token t;
    t.text = utf8_encode(text.substr(begin, end - begin));
    t.span = {base + begin, base + end};
    return t;
}

// Keeps a trailing '.' when an earlier '.' is followed by a letter.
bool is_abbreviation(std::u32string_view core) {
    if (core.size() < 3 || core.back() != U'.') {
        return false;
    }
    for (std::size_t i = 0; i + 1 < core.size() - 1; ++i) {
        if (core[i] == U'.' && is_letter(core[i + 1])) {
            return true;
        }
    }
    return false;
}

[[noreturn]] void row_error(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

bool is_punctuation(char32_t c) {
    if (c < 0x80) {
        return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
               (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
    }
    return c == 0x00A1 || c == 0x00AB || c == 0x00BB || c == 0x00BF ||
           (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
           (c >= 0x3001 && c <= 0x3003);
}

bool is_punctuation_token(std::string_view utf8_text) {
    if (utf8_text.empty()) {
        return false;
    }
    const auto cps = utf8_decode(utf8_text);
    return std::all_of(cps.begin(), cps.end(), is_punctuation);
}

std::string Document::slice(Span span) const {
    return utf8_encode(std::u32string_view(text).substr(span.start, span.length()));
}

const Sentence* Document::sentence(int index) const {
    if (index < 1 || static_cast<std::size_t>(index) > sentences.size()) {
        return nullptr;
    }
    return &sentences[static_cast<std::size_t>(index - 1)];
}

std::vector<const Sentence*> Document::retained_sentences() const {
    std::vector<const Sentence*> out;
    for (const auto& s : sentences) {
        if (s.retained) {
            out.push_back(&s);
        }
    }
    return out;
}

DocumentSet::DocumentSet(std::vector<Document> docs) {
    for (auto& d : docs) {
        add(std::move(d));
    }
}

void DocumentSet::add(Document doc) {
    auto it = std::lower_bound(docs_.begin(), docs_.end(), doc.article_id,
                               [](const Document& d, const std::string& id) { return d.article_id < id; });
    if (it != docs_.end() && it->article_id == doc.article_id) {
        throw DataError("duplicate article id " + doc.article_id);
    }
    docs_.insert(it, std::move(doc));
}

const Document* DocumentSet::find(std::string_view article_id) const {
    auto it = std::lower_bound(docs_.begin(), docs_.end(), article_id,
                               [](const Document& d, std::string_view id) { return d.article_id < id; });
    if (it == docs_.end() || it->article_id != article_id) {
        return nullptr;
    }
    return &*it;
}

Document* DocumentSet::find(std::string_view article_id) {
    return const_cast<Document*>(std::as_const(*this).find(article_id));
}

DocumentSet DocumentSet::subset(const std::set<std::string>& ids) const {
    DocumentSet out;
    for (const auto& d : docs_) {
        if (ids.count(d.article_id) != 0) {
            out.docs_.push_back(d);
        }
    }
    return out;
}

std::set<std::string> FoldPlan::test_ids(int fold) const {
    std::set<std::string> out;
    for (const auto& [id, f] : assignments) {
        if (f == fold) {
            out.insert(id);
        }
    }
    return out;
}

std::set<std::string> FoldPlan::train_ids(int fold) const {
    std::set<std::string> out;
    for (const auto& [id, f] : assignments) {
        if (f != fold) {
            out.insert(id);
        }
    }
    return out;
}

std::vector<Token> tokenize(std::u32string_view text, std::size_t base_offset) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        if (is_space(text[i])) {
            ++i;
            continue;
        }
        std::size_t b = i;
        std::size_t e = i;
        while (e < text.size() && !is_space(text[e])) {
            ++e;
        }
        i = e;

        while (b < e && is_punctuation(text[b])) {
            tokens.push_back(make_token(text, b, b + 1, base_offset));
            ++b;
        }
        if (b == e) {
            continue;
        }
        std::vector<Token> trailing;
        while (e > b && is_punctuation(text[e - 1])) {
            if (text[e - 1] == U'.' && is_abbreviation(text.substr(b, e - b))) {
                break;
            }
            trailing.push_back(make_token(text, e - 1, e, base_offset));
            --e;
        }
        if (e > b) {
            tokens.push_back(make_token(text, b, e, base_offset));
        }
        tokens.insert(tokens.end(), trailing.rbegin(), trailing.rend());
    }
    return tokens;
}

std::vector<Token> tokenize(std::string_view utf8_text) {
    return tokenize(utf8_decode(utf8_text));
}

Document make_document(std::string article_id, std::string_view utf8_text) {
    Document doc;
    doc.article_id = std::move(article_id);
    doc.text = utf8_decode(utf8_text, "article " + doc.article_id);
    const std::u32string_view text(doc.text);
    std::size_t line_start = 0;
    int index = 1;
    while (line_start < text.size()) {
        auto nl = text.find(U'\n', line_start);
        const std::size_t line_end = nl == std::u32string_view::npos ? text.size() : nl;
        Sentence s;
        s.index = index++;
        s.span = {line_start, line_end};
        s.tokens = tokenize(text.substr(line_start, line_end - line_start), line_start);
        s.retained = s.tokens.size() > 1;
        doc.sentences.push_back(std::move(s));
        if (nl == std::u32string_view::npos) {
            break;
        }
        line_start = nl + 1;
    }
    return doc;
}

DocumentSet load_articles(const std::filesystem::path& directory) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory)) {
        throw DataError("not a directory: " + directory.string());
    }
    static const std::regex name_re(R"(^article(.+)\.txt$)");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const auto name = entry.path().filename().string();
        if (std::regex_match(name, name_re)) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    DocumentSet docs;
    for (const auto& path : files) {
        std::smatch m;
        const auto name = path.filename().string();
        std::regex_match(name, m, name_re);
        docs.add(make_document(m[1].str(), read_file(path)));
    }
    return docs;
}

std::vector<Fragment> read_fragment_file(const std::filesystem::path& path,
                                         std::vector<std::string>* model_ids) {
    const auto lines = split_lines(read_file(path));
    std::vector<Fragment> out;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const std::size_t lineno = n + 1;
        std::string_view line = lines[n];
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        const auto f = split(line, '\t');
        const std::size_t expected = model_ids != nullptr ? 5 : 4;
        if (f.size() != expected) {
            row_error(path, lineno, "expected " + std::to_string(expected) + " tab-separated fields, got " +
                                        std::to_string(f.size()));
        }
        long long start = 0;
        long long end = 0;
        if (f[0].empty() || f[1].empty()) {
            row_error(path, lineno, "empty article id or technique");
        }
        if (!parse_int(f[2], start) || !parse_int(f[3], end)) {
            row_error(path, lineno, "non-integer offset");
        }
        if (start < 0) {
            row_error(path, lineno, "negative start offset");
        }
        if (start >= end) {
            row_error(path, lineno, "start >= end");
        }
        out.push_back({f[0], static_cast<std::size_t>(start), static_cast<std::size_t>(end), f[1]});
        if (model_ids != nullptr) {
            if (f[4].empty()) {
                row_error(path, lineno, "empty model id");
            }
            model_ids->push_back(f[4]);
        }
    }
    return out;
}

void validate_fragments(const std::vector<Fragment>& fragments, const DocumentSet& documents,
                        std::string_view where) {
    for (std::size_t i = 0; i < fragments.size(); ++i) {
        const auto& fr = fragments[i];
        const auto* doc = documents.find(fr.article_id);
        const std::string prefix = std::string(where) + ": fragment " + std::to_string(i + 1) + ": ";
        if (doc == nullptr) {
            throw DataError(prefix + "unknown article id " + fr.article_id);
        }
        if (fr.start >= fr.end) {
            throw DataError(prefix + "start >= end");
        }
        if (fr.end > doc->length()) {
            throw DataError(prefix + "end " + std::to_string(fr.end) + " beyond document length " +
                            std::to_string(doc->length()));
        }
    }
}

std::vector<Fragment> load_flc_labels(const std::filesystem::path& path, DocumentSet& documents) {
    auto fragments = read_fragment_file(path);
    // Re-validate row by row so errors carry the file line (no blank lines in
    // valid files, but count them anyway).
    const auto lines = split_lines(read_file(path));
    std::size_t next = 0;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) {
            continue;
        }
        const auto& fr = fragments[next++];
        const auto* doc = documents.find(fr.article_id);
        if (doc == nullptr) {
            row_error(path, n + 1, "unknown article id " + fr.article_id);
        }
        if (fr.end > doc->length()) {
            row_error(path, n + 1, "end " + std::to_string(fr.end) + " beyond document length " +
                                       std::to_string(doc->length()));
        }
    }
    for (const auto& fr : fragments) {
        documents.find(fr.article_id)->gold.push_back(fr);
    }
    return fragments;
}

std::set<std::string> technique_vocabulary(const std::vector<Fragment>& fragments) {
    std::set<std::string> out;
    for (const auto& f : fragments) {
        out.insert(f.technique);
    }
    return out;
}

SlcLabels read_slc_label_file(const std::filesystem::path& path) {
    const auto lines = split_lines(read_file(path));
    SlcLabels out;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        std::string_view line = lines[n];
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        const auto f = split(line, '\t');
        if (f.size() != 3) {
            row_error(path, n + 1, "expected 3 tab-separated fields, got " + std::to_string(f.size()));
        }
        long long index = 0;
        if (f[0].empty() || !parse_int(f[1], index) || index < 1) {
            row_error(path, n + 1, "bad article id or sentence index");
        }
        bool label = false;
        if (f[2] == "propaganda") {
            label = true;
        } else if (f[2] != "non-propaganda") {
            row_error(path, n + 1, "unknown label '" + f[2] + "'");
        }
        SentenceKey key{f[0], static_cast<int>(index)};
        if (!out.emplace(key, label).second) {
            row_error(path, n + 1, "duplicate sentence " + f[0] + ":" + f[1]);
        }
    }
    return out;
}

SlcLabels load_slc_labels(const std::filesystem::path& path, const DocumentSet& documents) {
    auto labels = read_slc_label_file(path);
    for (const auto& [key, value] : labels) {
        const auto* doc = documents.find(key.article_id);
        if (doc == nullptr || doc->sentence(key.index) == nullptr) {
            throw DataError(path.string() + ": unknown sentence " + key.article_id + ":" +
                            std::to_string(key.index));
        }
    }
    return labels;
}

std::string format_fragments(const std::vector<Fragment>& fragments, std::string_view model_id) {
    std::string out;
    for (const auto& f : fragments) {
        out += f.article_id + '\t' + f.technique + '\t' + std::to_string(f.start) + '\t' +
               std::to_string(f.end);
        if (!model_id.empty()) {
            out += '\t';
            out += model_id;
        }
        out += '\n';
    }
    return out;
}

std::string format_slc_labels(const SlcLabels& labels) {
    std::string out;
    for (const auto& [key, value] : labels) {
        out += key.article_id + '\t' + std::to_string(key.index) + '\t' +
               (value ? "propaganda" : "non-propaganda") + '\n';
    }
    return out;
}

std::vector<Fragment> project_single_layer(std::vector<Fragment> fragments) {
    std::sort(fragments.begin(), fragments.end(), [](const Fragment& a, const Fragment& b) {
        if (a.article_id != b.article_id) return a.article_id < b.article_id;
        if (a.start != b.start) return a.start < b.start;
        if (a.end - a.start != b.end - b.start) return a.end - a.start > b.end - b.start;
        return a.technique < b.technique;
    });
    std::vector<Fragment> kept;
    for (auto& f : fragments) {
        // Sorted by start, so only the last kept fragment of the same article can overlap.
        if (!kept.empty() && kept.back().article_id == f.article_id &&
            kept.back().span().intersects(f.span())) {
            continue;
        }
        kept.push_back(std::move(f));
    }
    return kept;
}

TagSequence encode_bio(const Sentence& sentence, std::string_view article_id,
                       const std::vector<Fragment>& fragments) {
    TagSequence out;
    out.article_id = std::string(article_id);
    out.sentence_index = sentence.index;
    out.tags.assign(sentence.tokens.size(), "O");

    // Snap to token ranges first, then resolve overlaps in token space.
    std::vector<Fragment> snapped;
    for (const auto& f : fragments) {
        if (f.article_id != article_id || !f.span().intersects(sentence.span)) {
            continue;
        }
        std::size_t first = sentence.tokens.size();
        std::size_t last = 0;
        for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
            if (sentence.tokens[i].span.intersects(f.span())) {
                first = std::min(first, i);
                last = i;
            }
        }
        if (first == sentence.tokens.size()) {
            continue;  // falls entirely in whitespace
        }
        snapped.push_back({f.article_id, first, last + 1, f.technique});
    }
    for (const auto& f : project_single_layer(std::move(snapped))) {
        out.tags[f.start] = "B-" + f.technique;
        for (std::size_t i = f.start + 1; i < f.end; ++i) {
            out.tags[i] = "I-" + f.technique;
        }
    }
    return out;
}

std::vector<Fragment> decode_bio(const TagSequence& tags, const Sentence& sentence) {
    if (tags.tags.size() != sentence.tokens.size()) {
        throw DataError("tag sequence length " + std::to_string(tags.tags.size()) +
                        " does not match token count " + std::to_string(sentence.tokens.size()));
    }
    std::vector<Fragment> out;
    std::optional<Fragment> open;
    auto close = [&] {
        if (open) {
            out.push_back(std::move(*open));
            open.reset();
        }
    };
    for (std::size_t i = 0; i < tags.tags.size(); ++i) {
        const auto& tag = tags.tags[i];
        const auto& tok = sentence.tokens[i];
        if (tag == "O") {
            close();
            continue;
        }
        if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I')) {
            throw DataError("unknown tag '" + tag + "'");
        }
        const std::string technique = tag.substr(2);
        if (tag[0] == 'I' && open && open->technique == technique) {
            open->end = tok.span.end;
            continue;
        }
        close();
        open = Fragment{tags.article_id, tok.span.start, tok.span.end, technique};
    }
    close();
    return out;
}

FoldPlan make_folds(const DocumentSet& documents, int k, std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& d : documents) {
        ids.push_back(d.article_id);
    }
    return make_folds(std::move(ids), k, seed);
}

FoldPlan make_folds(std::vector<std::string> article_ids, int k, std::uint64_t seed) {
    if (k < 2) {
        throw UsageError("fold count must be at least 2, got " + std::to_string(k));
    }
    if (static_cast<std::size_t>(k) > article_ids.size()) {
        throw UsageError("fold count " + std::to_string(k) + " exceeds article count " +
                         std::to_string(article_ids.size()));
    }
    std::sort(article_ids.begin(), article_ids.end());
    Rng rng(seed);
    shuffle(article_ids.begin(), article_ids.end(), rng);
    FoldPlan plan;
    plan.k = k;
    for (std::size_t i = 0; i < article_ids.size(); ++i) {
        if (!plan.assignments.emplace(article_ids[i], static_cast<int>(i % k)).second) {
            throw DataError("duplicate article id " + article_ids[i]);
        }
    }
    return plan;
}

std::string format_fold_plan(const FoldPlan& plan) {
    std::string out;
    for (const auto& [id, fold] : plan.assignments) {
        out += id + '\t' + std::to_string(fold) + '\n';
    }
    return out;
}

}  // namespace propdetect
