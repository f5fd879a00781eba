#include "propdetect/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "propdetect/error.hpp"
#include "propdetect/textio.hpp"
#include "propdetect/topics.hpp"

namespace propdetect {

namespace {

std::vector<std::string> lex_lines(const std::filesystem::path& path) {
    auto lines = split_lines(read_file(path));
    for (auto& l : lines) {
        if (!l.empty() && l.back() == '\r') {
            l.pop_back();
        }
    }
    return lines;
}

[[noreturn]] void lex_error(const std::filesystem::path& path, std::size_t line, const std::string& what) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

bool is_upper(char32_t c) { return c >= U'A' && c <= U'Z'; }
bool is_lower(char32_t c) { return c >= U'a' && c <= U'z'; }
bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

double token_count(const Sentence& s) { return static_cast<double>(s.tokens.size()); }

double ratio(double count, double total) { return total > 0.0 ? count / total : 0.0; }

}  // namespace

double FeatureVector::operator[](std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) {
            return values[static_cast<Eigen::Index>(i)];
        }
    }
    throw UsageError("no feature named " + std::string(name));
}

bool FeatureVector::has(std::string_view name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
}

void FeatureVector::append(const FeatureVector& other) {
    const auto old = values.size();
    values.conservativeResize(old + other.values.size());
    values.tail(other.values.size()) = other.values;
    names.insert(names.end(), other.names.begin(), other.names.end());
}

void FeatureVector::push(std::string name, double value) {
    const auto old = values.size();
    values.conservativeResize(old + 1);
    values[old] = value;
    names.push_back(std::move(name));
}

std::string coarse_pos(std::string_view tag) {
    std::string t(tag);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (const char* c : kCoarsePos) {
        if (t == c) {
            return t;
        }
    }
    if (t == "N" || t == "NN" || t == "NNS") return "NOUN";
    if (t == "NNP" || t == "NNPS") return "PROPN";
    if (t == "V" || t == "AUX" || t == "MD" || t.rfind("VB", 0) == 0) return "VERB";
    if (t == "A" || t == "S" || t.rfind("JJ", 0) == 0) return "ADJ";
    if (t == "R" || t == "WRB" || t.rfind("RB", 0) == 0) return "ADV";
    if (t == "PRP" || t == "PRP$" || t == "WP" || t == "WP$") return "PRON";
    if (t == "DT" || t == "PDT" || t == "WDT") return "DET";
    if (t == "IN" || t == "TO") return "ADP";
    if (t == "CD") return "NUM";
    if (t == "CC" || t == "CCONJ" || t == "SCONJ") return "CONJ";
    if (t == "." || t == "," || t == ":" || t == "``" || t == "''" || t == "-LRB-" || t == "-RRB-" ||
        t == "#" || t == "$" || t == "HYPH" || t == "NFP") {
        return "PUNCT";
    }
    return "OTHER";
}

void Lexicons::add_loaded_phrase(std::string_view phrase) {
    std::vector<std::string> words;
    for (const auto& t : tokenize(phrase)) {
        words.push_back(to_lower(t.text));
    }
    if (!words.empty()) {
        loaded.push_back(std::move(words));
    }
}

void load_sentiment_lexicon(const std::filesystem::path& path, Lexicons& lex) {
    if (path.empty()) return;
    const auto lines = lex_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        const auto f = split(lines[n], '\t');
        double score = 0.0;
        if (f.size() != 2 || f[0].empty() || !parse_double(f[1], score)) {
            lex_error(path, n + 1, "expected token<TAB>score");
        }
        if (!std::isfinite(score) || score < -1.0 || score > 1.0) {
            lex_error(path, n + 1, "score outside [-1, 1]");
        }
        lex.sentiment[to_lower(f[0])] = score;
    }
}

void load_emotion_lexicon(const std::filesystem::path& path, Lexicons& lex) {
    if (path.empty()) return;
    const auto lines = lex_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        const auto f = split(lines[n], '\t');
        if (f.size() != 3 || f[0].empty() || (f[2] != "0" && f[2] != "1")) {
            lex_error(path, n + 1, "expected token<TAB>emotion<TAB>0|1");
        }
        const auto emotion = to_lower(f[1]);
        const bool known = std::any_of(kEmotions.begin(), kEmotions.end(),
                                       [&](const char* e) { return emotion == e; });
        // NRC files also carry trust, surprise, anticipation and polarity rows.
        if (known && f[2] == "1") {
            lex.emotion[to_lower(f[0])].insert(emotion);
        }
    }
}

void load_loaded_lexicon(const std::filesystem::path& path, Lexicons& lex) {
    if (path.empty()) return;
    for (const auto& line : lex_lines(path)) {
        const auto phrase = trim(line);
        if (!phrase.empty()) {
            lex.add_loaded_phrase(phrase);
        }
    }
}

void load_sense_lexicon(const std::filesystem::path& path, Lexicons& lex) {
    if (path.empty()) return;
    const auto lines = lex_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        const auto f = split(lines[n], '\t');
        long long count = 0;
        if (f.size() != 3 || f[0].empty() || !parse_int(f[2], count)) {
            lex_error(path, n + 1, "expected lemma<TAB>pos<TAB>count");
        }
        if (count < 0) {
            lex_error(path, n + 1, "negative sense count");
        }
        lex.senses[{to_lower(f[0]), coarse_pos(f[1])}] = count;
    }
}

Lexicons load_lexicons(const std::filesystem::path& sentiment, const std::filesystem::path& emotion,
                       const std::filesystem::path& loaded, const std::filesystem::path& senses) {
    Lexicons lex;
    load_sentiment_lexicon(sentiment, lex);
    load_emotion_lexicon(emotion, lex);
    load_loaded_lexicon(loaded, lex);
    load_sense_lexicon(senses, lex);
    return lex;
}

const Eigen::VectorXd* EmbeddingTable::find(std::string_view token) const {
    auto it = vectors.find(std::string(token));
    if (it == vectors.end()) {
        it = vectors.find(to_lower(token));
    }
    return it == vectors.end() ? nullptr : &it->second;
}

EmbeddingTable parse_word_vectors(std::string_view content, std::string_view source) {
    EmbeddingTable table;
    const auto lines = split_lines(content);
    auto fields_of = [](const std::string& line) {
        std::vector<std::string> out;
        std::istringstream ss(line);
        std::string f;
        while (ss >> f) {
            out.push_back(f);
        }
        return out;
    };
    auto fail = [&](std::size_t n, const std::string& what) {
        throw DataError(std::string(source) + ":" + std::to_string(n + 1) + ": " + what);
    };
    std::size_t first = 0;
    if (!lines.empty()) {
        const auto f = fields_of(lines[0]);
        long long count = 0;
        long long dim = 0;
        if (f.size() == 2 && parse_int(f[0], count) && parse_int(f[1], dim)) {
            if (dim <= 0) {
                fail(0, "non-positive dimension in header");
            }
            table.dimension = static_cast<int>(dim);
            first = 1;
        }
    }
    for (std::size_t n = first; n < lines.size(); ++n) {
        const auto f = fields_of(lines[n]);
        if (f.empty()) {
            continue;
        }
        if (table.dimension == 0) {
            if (f.size() < 2) {
                fail(n, "row has no vector components");
            }
            table.dimension = static_cast<int>(f.size() - 1);
        }
        if (f.size() != static_cast<std::size_t>(table.dimension) + 1) {
            fail(n, "expected " + std::to_string(table.dimension) + " components, got " +
                        std::to_string(f.size() - 1));
        }
        Eigen::VectorXd v(table.dimension);
        for (int i = 0; i < table.dimension; ++i) {
            double x = 0.0;
            if (!parse_double(f[static_cast<std::size_t>(i) + 1], x) || !std::isfinite(x)) {
                fail(n, "non-numeric component '" + f[static_cast<std::size_t>(i) + 1] + "'");
            }
            v[i] = x;
        }
        table.vectors[f[0]] = std::move(v);
    }
    return table;
}

EmbeddingTable load_word_vectors(const std::filesystem::path& path) {
    return parse_word_vectors(read_file(path), path.string());
}

void load_annotations(const std::filesystem::path& path, DocumentSet& documents) {
    const auto lines = lex_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (lines[n].empty()) continue;
        const auto f = split(lines[n], '\t');
        long long sent = 0;
        long long tok = 0;
        if (f.size() != 6 || !parse_int(f[1], sent) || !parse_int(f[2], tok)) {
            lex_error(path, n + 1, "expected article_id, sentence_index, token_index, token, POS, NER");
        }
        auto* doc = documents.find(f[0]);
        if (doc == nullptr || sent < 1 || static_cast<std::size_t>(sent) > doc->sentences.size()) {
            lex_error(path, n + 1, "unknown sentence " + f[0] + ":" + f[1]);
        }
        auto& sentence = doc->sentences[static_cast<std::size_t>(sent - 1)];
        if (tok < 0 || static_cast<std::size_t>(tok) >= sentence.tokens.size()) {
            lex_error(path, n + 1, "token index out of range");
        }
        auto& token = sentence.tokens[static_cast<std::size_t>(tok)];
        if (token.text != f[3]) {
            lex_error(path, n + 1, "token '" + f[3] + "' does not match '" + token.text + "'");
        }
        if (!f[4].empty()) {
            token.pos = f[4];
        }
        token.ner = f[5];
    }
}

void apply_fallback_tags(Document& document) {
    for (auto& sentence : document.sentences) {
        for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
            auto& tok = sentence.tokens[i];
            const auto cps = utf8_decode(tok.text);
            const bool punct = is_punctuation_token(tok.text);
            const bool number = !cps.empty() && is_digit(cps[0]) &&
                                std::all_of(cps.begin(), cps.end(), [](char32_t c) {
                                    return is_digit(c) || c == U',' || c == U'.';
                                });
            const bool proper = i > 0 && !cps.empty() && is_upper(cps[0]);
            if (!tok.pos) {
                tok.pos = punct ? "PUNCT" : number ? "NUM" : proper ? "PROPN" : "NOUN";
            }
            if (!tok.ner) {
                tok.ner = proper ? "PERSON" : "";
            }
        }
    }
}

FeatureVector char_features(const Sentence& sentence) {
    double questions = 0;
    double exclamations = 0;
    double with_question = 0;
    double with_exclamation = 0;
    double first_cap = 0;
    double all_cap = 0;
    for (const auto& tok : sentence.tokens) {
        const auto cps = utf8_decode(tok.text);
        const auto q = std::count(cps.begin(), cps.end(), U'?');
        const auto e = std::count(cps.begin(), cps.end(), U'!');
        questions += static_cast<double>(q);
        exclamations += static_cast<double>(e);
        with_question += q > 0 ? 1 : 0;
        with_exclamation += e > 0 ? 1 : 0;
        if (!cps.empty() && is_upper(cps[0])) {
            first_cap += 1;
        }
        const bool has_upper = std::any_of(cps.begin(), cps.end(), is_upper);
        const bool has_lower = std::any_of(cps.begin(), cps.end(), is_lower);
        if (cps.size() >= 2 && has_upper && !has_lower) {
            all_cap += 1;
        }
    }
    const double n = token_count(sentence);
    FeatureVector v;
    v.push("question_count", questions);
    v.push("exclamation_count", exclamations);
    v.push("n_first_cap", first_cap);
    v.push("n_all_cap", all_cap);
    v.push("question_ratio", ratio(with_question, n));
    v.push("exclamation_ratio", ratio(with_exclamation, n));
    v.push("first_cap_ratio", ratio(first_cap, n));
    v.push("all_cap_ratio", ratio(all_cap, n));
    return v;
}

int count_syllables(std::string_view word) {
    const auto lower = to_lower(word);
    auto is_vowel = [](char c) {
        return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
    };
    int groups = 0;
    bool in_group = false;
    char last_letter = 0;
    for (char c : lower) {
        if (!std::isalpha(static_cast<unsigned char>(c))) {
            in_group = false;
            continue;
        }
        last_letter = c;
        if (is_vowel(c)) {
            if (!in_group) {
                ++groups;
            }
            in_group = true;
        } else {
            in_group = false;
        }
    }
    if (last_letter == 'e') {
        --groups;
    }
    return std::max(groups, 1);
}

FeatureVector readability_features(const Sentence& sentence) {
    double words = 0;
    double syllables = 0;
    double letters = 0;
    double polysyllabic = 0;
    for (const auto& tok : sentence.tokens) {
        if (is_punctuation_token(tok.text)) {
            continue;
        }
        const int syl = count_syllables(tok.text);
        words += 1;
        syllables += syl;
        letters += static_cast<double>(utf8_decode(tok.text).size());
        polysyllabic += syl >= 3 ? 1 : 0;
    }
    FeatureVector v;
    constexpr double sentences = 1.0;
    if (words > 0) {
        v.push("flesch_reading_ease", 206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words));
        v.push("flesch_kincaid_grade", 0.39 * (words / sentences) + 11.8 * (syllables / words) - 15.59);
    } else {
        v.push("flesch_reading_ease", 0.0);
        v.push("flesch_kincaid_grade", 0.0);
    }
    v.push("word_count", words);
    v.push("mean_word_length", ratio(letters, words));
    v.push("fraction_polysyllabic", ratio(polysyllabic, words));
    return v;
}

FeatureVector sentiment_features(const Sentence& sentence, const Lexicons& lex) {
    double sum_pos = 0;
    double sum_neg = 0;
    double max_pos = 0;
    double max_neg = 0;
    double matched = 0;
    for (const auto& tok : sentence.tokens) {
        auto it = lex.sentiment.find(to_lower(tok.text));
        if (it == lex.sentiment.end()) {
            continue;
        }
        matched += 1;
        const double s = it->second;
        if (s > 0) {
            sum_pos += s;
            max_pos = std::max(max_pos, s);
        } else if (s < 0) {
            sum_neg += -s;
            max_neg = std::max(max_neg, -s);
        }
    }
    const double n = token_count(sentence);
    FeatureVector v;
    v.push("sum_pos", sum_pos);
    v.push("sum_neg", sum_neg);
    v.push("compound", (sum_pos - sum_neg) / (1.0 + n));
    v.push("max_pos", max_pos);
    v.push("max_neg", max_neg);
    v.push("n_matched", matched);
    // Stand-in for a subjectivity score: share of tokens with any polarity.
    v.push("subjectivity", ratio(matched, n));
    return v;
}

FeatureVector emotion_features(const Sentence& sentence, const Lexicons& lex) {
    std::array<double, kEmotions.size()> counts{};
    for (const auto& tok : sentence.tokens) {
        auto it = lex.emotion.find(to_lower(tok.text));
        if (it == lex.emotion.end()) {
            continue;
        }
        for (std::size_t e = 0; e < kEmotions.size(); ++e) {
            counts[e] += it->second.count(kEmotions[e]) != 0 ? 1 : 0;
        }
    }
    const double n = token_count(sentence);
    FeatureVector v;
    for (std::size_t e = 0; e < kEmotions.size(); ++e) {
        v.push(std::string(kEmotions[e]) + "_count", counts[e]);
    }
    for (std::size_t e = 0; e < kEmotions.size(); ++e) {
        v.push(std::string(kEmotions[e]) + "_ratio", ratio(counts[e], n));
    }
    return v;
}

namespace {

// Calls `hit(start, length)` for every occurrence of every loaded phrase.
template <typename F>
void for_each_loaded_match(const Sentence& sentence, const Lexicons& lex, F&& hit) {
    std::vector<std::string> lower;
    lower.reserve(sentence.tokens.size());
    for (const auto& t : sentence.tokens) {
        lower.push_back(to_lower(t.text));
    }
    for (const auto& phrase : lex.loaded) {
        if (phrase.size() > lower.size()) {
            continue;
        }
        for (std::size_t i = 0; i + phrase.size() <= lower.size(); ++i) {
            if (std::equal(phrase.begin(), phrase.end(), lower.begin() + static_cast<std::ptrdiff_t>(i))) {
                hit(i, phrase.size());
            }
        }
    }
}

}  // namespace

FeatureVector loaded_word_features(const Sentence& sentence, const Lexicons& lex) {
    double count = 0;
    for_each_loaded_match(sentence, lex, [&](std::size_t, std::size_t) { count += 1; });
    FeatureVector v;
    v.push("loaded_count", count);
    v.push("loaded_present", count > 0 ? 1.0 : 0.0);
    return v;
}

std::vector<bool> loaded_phrase_mask(const Sentence& sentence, const Lexicons& lex) {
    std::vector<bool> mask(sentence.tokens.size(), false);
    for_each_loaded_match(sentence, lex, [&](std::size_t start, std::size_t len) {
        std::fill(mask.begin() + static_cast<std::ptrdiff_t>(start),
                  mask.begin() + static_cast<std::ptrdiff_t>(start + len), true);
    });
    return mask;
}

FeatureVector multi_meaning_features(const Sentence& sentence, const Lexicons& lex) {
    double sum = 0;
    for (const auto& tok : sentence.tokens) {
        const auto pos = tok.pos ? coarse_pos(*tok.pos) : std::string("OTHER");
        auto it = lex.senses.find({to_lower(tok.text), pos});
        if (it != lex.senses.end()) {
            sum += static_cast<double>(it->second);
        }
    }
    FeatureVector v;
    v.push("sense_sum", sum);
    v.push("sense_mean", ratio(sum, token_count(sentence)));
    return v;
}

FeatureVector pos_ner_features(const Sentence& sentence, std::vector<std::string>* warnings) {
    std::array<double, kCoarsePos.size()> pos_counts{};
    std::array<double, kSelectedNer.size()> ner_counts{};
    bool annotated = false;
    for (const auto& tok : sentence.tokens) {
        if (tok.pos) {
            annotated = true;
            const auto coarse = coarse_pos(*tok.pos);
            for (std::size_t i = 0; i < kCoarsePos.size(); ++i) {
                if (coarse == kCoarsePos[i]) {
                    pos_counts[i] += 1;
                }
            }
        }
        if (tok.ner) {
            annotated = true;
            for (std::size_t i = 0; i < kSelectedNer.size(); ++i) {
                if (*tok.ner == kSelectedNer[i]) {
                    ner_counts[i] += 1;
                }
            }
        }
    }
    if (!annotated && !sentence.tokens.empty() && warnings != nullptr) {
        warnings->push_back("sentence " + std::to_string(sentence.index) +
                            ": no POS/NER annotations, features set to zero");
    }
    FeatureVector v;
    double entities = 0;
    for (std::size_t i = 0; i < kCoarsePos.size(); ++i) {
        v.push(std::string("pos_") + kCoarsePos[i], pos_counts[i]);
    }
    for (std::size_t i = 0; i < kSelectedNer.size(); ++i) {
        v.push(std::string("ner_") + kSelectedNer[i], ner_counts[i]);
        entities += ner_counts[i];
    }
    v.push("entity_total", entities);
    return v;
}

FeatureVector layout_features(const Sentence& sentence, const Document& document) {
    const auto retained = document.retained_sentences();
    const auto total = static_cast<long long>(retained.size());
    long long rank = 0;
    for (std::size_t i = 0; i < retained.size(); ++i) {
        if (retained[i]->index == sentence.index) {
            rank = static_cast<long long>(i) + 1;
        }
    }
    std::array<double, 5> position{};
    if (rank > 0) {
        if (rank == 1) {
            position[0] = 1;
        } else if (rank == total) {
            position[4] = 1;
        } else if (10 * rank < 3 * total) {
            position[1] = 1;
        } else if (10 * rank > 7 * total) {
            position[3] = 1;
        } else {
            position[2] = 1;
        }
    }
    const auto l = sentence.tokens.size();
    std::array<double, 7> length{};
    const std::size_t bin = l <= 2 ? 0 : l <= 4 ? 1 : l <= 8 ? 2 : l <= 20 ? 3 : l <= 40 ? 4 : l <= 60 ? 5 : 6;
    length[bin] = 1;

    FeatureVector v;
    static const std::array<const char*, 5> position_names = {
        "position_first", "position_top", "position_middle", "position_bottom", "position_last"};
    static const std::array<const char*, 7> length_names = {
        "length_le2", "length_3_4", "length_5_8", "length_9_20", "length_21_40", "length_41_60", "length_gt60"};
    for (std::size_t i = 0; i < position.size(); ++i) {
        v.push(position_names[i], position[i]);
    }
    for (std::size_t i = 0; i < length.size(); ++i) {
        v.push(length_names[i], length[i]);
    }
    return v;
}

Eigen::VectorXd sentence_embedding(const Sentence& sentence, const EmbeddingTable& table) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(table.dimension);
    for (const auto& tok : sentence.tokens) {
        if (const auto* v = table.find(tok.text)) {
            sum += *v;
        }
    }
    return sum;
}

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() != v.size()) {
        throw UsageError("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
    }
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) {
        return 0.0;
    }
    return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

std::string schema_id(const FeatureToggles& t, int embedding_dim) {
    return "propdetect-features/v1;emb=" + std::to_string(t.embedding ? embedding_dim : 0) +
           ";ling=" + (t.linguistic ? "1" : "0") + ";layout=" + (t.layout ? "1" : "0") +
           ";topic=" + (t.topical ? "1" : "0");
}

FeatureToggles parse_toggles(std::string_view spec) {
    FeatureToggles t{false, false, false, false};
    for (const auto& raw : split(spec, ',')) {
        const auto name = trim(raw);
        if (name.empty()) continue;
        if (name == "embedding") t.embedding = true;
        else if (name == "linguistic") t.linguistic = true;
        else if (name == "layout") t.layout = true;
        else if (name == "topical") t.topical = true;
        else if (name == "all") t = FeatureToggles{};
        else throw UsageError("unknown feature family '" + name + "'");
    }
    return t;
}

std::string format_toggles(const FeatureToggles& t) {
    std::vector<std::string> parts;
    if (t.embedding) parts.emplace_back("embedding");
    if (t.linguistic) parts.emplace_back("linguistic");
    if (t.layout) parts.emplace_back("layout");
    if (t.topical) parts.emplace_back("topical");
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        out += (i ? "," : "") + parts[i];
    }
    return out;
}

FeatureVector assemble_features(const Sentence& sentence, const Document& document, const Lexicons& lex,
                                const EmbeddingTable* table, const DocumentTopics* topics,
                                const FeatureToggles& toggles, std::vector<std::string>* warnings) {
    FeatureVector v;
    int dim = 0;
    if (toggles.embedding) {
        if (table == nullptr) {
            throw UsageError("embedding features enabled but no embedding table loaded");
        }
        dim = table->dimension;
        const auto emb = sentence_embedding(sentence, *table);
        for (int i = 0; i < dim; ++i) {
            v.push("emb_" + std::to_string(i), emb[i]);
        }
    }
    if (toggles.linguistic) {
        v.append(char_features(sentence));
        v.append(readability_features(sentence));
        v.append(sentiment_features(sentence, lex));
        v.append(emotion_features(sentence, lex));
        v.append(loaded_word_features(sentence, lex));
        v.append(multi_meaning_features(sentence, lex));
        v.append(pos_ner_features(sentence, warnings));
    }
    if (toggles.layout) {
        v.append(layout_features(sentence, document));
    }
    if (toggles.topical) {
        if (topics == nullptr) {
            throw UsageError("topical features enabled but no topic model available");
        }
        v.append(topical_features(sentence, *topics));
    }
    v.schema_id = schema_id(toggles, dim);
    return v;
}

void check_schema(const FeatureVector& v, std::string_view expected) {
    if (v.schema_id != expected) {
        throw DataError("feature schema mismatch: model expects '" + std::string(expected) + "', got '" +
                        v.schema_id + "'");
    }
}

}  // namespace propdetect
