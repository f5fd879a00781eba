#include "propdetect/topics.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "propdetect/error.hpp"
#include "propdetect/random.hpp"
#include "propdetect/textio.hpp"

namespace propdetect {

namespace {

const std::set<std::string, std::less<>>& stopwords() {
    static const std::set<std::string, std::less<>> words = {
        "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
        "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
        "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "even",
        "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
        "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
        "itself", "just", "like", "may", "me", "might", "more", "most", "much", "must", "my",
        "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "one", "only", "or", "other",
        "our", "ours", "ourselves", "out", "over", "own", "said", "same", "says", "she", "should",
        "since", "so", "some", "still", "such", "than", "that", "the", "their", "theirs", "them",
        "themselves", "then", "there", "these", "they", "this", "those", "though", "through", "to",
        "too", "under", "until", "up", "upon", "us", "very", "was", "we", "were", "what", "when",
        "where", "which", "while", "who", "whom", "why", "will", "with", "would", "yet", "you",
        "your", "yours", "yourself", "yourselves"};
    return words;
}

// Draws from unnormalized weights given their running sum.
int sample_discrete(const std::vector<double>& cumulative, Rng& rng) {
    const double u = uniform01(rng) * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                     static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
}

}  // namespace

bool is_stopword(std::string_view lowercased) {
    return stopwords().find(lowercased) != stopwords().end();
}

std::vector<std::string> lda_preprocess(const std::vector<std::string>& tokens, int min_token_length,
                                        bool use_stopwords) {
    std::vector<std::string> out;
    for (const auto& t : tokens) {
        auto lower = to_lower(t);
        if (static_cast<int>(utf8_decode(lower).size()) < min_token_length) continue;
        if (is_punctuation_token(lower)) continue;
        if (use_stopwords && is_stopword(lower)) continue;
        out.push_back(std::move(lower));
    }
    return out;
}

Eigen::MatrixXd LdaModel::topic_word_distribution() const {
    const double v_beta = beta * vocabulary_size();
    Eigen::MatrixXd phi = topic_word_counts.cast<double>().array() + beta;
    for (int k = 0; k < topics; ++k) {
        phi.row(k) /= (topic_totals[k] + v_beta);
    }
    return phi;
}

LdaModel fit_lda(const std::vector<std::vector<std::string>>& documents, const LdaOptions& options) {
    if (options.topics < 2) {
        throw UsageError("LDA needs at least 2 topics");
    }
    if (options.iterations < 1) {
        throw UsageError("LDA needs at least 1 iteration");
    }
    std::vector<std::vector<std::string>> cleaned;
    std::map<std::string, int> frequency;
    for (const auto& doc : documents) {
        cleaned.push_back(lda_preprocess(doc, options.min_token_length, options.use_stopwords));
        for (const auto& w : cleaned.back()) {
            ++frequency[w];
        }
    }

    LdaModel model;
    model.topics = options.topics;
    model.alpha = options.alpha > 0 ? options.alpha : 50.0 / options.topics;
    model.beta = options.beta;
    model.seed = options.seed;
    model.inference_passes = options.inference_passes;
    model.min_token_length = options.min_token_length;
    model.use_stopwords = options.use_stopwords;
    for (const auto& [w, c] : frequency) {
        if (c >= options.min_count) {
            model.word_ids.emplace(w, model.vocabulary_size());
            model.vocabulary.push_back(w);
        }
    }
    if (model.vocabulary.empty()) {
        throw DataError("LDA: empty vocabulary after filtering");
    }

    const int K = model.topics;
    const int V = model.vocabulary_size();
    std::vector<std::vector<int>> words;
    for (const auto& doc : cleaned) {
        std::vector<int> ids;
        for (const auto& w : doc) {
            auto it = model.word_ids.find(w);
            if (it != model.word_ids.end()) {
                ids.push_back(it->second);
            }
        }
        words.push_back(std::move(ids));
    }

    Rng rng(options.seed);
    Eigen::MatrixXi doc_topic = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(words.size()), K);
    model.topic_word_counts = Eigen::MatrixXi::Zero(K, V);
    model.topic_totals = Eigen::VectorXi::Zero(K);
    std::vector<std::vector<int>> z(words.size());
    for (std::size_t d = 0; d < words.size(); ++d) {
        for (int w : words[d]) {
            const int k = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(K)));
            z[d].push_back(k);
            ++doc_topic(static_cast<Eigen::Index>(d), k);
            ++model.topic_word_counts(k, w);
            ++model.topic_totals[k];
        }
    }

    const double v_beta = V * model.beta;
    std::vector<double> cumulative(static_cast<std::size_t>(K));
    for (int sweep = 0; sweep < options.iterations; ++sweep) {
        for (std::size_t d = 0; d < words.size(); ++d) {
            const auto di = static_cast<Eigen::Index>(d);
            for (std::size_t i = 0; i < words[d].size(); ++i) {
                const int w = words[d][i];
                int k = z[d][i];
                --doc_topic(di, k);
                --model.topic_word_counts(k, w);
                --model.topic_totals[k];
                double acc = 0.0;
                for (int t = 0; t < K; ++t) {
                    acc += (doc_topic(di, t) + model.alpha) * (model.topic_word_counts(t, w) + model.beta) /
                           (model.topic_totals[t] + v_beta);
                    cumulative[static_cast<std::size_t>(t)] = acc;
                }
                k = sample_discrete(cumulative, rng);
                z[d][i] = k;
                ++doc_topic(di, k);
                ++model.topic_word_counts(k, w);
                ++model.topic_totals[k];
            }
        }
        if (options.on_sweep) {
            options.on_sweep(sweep, model.topic_word_counts);
        }
    }
    return model;
}

std::vector<std::string> sentence_words(const Sentence& sentence) {
    std::vector<std::string> out;
    for (const auto& t : sentence.tokens) {
        out.push_back(t.text);
    }
    return out;
}

std::vector<std::string> document_words(const Document& document) {
    std::vector<std::string> out;
    for (const auto* s : document.retained_sentences()) {
        for (const auto& t : s->tokens) {
            out.push_back(t.text);
        }
    }
    return out;
}

LdaModel fit_lda(const DocumentSet& documents, const LdaOptions& options) {
    std::vector<std::vector<std::string>> docs;
    for (const auto& d : documents) {
        docs.push_back(document_words(d));
    }
    return fit_lda(docs, options);
}

TopicProportions infer_doc_topics(const LdaModel& model, const std::vector<std::string>& tokens) {
    const int K = model.topics;
    std::vector<int> ids;
    for (const auto& w : lda_preprocess(tokens, model.min_token_length, model.use_stopwords)) {
        auto it = model.word_ids.find(w);
        if (it != model.word_ids.end()) {
            ids.push_back(it->second);
        }
    }
    if (ids.empty()) {
        return TopicProportions::Constant(K, 1.0 / K);
    }
    Rng rng(derive_seed(model.seed, "lda-infer"));
    Eigen::VectorXi local = Eigen::VectorXi::Zero(K);
    std::vector<int> z;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int k = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(K)));
        z.push_back(k);
        ++local[k];
    }
    const double v_beta = model.vocabulary_size() * model.beta;
    std::vector<double> cumulative(static_cast<std::size_t>(K));
    for (int pass = 0; pass < model.inference_passes; ++pass) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const int w = ids[i];
            --local[z[i]];
            double acc = 0.0;
            for (int t = 0; t < K; ++t) {
                acc += (local[t] + model.alpha) * (model.topic_word_counts(t, w) + model.beta) /
                       (model.topic_totals[t] + v_beta);
                cumulative[static_cast<std::size_t>(t)] = acc;
            }
            z[i] = sample_discrete(cumulative, rng);
            ++local[z[i]];
        }
    }
    TopicProportions p = local.cast<double>().array() + model.alpha;
    return p / p.sum();
}

int dominant_topic(const TopicProportions& proportions) {
    int best = 0;
    for (int k = 1; k < proportions.size(); ++k) {
        if (proportions[k] > proportions[best]) {
            best = k;
        }
    }
    return best;
}

DocumentTopics compute_document_topics(const Document& document, const LdaModel& model) {
    DocumentTopics out;
    out.document_topic = dominant_topic(infer_doc_topics(model, document_words(document)));
    for (const auto* s : document.retained_sentences()) {
        out.sentence_topics[s->index] = dominant_topic(infer_doc_topics(model, sentence_words(*s)));
    }
    return out;
}

FeatureVector topical_features(const Sentence& sentence, const DocumentTopics& topics) {
    FeatureVector v;
    auto it = topics.sentence_topics.find(sentence.index);
    if (it == topics.sentence_topics.end()) {
        v.push("dt_sent_eq_doc", 0.0);
        v.push("dt_sent_eq_next", 0.0);
        v.push("dt_sent_eq_prev", 0.0);
        return v;
    }
    const int dt = it->second;
    const auto next = std::next(it);
    v.push("dt_sent_eq_doc", dt == topics.document_topic ? 1.0 : 0.0);
    v.push("dt_sent_eq_next", next != topics.sentence_topics.end() && next->second == dt ? 1.0 : 0.0);
    v.push("dt_sent_eq_prev",
           it != topics.sentence_topics.begin() && std::prev(it)->second == dt ? 1.0 : 0.0);
    return v;
}

FeatureVector topical_features(const Sentence& sentence, const Document& document, const LdaModel& model) {
    return topical_features(sentence, compute_document_topics(document, model));
}

std::string save_lda(const LdaModel& model) {
    std::ostringstream out;
    out << "propdetect-lda\t1\n";
    out << "topics\t" << model.topics << '\n';
    out << "vocabulary\t" << model.vocabulary_size() << '\n';
    out << "alpha\t" << format_double(model.alpha) << '\n';
    out << "beta\t" << format_double(model.beta) << '\n';
    out << "seed\t" << model.seed << '\n';
    out << "inference_passes\t" << model.inference_passes << '\n';
    out << "min_token_length\t" << model.min_token_length << '\n';
    out << "stopwords\t" << (model.use_stopwords ? 1 : 0) << '\n';
    for (const auto& w : model.vocabulary) {
        out << "word\t" << w << '\n';
    }
    for (int k = 0; k < model.topics; ++k) {
        out << "counts";
        for (int v = 0; v < model.vocabulary_size(); ++v) {
            out << '\t' << model.topic_word_counts(k, v);
        }
        out << '\n';
    }
    return out.str();
}

LdaModel load_lda(std::string_view content) {
    const auto lines = split_lines(content);
    if (lines.empty() || lines[0] != "propdetect-lda\t1") {
        throw DataError("not a propdetect LDA model (version 1)");
    }
    std::map<std::string, std::string> header;
    LdaModel model;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        auto f = split(lines[n], '\t');
        if (f.size() < 2) {
            throw DataError("LDA model line " + std::to_string(n + 1) + ": malformed");
        }
        if (f[0] == "word") {
            model.word_ids.emplace(f[1], model.vocabulary_size());
            model.vocabulary.push_back(f[1]);
        } else if (f[0] == "counts") {
            rows.push_back(std::move(f));
        } else {
            header[f[0]] = f[1];
        }
    }
    auto get_int = [&](const std::string& key) {
        long long v = 0;
        if (!header.count(key) || !parse_int(header[key], v)) {
            throw DataError("LDA model: missing or bad '" + key + "'");
        }
        return v;
    };
    auto get_double = [&](const std::string& key) {
        double v = 0;
        if (!header.count(key) || !parse_double(header[key], v)) {
            throw DataError("LDA model: missing or bad '" + key + "'");
        }
        return v;
    };
    model.topics = static_cast<int>(get_int("topics"));
    model.alpha = get_double("alpha");
    model.beta = get_double("beta");
    model.seed = static_cast<std::uint64_t>(std::stoull(header["seed"]));
    model.inference_passes = static_cast<int>(get_int("inference_passes"));
    model.min_token_length = static_cast<int>(get_int("min_token_length"));
    model.use_stopwords = get_int("stopwords") != 0;
    const int V = static_cast<int>(get_int("vocabulary"));
    if (V != model.vocabulary_size() || static_cast<int>(rows.size()) != model.topics) {
        throw DataError("LDA model: inconsistent vocabulary or topic rows");
    }
    model.topic_word_counts = Eigen::MatrixXi::Zero(model.topics, V);
    for (int k = 0; k < model.topics; ++k) {
        if (static_cast<int>(rows[static_cast<std::size_t>(k)].size()) != V + 1) {
            throw DataError("LDA model: count row " + std::to_string(k) + " has wrong width");
        }
        for (int v = 0; v < V; ++v) {
            long long c = 0;
            if (!parse_int(rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(v) + 1], c) || c < 0) {
                throw DataError("LDA model: bad count");
            }
            model.topic_word_counts(k, v) = static_cast<int>(c);
        }
    }
    model.topic_totals = model.topic_word_counts.rowwise().sum();
    return model;
}

}  // namespace propdetect
