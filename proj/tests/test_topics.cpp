#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "propdetect/error.hpp"
#include "propdetect/random.hpp"
#include "propdetect/topics.hpp"

using namespace propdetect;

namespace {

LdaOptions raw_options(int topics, int iterations, std::uint64_t seed) {
    LdaOptions o;
    o.topics = topics;
    o.iterations = iterations;
    o.seed = seed;
    o.min_token_length = 1;
    o.min_count = 1;
    o.use_stopwords = false;
    return o;
}

// Documents alternate between two disjoint vocabularies.
std::vector<std::vector<std::string>> disjoint_corpus(int docs, int length, std::uint64_t seed) {
    const std::vector<std::string> a = {"apple", "banana", "cherry", "grape", "lemon", "mango"};
    const std::vector<std::string> b = {"engine", "piston", "gearbox", "clutch", "brake", "axle"};
    Rng rng(seed);
    std::vector<std::vector<std::string>> out;
    for (int d = 0; d < docs; ++d) {
        const auto& vocab = d % 2 == 0 ? a : b;
        std::vector<std::string> doc;
        for (int i = 0; i < length; ++i) doc.push_back(vocab[uniform_index(rng, vocab.size())]);
        out.push_back(std::move(doc));
    }
    return out;
}

}  // namespace

TEST_CASE("disjoint vocabularies separate") {
    const std::vector<std::vector<std::string>> docs = {{"a", "b", "c", "a", "b", "c"}, {"x", "y", "z", "x", "y", "z"}};
    const auto m = fit_lda(docs, raw_options(2, 200, 4));
    CHECK(dominant_topic(infer_doc_topics(m, docs[0])) != dominant_topic(infer_doc_topics(m, docs[1])));
    const auto phi = m.topic_word_distribution();
    for (int k = 0; k < 2; ++k) CHECK(std::abs(phi.row(k).sum() - 1.0) < 1e-9);
}

TEST_CASE("single repeated token still normalizes") {
    const auto m = fit_lda(std::vector<std::vector<std::string>>{{"same", "same", "same"}}, raw_options(2, 10, 1));
    const auto p = infer_doc_topics(m, {"same"});
    CHECK(std::abs(p.sum() - 1.0) < 1e-9);
}

TEST_CASE("determinism and count conservation") {
    const auto docs = disjoint_corpus(10, 12, 3);
    auto opts = raw_options(3, 30, 77);
    long long total = 0;
    for (const auto& d : docs) total += static_cast<long long>(d.size());
    int sweeps = 0;
    opts.on_sweep = [&](int, const Eigen::MatrixXi& counts) {
        ++sweeps;
        REQUIRE(counts.sum() == total);
        REQUIRE((counts.array() >= 0).all());
    };
    const auto m1 = fit_lda(docs, opts);
    CHECK(sweeps == 30);
    opts.on_sweep = nullptr;
    const auto m2 = fit_lda(docs, opts);
    CHECK(m1.topic_word_counts == m2.topic_word_counts);
    CHECK(m1.topic_totals == m1.topic_word_counts.rowwise().sum());
    CHECK(infer_doc_topics(m1, docs[0]) == infer_doc_topics(m2, docs[0]));
}

TEST_CASE("inference conventions") {
    const auto docs = disjoint_corpus(8, 10, 9);
    const auto m = fit_lda(docs, raw_options(4, 50, 2));
    const auto uniform = infer_doc_topics(m, {"unknown", "words"});
    CHECK(uniform == Eigen::Vector4d::Constant(0.25));
    Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        std::vector<std::string> toks;
        for (int k = 0; k < 5; ++k) toks.push_back(docs[uniform_index(rng, docs.size())][0]);
        const auto p = infer_doc_topics(m, toks);
        CHECK(std::abs(p.sum() - 1.0) < 1e-9);
        CHECK((p.array() >= 0).all());
    }
}

TEST_CASE("dominant_topic ties go low") {
    CHECK(dominant_topic(Eigen::Vector2d(0.7, 0.3)) == 0);
    CHECK(dominant_topic(Eigen::Vector2d(0.5, 0.5)) == 0);
    CHECK(dominant_topic(Eigen::Vector3d(0.1, 0.2, 0.7)) == 2);
}

TEST_CASE("topic-0 vocabulary infers topic of its training documents") {
    const auto docs = disjoint_corpus(20, 20, 5);
    const auto m = fit_lda(docs, raw_options(2, 100, 6));
    const int t0 = dominant_topic(infer_doc_topics(m, docs[0]));
    CHECK(dominant_topic(infer_doc_topics(m, {"apple", "mango", "lemon"})) == t0);
    CHECK(dominant_topic(infer_doc_topics(m, {"engine", "axle", "brake"})) != t0);
}

TEST_CASE("preprocessing defaults") {
    CHECK(lda_preprocess({"The", "Quick", "of", "ox", "!", "Running"}, 3, true) ==
          std::vector<std::string>{"quick", "running"});
    LdaOptions o;
    o.topics = 2;
    o.iterations = 1;
    CHECK_THROWS_AS(fit_lda(std::vector<std::vector<std::string>>{{"the", "of", "ok"}}, o), DataError);
    o.topics = 1;
    CHECK_THROWS_AS(fit_lda(std::vector<std::vector<std::string>>{{"alpha", "alpha"}}, o), UsageError);
}

TEST_CASE("topical features") {
    DocumentTopics t;
    t.document_topic = 1;
    t.sentence_topics = {{1, 1}, {2, 1}, {4, 0}};
    auto doc = make_document("d", "one two\nthree four\nx\nfive six");
    auto f = [&](int idx) { return topical_features(*doc.sentence(idx), t).values; };
    CHECK(f(1) == Eigen::Vector3d(1, 1, 0));  // first retained: no previous
    CHECK(f(2) == Eigen::Vector3d(1, 0, 1));
    CHECK(f(4) == Eigen::Vector3d(0, 0, 0));  // last retained: no next

    // Relabeling topics consistently leaves the features unchanged.
    DocumentTopics swapped = t;
    swapped.document_topic = 0;
    for (auto& [idx, k] : swapped.sentence_topics) k = 1 - k;
    for (int idx : {1, 2, 4}) CHECK(topical_features(*doc.sentence(idx), swapped).values == f(idx));

    DocumentTopics one;
    one.document_topic = 2;
    one.sentence_topics = {{1, 2}};
    auto single = make_document("s", "only sentence");
    CHECK(topical_features(single.sentences[0], one).values == Eigen::Vector3d(1, 0, 0));
}

TEST_CASE("save/load round trip") {
    const auto m = fit_lda(disjoint_corpus(6, 8, 1), raw_options(3, 20, 3));
    const auto text = save_lda(m);
    const auto back = load_lda(text);
    CHECK(save_lda(back) == text);
    CHECK(back.topic_word_counts == m.topic_word_counts);
    const std::vector<std::string> probe = {"apple", "engine", "apple"};
    CHECK(infer_doc_topics(back, probe) == infer_doc_topics(m, probe));
    CHECK_THROWS_AS(load_lda("garbage\n"), DataError);
}
