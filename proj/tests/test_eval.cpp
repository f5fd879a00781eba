#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "propdetect/error.hpp"
#include "propdetect/eval.hpp"
#include "propdetect/random.hpp"

using namespace propdetect;

namespace {

SlcLabels labels(const std::vector<int>& bits) {
    SlcLabels out;
    for (std::size_t i = 0; i < bits.size(); ++i) out[{"1", static_cast<int>(i) + 1}] = bits[i] != 0;
    return out;
}

// Hand-computed cases: predicted, gold, tp, fp, fn, precision, recall, f1.
struct SlcCase {
    std::vector<int> pred, gold;
    long long tp, fp, fn;
    double p, r, f1;
};

// Maximum one-to-one matching by exhaustive search over assignments.
long long brute_matches(const std::vector<Fragment>& pred, const std::vector<Fragment>& gold, std::size_t i,
                        std::vector<bool>& used) {
    if (i == pred.size()) return 0;
    long long best = brute_matches(pred, gold, i + 1, used);
    for (std::size_t g = 0; g < gold.size(); ++g) {
        if (!used[g] && gold[g] == pred[i]) {
            used[g] = true;
            best = std::max(best, 1 + brute_matches(pred, gold, i + 1, used));
            used[g] = false;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("slc golden cases") {
    const std::vector<SlcCase> cases = {
        {{1, 1, 0, 0}, {1, 0, 1, 0}, 1, 1, 1, 0.5, 0.5, 0.5},
        {{1, 1, 1, 1}, {1, 0, 0, 0}, 1, 3, 0, 0.25, 1.0, 0.4},
        {{0, 0, 0, 0}, {1, 1, 0, 0}, 0, 0, 2, 0.0, 0.0, 0.0},
        {{0, 0, 0}, {0, 0, 0}, 0, 0, 0, 0.0, 0.0, 0.0},
        {{1, 0, 0}, {0, 0, 0}, 0, 1, 0, 0.0, 0.0, 0.0},
        {{1, 1, 1}, {1, 1, 1}, 3, 0, 0, 1.0, 1.0, 1.0},
        {{1, 0, 1, 0, 1}, {1, 1, 1, 1, 0}, 2, 1, 2, 2.0 / 3, 0.5, 4.0 / 7},
        {{1, 1, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1}, 2, 0, 4, 1.0, 1.0 / 3, 0.5},
        {{0, 1}, {1, 0}, 0, 1, 1, 0.0, 0.0, 0.0},
        {{1, 1, 1, 0, 0, 0, 0, 0, 0, 0}, {1, 0, 0, 1, 0, 0, 0, 0, 0, 0}, 1, 2, 1, 1.0 / 3, 0.5, 0.4},
    };
    for (const auto& c : cases) {
        const auto s = slc_scores(labels(c.pred), labels(c.gold));
        CHECK(s.tp == c.tp);
        CHECK(s.fp == c.fp);
        CHECK(s.fn == c.fn);
        CHECK(s.precision == doctest::Approx(c.p));
        CHECK(s.recall == doctest::Approx(c.r));
        CHECK(s.f1 == doctest::Approx(c.f1));
    }
}

TEST_CASE("slc coverage rules") {
    auto pred = labels({1, 0});
    pred[{"2", 1}] = true;  // outside gold: ignored
    CHECK(slc_scores(pred, labels({1, 0})).fp == 0);
    CHECK_THROWS_AS(slc_scores(labels({1}), labels({1, 0})), DataError);
}

TEST_CASE("pooled scores differ from the fold mean") {
    const auto a = BinaryScore::from_counts(1, 0, 0);   // F1 1.0
    const auto b = BinaryScore::from_counts(0, 9, 9);   // F1 0.0
    const auto r = score_folds({a, b});
    CHECK(r.folds.size() == 2);
    CHECK(r.pooled.tp == 1);
    CHECK(r.pooled.fp == 9);
    CHECK(r.pooled.fn == 9);
    CHECK(r.pooled.f1 == doctest::Approx(0.1));  // the mean would be 0.5
    CHECK_THROWS_AS(score_folds({}), UsageError);
}

TEST_CASE("flc strict examples") {
    const std::vector<Fragment> gold = {{"1", 0, 5, "X"}, {"1", 10, 20, "Y"}, {"2", 3, 8, "X"}};
    SUBCASE("perfect") {
        const auto r = flc_strict_scores(gold, gold);
        CHECK(r.macro_f1 == 1.0);
        CHECK(r.micro.f1 == 1.0);
    }
    SUBCASE("off by one is a miss") {
        const auto r = flc_strict_scores({{"1", 0, 6, "X"}, {"1", 10, 20, "Y"}, {"2", 3, 8, "X"}}, gold);
        CHECK(r.per_technique.at("X").tp == 1);
        CHECK(r.per_technique.at("X").fp == 1);
        CHECK(r.per_technique.at("X").fn == 1);
        CHECK(r.per_technique.at("Y").f1 == 1.0);
        CHECK(r.macro_f1 == doctest::Approx(0.75));
    }
    SUBCASE("wrong label counts against both techniques") {
        const auto r = flc_strict_scores({{"1", 0, 5, "Y"}}, {{"1", 0, 5, "X"}});
        CHECK(r.per_technique.at("X").fn == 1);
        CHECK(r.per_technique.at("Y").fp == 1);
        CHECK(r.macro_f1 == 0.0);
    }
    SUBCASE("predicted-only technique joins the macro average") {
        const auto r = flc_strict_scores({{"1", 0, 5, "X"}, {"1", 30, 35, "Z"}}, {{"1", 0, 5, "X"}});
        CHECK(r.per_technique.size() == 2);
        CHECK(r.macro_f1 == doctest::Approx(0.5));
        CHECK(r.micro.precision == doctest::Approx(0.5));
    }
    SUBCASE("duplicates match one-to-one") {
        const auto r = flc_strict_scores({{"1", 0, 5, "X"}, {"1", 0, 5, "X"}}, {{"1", 0, 5, "X"}});
        CHECK(r.micro.tp == 1);
        CHECK(r.micro.fp == 1);
        const auto r2 = flc_strict_scores({{"1", 0, 5, "X"}}, {{"1", 0, 5, "X"}, {"1", 0, 5, "X"}});
        CHECK(r2.micro.fn == 1);
    }
    SUBCASE("empty inputs") {
        const auto r = flc_strict_scores({}, {});
        CHECK(r.macro_f1 == 0.0);
        CHECK(r.micro.f1 == 0.0);
        CHECK(flc_strict_scores({}, gold).micro.fn == 3);
    }
}

TEST_CASE("flc matching agrees with brute force") {
    Rng rng(6);
    const std::vector<std::string> techs = {"X", "Y"};
    auto random_frag = [&] {
        const auto s = uniform_index(rng, 4);
        return Fragment{uniform01(rng) < 0.7 ? "1" : "2", s, s + 1 + uniform_index(rng, 2), techs[uniform_index(rng, 2)]};
    };
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<Fragment> pred, gold;
        for (std::uint64_t i = 0, n = uniform_index(rng, 7); i < n; ++i) pred.push_back(random_frag());
        for (std::uint64_t i = 0, n = uniform_index(rng, 7); i < n; ++i) gold.push_back(random_frag());
        const auto r = flc_strict_scores(pred, gold);
        std::set<std::string> seen;
        double f1_sum = 0.0;
        for (const auto& t : techs) {
            std::vector<Fragment> p, g;
            for (const auto& f : pred) if (f.technique == t) p.push_back(f);
            for (const auto& f : gold) if (f.technique == t) g.push_back(f);
            if (p.empty() && g.empty()) {
                CHECK(r.per_technique.count(t) == 0);
                continue;
            }
            seen.insert(t);
            std::vector<bool> used(g.size(), false);
            const long long tp = brute_matches(p, g, 0, used);
            const auto expected = BinaryScore::from_counts(tp, static_cast<long long>(p.size()) - tp,
                                                           static_cast<long long>(g.size()) - tp);
            const auto& got = r.per_technique.at(t);
            CHECK(got.tp == expected.tp);
            CHECK(got.fp == expected.fp);
            CHECK(got.fn == expected.fn);
            f1_sum += expected.f1;
        }
        CHECK(r.macro_f1 == doctest::Approx(seen.empty() ? 0.0 : f1_sum / static_cast<double>(seen.size())));
        // Shuffling the prediction order never changes the counts.
        auto shuffled = pred;
        std::reverse(shuffled.begin(), shuffled.end());
        CHECK(flc_strict_scores(shuffled, gold).micro.tp == r.micro.tp);
    }
}

TEST_CASE("span folds pool per technique") {
    const auto f1 = flc_strict_scores({{"1", 0, 5, "X"}}, {{"1", 0, 5, "X"}});
    const auto f2 = flc_strict_scores({{"2", 0, 5, "X"}, {"2", 9, 12, "Y"}}, {{"2", 0, 4, "X"}});
    const auto r = score_span_folds({f1, f2});
    CHECK(r.pooled.per_technique.at("X").tp == 1);
    CHECK(r.pooled.per_technique.at("X").fp == 1);
    CHECK(r.pooled.per_technique.at("X").fn == 1);
    CHECK(r.pooled.per_technique.at("Y").fp == 1);
    CHECK(r.pooled.macro_f1 == doctest::Approx(0.25));
    CHECK_THROWS_AS(score_span_folds({}), UsageError);
}

TEST_CASE("report formats") {
    const auto s = BinaryScore::from_counts(1, 1, 0);
    CHECK(format_binary_tsv(s, "x/") ==
          "x/tp\t-\t1\nx/fp\t-\t1\nx/fn\t-\t0\nx/precision\t-\t0.5\nx/recall\t-\t1\nx/f1\t-\t0.6666666666666666\n");
    const auto table = format_binary_table(s, "SLC");
    CHECK(table.find("F1 0.6667") != std::string::npos);
    const auto r = flc_strict_scores({{"1", 0, 5, "Slogans"}}, {{"1", 0, 5, "Slogans"}});
    CHECK(format_span_tsv(r).find("strict_f1\tSlogans\t1\n") != std::string::npos);
    CHECK(format_span_table(r, "FLC").find("Slogans") != std::string::npos);
}
