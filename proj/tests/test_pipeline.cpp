#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "propdetect/error.hpp"
#include "propdetect/pipeline.hpp"
#include "propdetect/textio.hpp"
#include "synthetic.hpp"

using namespace propdetect;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

template <typename F>
std::string error_of(F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

PipelineConfig small_experiment(const TempDir& dir, int externals) {
    testsupport::SyntheticOptions o;
    o.articles = 10;
    o.sentences = 10;
    const auto conf = testsupport::write_experiment(dir.path(), o, 2, 2, externals);
    PipelineConfig c;
    load_config_file(c, conf);
    apply_setting(c, "output_dir", (dir / "out").string());
    apply_setting(c, "lda_iterations", "30");
    apply_setting(c, "crf_epochs", "20");
    apply_setting(c, "epochs", "100");
    return c;
}

}  // namespace

TEST_CASE("settings parse and validate") {
    PipelineConfig c;
    apply_setting(c, " window ", " 4 ");
    apply_setting(c, "lambda", "0.95");
    apply_setting(c, "ensemble_mode", "majority");
    apply_setting(c, "tau_grid", "0.5,0.3");
    apply_setting(c, "seed", "18446744073709551615");
    apply_setting(c, "corpus", "data", "/base");
    CHECK(c.window == 4);
    CHECK(c.lambda == 0.95);
    CHECK(c.ensemble_mode == VoteMode::majority);
    CHECK(c.tau_grid == std::vector<double>{0.5, 0.3});
    CHECK(c.seed == 18446744073709551615ull);
    CHECK(c.corpus == fs::path("/base/data"));
    apply_setting(c, "tau", "0.4");
    CHECK(c.tau_grid == std::vector<double>{0.4});

    CHECK_THROWS_AS(apply_setting(c, "bogus", "1"), UsageError);
    CHECK_THROWS_AS(apply_setting(c, "window", "ten"), UsageError);
    CHECK_THROWS_AS(apply_setting(c, "tau", "1.5"), UsageError);
    CHECK_THROWS_AS(apply_setting(c, "ensemble_mode", "unanimous"), UsageError);
    CHECK_THROWS_AS(apply_setting(c, "flc_configs", "all;nonsense"), UsageError);

    PipelineConfig v;
    v.slc_folds = 1;
    CHECK_THROWS_AS(validate_config(v), UsageError);
    v.slc_folds = 5;
    v.corpus = "/definitely/not/here";
    CHECK(error_of([&] { validate_config(v); }).find("corpus") != std::string::npos);
}

TEST_CASE("config files") {
    TempDir dir("pipecfg");
    write_file(dir / "a.conf", "# comment\n\nwindow=7\nlambda = 0.9\ncorpus=texts\n");
    PipelineConfig c;
    load_config_file(c, dir / "a.conf");
    CHECK(c.window == 7);
    CHECK(c.lambda == 0.9);
    CHECK(c.corpus == dir / "texts");

    // Later settings win, which is how command-line flags override the file.
    apply_setting(c, "window", "3");
    CHECK(c.window == 3);

    write_file(dir / "b.conf", "window=2\nnot a setting\n");
    CHECK(error_of([&] { load_config_file(c, dir / "b.conf"); }).find("b.conf:2") != std::string::npos);
    write_file(dir / "c.conf", "window=2\nwindow=x\n");
    CHECK(error_of([&] { load_config_file(c, dir / "c.conf"); }).find("c.conf:2") != std::string::npos);

    apply_setting(c, "output_dir", (dir / "out").string());
    // format_config is a complete record: reparsing it reproduces itself.
    const auto text = format_config(c);
    write_file(dir / "round.conf", text);
    PipelineConfig d;
    load_config_file(d, dir / "round.conf");
    CHECK(format_config(d) == text);
}

TEST_CASE("manifests and ingestion") {
    TempDir dir("manifest");
    write_file(dir / "m1.tsv", "1\t1\t0.9\tm1\n1\t2\t0.2\tm1\n");
    write_file(dir / "m2.tsv", "1\t1\t0.3\tm2\n1\t2\t0.6\tm2\n");
    write_file(dir / "manifest.txt",
               "# two models\nmode=majority\nrelax_fraction=0.2\ntau=0.4\n"
               "model\tm1\t1\tm1.tsv\t0.7\n"
               "model\tm2\t-\tm2.tsv\t0.6\t0.55\n");
    const auto m = read_manifest(dir / "manifest.txt");
    CHECK(m.mode == VoteMode::majority);
    CHECK(m.relax_fraction == 0.2);
    CHECK(m.tau == 0.4);
    REQUIRE(m.entries.size() == 2);
    CHECK(m.entries[0].column_id() == "fold1/m1");
    CHECK(m.entries[1].column_id() == "m2");
    CHECK(m.entries[1].tau == 0.55);

    const auto store = ingest_predictions(m);
    REQUIRE(store.columns.size() == 2);
    CHECK(store.columns[0].tau == 0.4);
    CHECK(store.columns[1].tau == 0.55);
    CHECK(store.dev_f1.at("fold1/m1") == 0.7);

    auto manifest_error = [&](const std::string& body) {
        write_file(dir / "bad.txt", body);
        return error_of([&] { ingest_predictions(read_manifest(dir / "bad.txt")); });
    };
    CHECK(manifest_error("tau=0.5\nmodel\tm1\t0\tm1.tsv\t0.7\n").find("bad.txt:2") != std::string::npos);
    CHECK(manifest_error("model\tm1\t1\tm1.tsv\t1.7\n").find("bad.txt:1") != std::string::npos);
    CHECK(manifest_error("speed=3\n").find("bad.txt:1") != std::string::npos);
    CHECK(manifest_error("model\tm1\t1\tm1.tsv\t0.7\nmodel\tm1\t1\tm1.tsv\t0.7\n").find("duplicate") !=
          std::string::npos);
    CHECK(manifest_error("model\tother\t1\tm1.tsv\t0.7\n").find("m1.tsv") != std::string::npos);

    write_file(dir / "m3.tsv", "1\t1\t0.3\tm3\n");
    CHECK(manifest_error("model\tm1\t1\tm1.tsv\t0.7\nmodel\tm3\t1\tm3.tsv\t0.7\n").find("coverage gap") !=
          std::string::npos);
    const std::vector<SentenceKey> targets = {{"1", 1}, {"1", 2}, {"1", 3}};
    CHECK_THROWS_AS(ingest_predictions(m, &targets), DataError);
}

TEST_CASE("small SLC run") {
    TempDir dir("pipeslc");
    auto c = small_experiment(dir, 1);
    const auto r = run_slc(c);
    CHECK(r.folds.size() == 2);
    CHECK(r.matrix.columns.size() == 4);  // 2 folds x (1 native + 1 external)
    CHECK(r.matrix.columns[0].rfind("fold1/", 0) == 0);
    const auto out = dir / "out";
    for (const auto* name : {"config.txt", "folds.tsv", "ensemble_matrix.tsv", "labels.tsv", "report.tsv", "report.txt"}) {
        CHECK(fs::exists(out / name));
    }
    CHECK(read_file(out / "report.tsv").rfind("columns\t-\t4\n", 0) == 0);

    // Every retained sentence is held out exactly once.
    const auto docs = load_corpus(c.corpus, {}, true);
    const auto keys = retained_keys(docs);
    CHECK(r.labels.size() == keys.size());
    std::set<std::string> ids;
    for (int k = 0; k < r.plan.k; ++k)
        for (const auto& id : r.plan.test_ids(k)) CHECK(ids.insert(id).second);
    CHECK(ids.size() == docs.size());
}

TEST_CASE("small FLC run") {
    TempDir dir("pipeflc");
    auto c = small_experiment(dir, 0);
    const auto r = run_flc(c);
    CHECK(r.source_ids.size() == 4);  // 2 folds x 2 configs
    CHECK(r.internal_per_config.size() == 2);
    CHECK(fs::exists(dir / "out" / "merged.tsv"));
    CHECK(read_file(dir / "out" / "report.tsv").rfind("sources\t-\t4\n", 0) == 0);
    // Merged output never holds same-label overlaps.
    for (std::size_t i = 0; i < r.merged.size(); ++i)
        for (std::size_t j = i + 1; j < r.merged.size(); ++j) {
            const auto& a = r.merged[i];
            const auto& b = r.merged[j];
            CHECK_FALSE((a.article_id == b.article_id && a.technique == b.technique && a.start < b.end &&
                         b.start < a.end));
        }
}

TEST_CASE("missing inputs are rejected") {
    TempDir dir("pipemissing");
    PipelineConfig c;
    c.corpus = dir / "nothing";
    c.output_dir = dir / "out";
    CHECK_THROWS(run_slc(c));
}
