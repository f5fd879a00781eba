// propdetect: command line front end for the sentence- and fragment-level
// propaganda detection pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "propdetect/corpus.hpp"
#include "propdetect/crf.hpp"
#include "propdetect/ensemble.hpp"
#include "propdetect/error.hpp"
#include "propdetect/eval.hpp"
#include "propdetect/features.hpp"
#include "propdetect/logreg.hpp"
#include "propdetect/pipeline.hpp"
#include "propdetect/textio.hpp"
#include "propdetect/topics.hpp"

namespace fs = std::filesystem;
using namespace propdetect;

namespace {

// Settings reachable as --flag; the flag name is the key with '_' -> '-'.
const std::vector<std::string> kFlagKeys = {
    "corpus", "slc_labels", "flc_labels", "dev_corpus", "dev_slc_labels", "dev_flc_labels",
    "sentiment_lexicon", "emotion_lexicon", "loaded_lexicon", "sense_lexicon", "embeddings",
    "annotations", "dev_annotations", "manifest", "flc_manifest", "output_dir", "fallback_tagger", "features",
    "slc_models", "flc_configs", "tau_grid", "tau", "ensemble_mode", "relax_fraction", "postprocess",
    "window", "lambda", "slc_folds", "flc_folds", "seed", "l2", "epochs", "learning_rate", "crf_l2",
    "crf_epochs", "crf_learning_rate", "lda_topics", "lda_iterations", "lda_inference_passes"};

std::string flag_name(std::string key) {
    for (auto& ch : key) {
        if (ch == '_') ch = '-';
    }
    return "--" + key;
}

// Options shared by every subcommand: config file, --set and the named flags.
struct Settings {
    std::string config_file;
    std::vector<std::string> overrides;
    std::map<std::string, std::string> flags;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "flat key=value configuration file");
        cmd->add_option("--set", overrides, "extra key=value setting (repeatable)");
        for (const auto& key : kFlagKeys) {
            cmd->add_option(flag_name(key), flags[key], "setting '" + key + "'");
        }
    }

    // Config file first, then --set, then the named flags: flags win.
    PipelineConfig resolve(CLI::App* cmd) const {
        PipelineConfig cfg;
        if (!config_file.empty()) {
            load_config_file(cfg, config_file);
        }
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw UsageError("--set expects key=value, got '" + kv + "'");
            }
            apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        for (const auto& key : kFlagKeys) {
            if (cmd->count(flag_name(key)) > 0) {
                apply_setting(cfg, key, flags.at(key));
            }
        }
        return cfg;
    }
};

void require(const fs::path& p, const std::string& what) {
    if (p.empty()) {
        throw UsageError("missing " + what);
    }
}

void emit(const std::string& out, const std::string& content) {
    if (out.empty() || out == "-") {
        std::cout << content;
    } else {
        write_file(out, content);
    }
}

Resources resources_for(const PipelineConfig& cfg, const FeatureToggles& toggles, std::optional<LdaModel> lda) {
    Resources r;
    r.lexicons = load_lexicons(cfg.sentiment_lexicon, cfg.emotion_lexicon, cfg.loaded_lexicon, cfg.sense_lexicon);
    if (toggles.embedding || cfg.postprocess) {
        require(cfg.embeddings, "embeddings (needed by the embedding block)");
        r.embeddings = load_word_vectors(cfg.embeddings);
    }
    r.lda = std::move(lda);
    return r;
}

int cmd_ingest(const PipelineConfig& cfg) {
    if (!cfg.corpus.empty()) {
        auto docs = load_corpus(cfg.corpus, cfg.annotations, cfg.fallback_tagger);
        std::size_t sentences = 0;
        std::size_t retained = 0;
        for (const auto& d : docs) {
            sentences += d.sentences.size();
            retained += d.retained_sentences().size();
        }
        std::cout << "articles\t" << docs.size() << "\nsentences\t" << sentences << "\nretained\t" << retained
                  << '\n';
        if (!cfg.slc_labels.empty()) {
            std::cout << "slc_labels\t" << load_slc_labels(cfg.slc_labels, docs).size() << '\n';
        }
        if (!cfg.flc_labels.empty()) {
            const auto frags = load_flc_labels(cfg.flc_labels, docs);
            std::cout << "fragments\t" << frags.size() << "\ntechniques\t" << technique_vocabulary(frags).size()
                      << '\n';
        }
    }
    if (!cfg.manifest.empty()) {
        const auto store = ingest_predictions(read_manifest(cfg.manifest));
        std::cout << "columns\t" << store.columns.size() << '\n';
        for (const auto& c : store.columns) {
            std::cout << "column\t" << c.column_id << '\t' << c.predictions.size() << '\n';
        }
    }
    if (cfg.corpus.empty() && cfg.manifest.empty()) {
        throw UsageError("ingest needs --corpus and/or --manifest");
    }
    return kExitOk;
}

int cmd_featurize(const PipelineConfig& cfg, const std::string& out) {
    require(cfg.corpus, "--corpus");
    validate_config(cfg);
    const auto docs = load_corpus(cfg.corpus, cfg.annotations, cfg.fallback_tagger);
    const auto res = load_resources(cfg, docs, cfg.features);
    std::vector<std::string> warnings;
    const auto table = featurize(docs, res, cfg.features, &warnings);
    std::set<std::string> distinct(warnings.begin(), warnings.end());
    for (const auto& w : distinct) {
        std::cerr << "warning: " << w << '\n';
    }
    emit(out, format_feature_table(table));
    return kExitOk;
}

// A sentence model directory holds model.txt, features.txt and, with topical
// features, lda.txt.
int cmd_train_slc(const PipelineConfig& cfg, const std::string& out) {
    require(cfg.corpus, "--corpus");
    require(cfg.slc_labels, "--slc-labels");
    require(out, "--out (model directory)");
    validate_config(cfg);
    const auto docs = load_corpus(cfg.corpus, cfg.annotations, cfg.fallback_tagger);
    const auto labels = load_slc_labels(cfg.slc_labels, docs);
    const auto res = load_resources(cfg, docs, cfg.features);
    const auto model = train_slc_model(cfg, docs, labels, res, cfg.features);
    const fs::path dir = out;
    write_file(dir / "model.txt", save_logreg(model));
    write_file(dir / "features.txt", format_toggles(cfg.features) + "\n");
    if (res.lda) {
        write_file(dir / "lda.txt", save_lda(*res.lda));
    }
    std::cout << "trained logistic regression on " << labels.size() << " sentences -> " << dir.string() << '\n';
    return kExitOk;
}

int cmd_train_flc(const PipelineConfig& cfg, const std::string& out, const std::string& families) {
    require(cfg.corpus, "--corpus");
    require(cfg.flc_labels, "--flc-labels");
    require(out, "--out (model file)");
    validate_config(cfg);
    auto docs = load_corpus(cfg.corpus, cfg.annotations, cfg.fallback_tagger);
    load_flc_labels(cfg.flc_labels, docs);
    const auto model = train_flc_model(cfg, docs, parse_token_families(families), derive_seed(cfg.seed, "crf"));
    write_file(out, save_crf(model));
    std::cout << "trained CRF with " << model.tag_count() << " tags, " << model.features.size() << " features -> "
              << out << '\n';
    return kExitOk;
}

int cmd_predict(const PipelineConfig& cfg, const std::string& task, const std::string& model_path,
                const std::string& model_id, const std::string& out) {
    require(cfg.corpus, "--corpus");
    require(model_path, "--model");
    validate_config(cfg);
    const auto docs = load_corpus(cfg.corpus, cfg.annotations, cfg.fallback_tagger);
    if (task == "flc") {
        const auto model = load_crf(read_file(model_path));
        const auto lex = load_lexicons(cfg.sentiment_lexicon, cfg.emotion_lexicon, cfg.loaded_lexicon,
                                       cfg.sense_lexicon);
        emit(out, format_fragments(predict_fragments(model, docs, lex), model_id));
        return kExitOk;
    }
    const fs::path dir = model_path;
    const auto model = load_logreg(read_file(dir / "model.txt"));
    const auto toggles = parse_toggles(trim(read_file(dir / "features.txt")));
    std::optional<LdaModel> lda;
    if (toggles.topical) {
        lda = load_lda(read_file(dir / "lda.txt"));
    }
    const auto res = resources_for(cfg, toggles, std::move(lda));
    const auto features = featurize(docs, res, toggles);
    std::vector<SentencePrediction> preds;
    for (const auto& [key, v] : features) {
        preds.push_back({key.article_id, key.index, predict_proba(model, v), model_id});
    }
    emit(out, format_sentence_predictions(preds));
    return kExitOk;
}

int cmd_ensemble(const PipelineConfig& cfg, const std::string& task, const std::string& out) {
    // --manifest serves both tasks here; --flc-manifest takes precedence for flc.
    const auto& path = task == "flc" && !cfg.flc_manifest.empty() ? cfg.flc_manifest : cfg.manifest;
    require(path, "--manifest");
    const auto manifest = read_manifest(path);
    if (task == "flc") {
        std::vector<std::vector<Fragment>> lists;
        for (auto& src : ingest_fragment_predictions(manifest)) {
            lists.push_back(std::move(src.fragments));
        }
        emit(out, format_fragments(merge_fragments(lists)));
        return kExitOk;
    }
    const auto store = ingest_predictions(manifest);
    EnsembleConfig ens;
    ens.mode = manifest.mode.value_or(cfg.ensemble_mode);
    ens.relax_fraction = manifest.relax_fraction.value_or(cfg.relax_fraction);
    ens.model_dev_f1 = store.dev_f1;
    const auto matrix = build_prediction_matrix(store.columns);
    emit(out, format_slc_labels(vote_matrix(matrix, ens)));
    return kExitOk;
}

int cmd_postprocess(const PipelineConfig& cfg, const std::string& labels_path, const std::string& out) {
    require(cfg.corpus, "--corpus");
    require(cfg.embeddings, "--embeddings");
    require(labels_path, "--labels");
    validate_config(cfg);
    const auto docs = load_corpus(cfg.corpus, cfg.annotations, false);
    const auto labels = load_slc_labels(labels_path, docs);
    const auto table = load_word_vectors(cfg.embeddings);
    SlcLabels updated;
    for (const auto& doc : docs) {
        for (const auto& [k, v] : repetition_postprocess(doc, table, labels, cfg.window, cfg.lambda)) {
            updated[k] = v;
        }
    }
    emit(out, format_slc_labels(updated));
    return kExitOk;
}

int cmd_evaluate(const std::string& task, const std::string& pred, const std::string& gold, const std::string& out) {
    require(pred, "--pred");
    require(gold, "--gold");
    if (task == "flc") {
        const auto report = flc_strict_scores(read_fragment_file(pred), read_fragment_file(gold));
        std::cout << format_span_table(report, "fragment-level scores");
        if (!out.empty()) write_file(out, format_span_tsv(report));
        return kExitOk;
    }
    const auto score = slc_scores(read_slc_label_file(pred), read_slc_label_file(gold));
    std::cout << format_binary_table(score, "sentence-level scores");
    if (!out.empty()) write_file(out, format_binary_tsv(score));
    return kExitOk;
}

int cmd_run_slc(const PipelineConfig& cfg) {
    const auto r = run_slc(cfg);
    std::cout << read_file(fs::path(cfg.output_dir) / "report.txt");
    (void)r;
    return kExitOk;
}

int cmd_run_flc(const PipelineConfig& cfg) {
    const auto r = run_flc(cfg);
    std::cout << read_file(fs::path(cfg.output_dir) / "report.txt");
    (void)r;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"propdetect: sentence- and fragment-level propaganda detection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "propdetect 1.0");

    std::map<std::string, Settings> settings;
    std::string out;
    std::string task = "slc";
    std::string model_path;
    std::string model_id;
    std::string families = "all";
    std::string labels_path;
    std::string pred;
    std::string gold;

    auto add = [&](const std::string& name, const std::string& help) {
        auto* cmd = app.add_subcommand(name, help);
        settings[name].attach(cmd);
        return cmd;
    };
    auto task_opt = [&](CLI::App* cmd) {
        cmd->add_option("--task", task, "slc or flc")->check(CLI::IsMember({"slc", "flc"}));
    };

    auto* ingest = add("ingest", "validate a corpus, its labels and/or a prediction manifest");
    auto* featurize_cmd = add("featurize", "write the sentence feature table");
    featurize_cmd->add_option("-o,--out", out, "output TSV (default stdout)");
    auto* train_slc = add("train-slc", "train the sentence classifier on a whole corpus");
    train_slc->add_option("-o,--out", out, "model directory")->required();
    auto* train_flc = add("train-flc", "train the fragment tagger on a whole corpus");
    train_flc->add_option("-o,--out", out, "model file")->required();
    train_flc->add_option("--families", families, "token feature families, e.g. all or word,shape,punct");
    auto* predict = add("predict", "apply a trained model to a corpus");
    task_opt(predict);
    predict->add_option("--model", model_path, "model directory (slc) or model file (flc)")->required();
    predict->add_option("--model-id", model_id, "model id written into the predictions");
    predict->add_option("-o,--out", out, "output TSV (default stdout)");
    auto* ensemble = add("ensemble", "vote (slc) or merge (flc) the predictions listed in a manifest");
    task_opt(ensemble);
    ensemble->add_option("-o,--out", out, "output TSV (default stdout)");
    auto* postprocess = add("postprocess", "repetition postprocess over sentence labels");
    postprocess->add_option("--labels", labels_path, "sentence label TSV")->required();
    postprocess->add_option("-o,--out", out, "output TSV (default stdout)");
    auto* evaluate = add("evaluate", "score predictions against gold labels");
    task_opt(evaluate);
    evaluate->add_option("--pred", pred, "predicted labels or fragments")->required();
    evaluate->add_option("--gold", gold, "gold labels or fragments")->required();
    evaluate->add_option("-o,--out", out, "machine-readable report TSV");
    auto* run_slc_cmd = add("run-slc", "sentence-level fold experiment with ensemble+");
    auto* run_flc_cmd = add("run-flc", "fragment-level fold experiment with span merging");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        for (auto* cmd : app.get_subcommands()) {
            const auto name = cmd->get_name();
            const auto cfg = settings.at(name).resolve(cmd);
            if (model_id.empty()) {
                model_id = task == "flc" ? "crf" : "logreg";
            }
            if (cmd == ingest) return cmd_ingest(cfg);
            if (cmd == featurize_cmd) return cmd_featurize(cfg, out);
            if (cmd == train_slc) return cmd_train_slc(cfg, out);
            if (cmd == train_flc) return cmd_train_flc(cfg, out, families);
            if (cmd == predict) return cmd_predict(cfg, task, model_path, model_id, out);
            if (cmd == ensemble) return cmd_ensemble(cfg, task, out);
            if (cmd == postprocess) return cmd_postprocess(cfg, labels_path, out);
            if (cmd == evaluate) return cmd_evaluate(task, pred, gold, out);
            if (cmd == run_slc_cmd) return cmd_run_slc(cfg);
            if (cmd == run_flc_cmd) return cmd_run_flc(cfg);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const InvariantError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}
