#include "propdetect/pipeline.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "propdetect/error.hpp"
#include "propdetect/textio.hpp"

namespace propdetect {

namespace {

namespace fs = std::filesystem;

bool parse_bool(const std::string& v) {
    const auto l = to_lower(v);
    if (l == "1" || l == "true" || l == "yes" || l == "on") return true;
    if (l == "0" || l == "false" || l == "no" || l == "off") return false;
    throw UsageError("expected a boolean, got '" + v + "'");
}

int to_int(const std::string& key, const std::string& v) {
    long long x = 0;
    if (!parse_int(trim(v), x)) {
        throw UsageError(key + ": expected an integer, got '" + v + "'");
    }
    return static_cast<int>(x);
}

double to_real(const std::string& key, const std::string& v) {
    double x = 0;
    if (!parse_double(trim(v), x)) {
        throw UsageError(key + ": expected a number, got '" + v + "'");
    }
    return x;
}

std::vector<std::string> split_list(const std::string& v, char sep) {
    std::vector<std::string> out;
    for (const auto& part : split(v, sep)) {
        auto t = trim(part);
        if (!t.empty()) {
            out.push_back(std::move(t));
        }
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        out += (i ? sep : "") + parts[i];
    }
    return out;
}

FeatureToggles union_toggles(const std::vector<FeatureToggles>& all) {
    FeatureToggles u{false, false, false, false};
    for (const auto& t : all) {
        u.embedding |= t.embedding;
        u.linguistic |= t.linguistic;
        u.layout |= t.layout;
        u.topical |= t.topical;
    }
    return u;
}

// Rethrows data errors with the stage that raised them.
template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const DataError& e) {
        throw DataError(stage + ": " + e.what());
    }
}

std::string fold_dir(int fold) { return "fold" + std::to_string(fold); }

std::string native_model_id(const std::string& base, std::size_t index, std::size_t count) {
    return count == 1 ? base : base + std::to_string(index + 1);
}

}  // namespace

void apply_setting(PipelineConfig& c, const std::string& raw_key, const std::string& raw_value,
                   const fs::path& base_dir) {
    const auto key = trim(raw_key);
    const auto value = trim(raw_value);
    auto path = [&](fs::path& target) {
        fs::path p(value);
        target = (!base_dir.empty() && !p.empty() && p.is_relative()) ? base_dir / p : p;
    };
    static const std::map<std::string, std::function<void(PipelineConfig&, const std::string&,
                                                           const std::function<void(fs::path&)>&)>>
        setters = {
            {"corpus", [](auto& c, auto&, auto& p) { p(c.corpus); }},
            {"slc_labels", [](auto& c, auto&, auto& p) { p(c.slc_labels); }},
            {"flc_labels", [](auto& c, auto&, auto& p) { p(c.flc_labels); }},
            {"dev_corpus", [](auto& c, auto&, auto& p) { p(c.dev_corpus); }},
            {"dev_slc_labels", [](auto& c, auto&, auto& p) { p(c.dev_slc_labels); }},
            {"dev_flc_labels", [](auto& c, auto&, auto& p) { p(c.dev_flc_labels); }},
            {"sentiment_lexicon", [](auto& c, auto&, auto& p) { p(c.sentiment_lexicon); }},
            {"emotion_lexicon", [](auto& c, auto&, auto& p) { p(c.emotion_lexicon); }},
            {"loaded_lexicon", [](auto& c, auto&, auto& p) { p(c.loaded_lexicon); }},
            {"sense_lexicon", [](auto& c, auto&, auto& p) { p(c.sense_lexicon); }},
            {"embeddings", [](auto& c, auto&, auto& p) { p(c.embeddings); }},
            {"annotations", [](auto& c, auto&, auto& p) { p(c.annotations); }},
            {"dev_annotations", [](auto& c, auto&, auto& p) { p(c.dev_annotations); }},
            {"manifest", [](auto& c, auto&, auto& p) { p(c.manifest); }},
            {"flc_manifest", [](auto& c, auto&, auto& p) { p(c.flc_manifest); }},
            {"output_dir", [](auto& c, auto&, auto& p) { p(c.output_dir); }},
            {"fallback_tagger", [](auto& c, auto& v, auto&) { c.fallback_tagger = parse_bool(v); }},
            {"features", [](auto& c, auto& v, auto&) { c.features = parse_toggles(v); }},
            {"slc_models",
             [](auto& c, auto& v, auto&) {
                 c.slc_models = split_list(v, ';');
                 for (const auto& m : c.slc_models) parse_toggles(m);
             }},
            {"flc_configs",
             [](auto& c, auto& v, auto&) {
                 c.flc_configs = split_list(v, ';');
                 for (const auto& m : c.flc_configs) parse_token_families(m);
             }},
            {"tau_grid",
             [](auto& c, auto& v, auto&) {
                 c.tau_grid.clear();
                 for (const auto& t : split_list(v, ',')) c.tau_grid.push_back(DecisionRule(to_real("tau_grid", t)).tau);
             }},
            {"tau", [](auto& c, auto& v, auto&) { c.tau_grid = {DecisionRule(to_real("tau", v)).tau}; }},
            {"ensemble_mode", [](auto& c, auto& v, auto&) { c.ensemble_mode = parse_vote_mode(v); }},
            {"relax_fraction", [](auto& c, auto& v, auto&) { c.relax_fraction = to_real("relax_fraction", v); }},
            {"postprocess", [](auto& c, auto& v, auto&) { c.postprocess = parse_bool(v); }},
            {"window", [](auto& c, auto& v, auto&) { c.window = to_int("window", v); }},
            {"lambda", [](auto& c, auto& v, auto&) { c.lambda = to_real("lambda", v); }},
            {"slc_folds", [](auto& c, auto& v, auto&) { c.slc_folds = to_int("slc_folds", v); }},
            {"flc_folds", [](auto& c, auto& v, auto&) { c.flc_folds = to_int("flc_folds", v); }},
            {"seed",
             [](auto& c, auto& v, auto&) {
                 try {
                     c.seed = std::stoull(v);
                 } catch (const std::exception&) {
                     throw UsageError("seed: expected a non-negative integer, got '" + v + "'");
                 }
             }},
            {"l2", [](auto& c, auto& v, auto&) { c.l2 = to_real("l2", v); }},
            {"epochs", [](auto& c, auto& v, auto&) { c.epochs = to_int("epochs", v); }},
            {"learning_rate", [](auto& c, auto& v, auto&) { c.learning_rate = to_real("learning_rate", v); }},
            {"crf_l2", [](auto& c, auto& v, auto&) { c.crf_l2 = to_real("crf_l2", v); }},
            {"crf_epochs", [](auto& c, auto& v, auto&) { c.crf_epochs = to_int("crf_epochs", v); }},
            {"crf_learning_rate",
             [](auto& c, auto& v, auto&) { c.crf_learning_rate = to_real("crf_learning_rate", v); }},
            {"lda_topics", [](auto& c, auto& v, auto&) { c.lda_topics = to_int("lda_topics", v); }},
            {"lda_iterations", [](auto& c, auto& v, auto&) { c.lda_iterations = to_int("lda_iterations", v); }},
            {"lda_inference_passes",
             [](auto& c, auto& v, auto&) { c.lda_inference_passes = to_int("lda_inference_passes", v); }},
        };
    auto it = setters.find(key);
    if (it == setters.end()) {
        throw UsageError("unknown setting '" + key + "'");
    }
    it->second(c, value, path);
}

void load_config_file(PipelineConfig& config, const fs::path& path) {
    const auto lines = split_lines(read_file(path));
    const auto base = path.parent_path();
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const auto line = trim(lines[n]);
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path.string() + ":" + std::to_string(n + 1) + ": expected key=value");
        }
        try {
            apply_setting(config, line.substr(0, eq), line.substr(eq + 1), base.empty() ? fs::path(".") : base);
        } catch (const UsageError& e) {
            throw UsageError(path.string() + ":" + std::to_string(n + 1) + ": " + e.what());
        }
    }
}

std::string format_config(const PipelineConfig& c) {
    std::map<std::string, std::string> kv;
    kv["corpus"] = c.corpus.string();
    kv["slc_labels"] = c.slc_labels.string();
    kv["flc_labels"] = c.flc_labels.string();
    kv["dev_corpus"] = c.dev_corpus.string();
    kv["dev_slc_labels"] = c.dev_slc_labels.string();
    kv["dev_flc_labels"] = c.dev_flc_labels.string();
    kv["sentiment_lexicon"] = c.sentiment_lexicon.string();
    kv["emotion_lexicon"] = c.emotion_lexicon.string();
    kv["loaded_lexicon"] = c.loaded_lexicon.string();
    kv["sense_lexicon"] = c.sense_lexicon.string();
    kv["embeddings"] = c.embeddings.string();
    kv["annotations"] = c.annotations.string();
    kv["dev_annotations"] = c.dev_annotations.string();
    kv["manifest"] = c.manifest.string();
    kv["flc_manifest"] = c.flc_manifest.string();
    kv["output_dir"] = c.output_dir.string();
    kv["fallback_tagger"] = c.fallback_tagger ? "true" : "false";
    kv["features"] = format_toggles(c.features);
    kv["slc_models"] = join(c.slc_models, ";");
    kv["flc_configs"] = join(c.flc_configs, ";");
    std::vector<std::string> taus;
    for (double t : c.tau_grid) taus.push_back(format_double(t));
    kv["tau_grid"] = join(taus, ",");
    kv["ensemble_mode"] = to_string(c.ensemble_mode);
    kv["relax_fraction"] = format_double(c.relax_fraction);
    kv["postprocess"] = c.postprocess ? "true" : "false";
    kv["window"] = std::to_string(c.window);
    kv["lambda"] = format_double(c.lambda);
    kv["slc_folds"] = std::to_string(c.slc_folds);
    kv["flc_folds"] = std::to_string(c.flc_folds);
    kv["seed"] = std::to_string(c.seed);
    kv["l2"] = format_double(c.l2);
    kv["epochs"] = std::to_string(c.epochs);
    kv["learning_rate"] = format_double(c.learning_rate);
    kv["crf_l2"] = format_double(c.crf_l2);
    kv["crf_epochs"] = std::to_string(c.crf_epochs);
    kv["crf_learning_rate"] = format_double(c.crf_learning_rate);
    kv["lda_topics"] = std::to_string(c.lda_topics);
    kv["lda_iterations"] = std::to_string(c.lda_iterations);
    kv["lda_inference_passes"] = std::to_string(c.lda_inference_passes);
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k + "=" + v + "\n";
    }
    return out;
}

void validate_config(const PipelineConfig& c) {
    if (c.slc_folds < 2 || c.flc_folds < 2) {
        throw UsageError("fold counts must be at least 2");
    }
    if (c.window < 1) {
        throw UsageError("window must be at least 1");
    }
    if (!(c.lambda > 0.0 && c.lambda <= 1.0)) {
        throw UsageError("lambda must lie in (0, 1]");
    }
    if (!(c.relax_fraction > 0.0 && c.relax_fraction <= 1.0)) {
        throw UsageError("relax_fraction must lie in (0, 1]");
    }
    if (c.tau_grid.empty()) {
        throw UsageError("tau grid is empty");
    }
    const std::pair<const char*, const fs::path*> paths[] = {
        {"corpus", &c.corpus},
        {"slc_labels", &c.slc_labels},
        {"flc_labels", &c.flc_labels},
        {"dev_corpus", &c.dev_corpus},
        {"dev_slc_labels", &c.dev_slc_labels},
        {"dev_flc_labels", &c.dev_flc_labels},
        {"sentiment_lexicon", &c.sentiment_lexicon},
        {"emotion_lexicon", &c.emotion_lexicon},
        {"loaded_lexicon", &c.loaded_lexicon},
        {"sense_lexicon", &c.sense_lexicon},
        {"embeddings", &c.embeddings},
        {"annotations", &c.annotations},
        {"dev_annotations", &c.dev_annotations},
        {"manifest", &c.manifest},
        {"flc_manifest", &c.flc_manifest},
    };
    for (const auto& [name, p] : paths) {
        if (!p->empty() && !fs::exists(*p)) {
            throw UsageError(std::string(name) + ": path does not exist: " + p->string());
        }
    }
}

std::string ManifestEntry::column_id() const {
    return fold > 0 ? fold_dir(fold) + "/" + model_id : model_id;
}

Manifest read_manifest(const fs::path& path) {
    const auto lines = split_lines(read_file(path));
    const auto base = path.parent_path();
    Manifest m;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const auto where = path.string() + ":" + std::to_string(n + 1) + ": ";
        std::string line = lines[n];
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || trim(line)[0] == '#') {
            continue;
        }
        if (line.rfind("model\t", 0) == 0) {
            const auto f = split(line, '\t');
            if (f.size() != 5 && f.size() != 6) {
                throw DataError(where + "expected model<TAB>id<TAB>fold<TAB>path<TAB>dev_f1[<TAB>tau]");
            }
            ManifestEntry e;
            e.model_id = f[1];
            if (e.model_id.empty()) {
                throw DataError(where + "empty model id");
            }
            if (f[2] != "-") {
                long long fold = 0;
                if (!parse_int(f[2], fold) || fold < 1) {
                    throw DataError(where + "fold must be a positive integer or '-'");
                }
                e.fold = static_cast<int>(fold);
            }
            e.path = fs::path(f[3]).is_relative() ? base / f[3] : fs::path(f[3]);
            if (!parse_double(f[4], e.dev_f1) || e.dev_f1 < 0.0 || e.dev_f1 > 1.0) {
                throw DataError(where + "dev F1 must be a number in [0, 1]");
            }
            if (f.size() == 6) {
                double tau = 0;
                if (!parse_double(f[5], tau) || !(tau > 0.0 && tau < 1.0)) {
                    throw DataError(where + "tau must lie in (0, 1)");
                }
                e.tau = tau;
            }
            m.entries.push_back(std::move(e));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError(where + "expected key=value or a model row");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        try {
            if (key == "mode") {
                m.mode = parse_vote_mode(value);
            } else if (key == "relax_fraction") {
                m.relax_fraction = to_real(key, value);
            } else if (key == "tau") {
                m.tau = DecisionRule(to_real(key, value)).tau;
            } else {
                throw UsageError("unknown manifest key '" + key + "'");
            }
        } catch (const UsageError& e) {
            throw DataError(where + e.what());
        }
    }
    return m;
}

PredictionStore ingest_predictions(const Manifest& manifest, const std::vector<SentenceKey>* targets) {
    PredictionStore store;
    std::set<std::string> ids;
    for (const auto& e : manifest.entries) {
        PredictionColumn col;
        col.column_id = e.column_id();
        col.model_id = e.model_id;
        col.fold = e.fold;
        col.tau = e.tau.value_or(manifest.tau);
        if (!ids.insert(col.column_id).second) {
            throw DataError("manifest: duplicate column " + col.column_id);
        }
        col.predictions = read_sentence_predictions(e.path);
        for (const auto& p : col.predictions) {
            if (p.model_id != e.model_id) {
                throw DataError(e.path.string() + ": row for model '" + p.model_id + "' in file registered as '" +
                                e.model_id + "'");
            }
        }
        store.dev_f1[col.column_id] = e.dev_f1;
        store.columns.push_back(std::move(col));
    }
    std::set<SentenceKey> required;
    if (targets != nullptr) {
        required.insert(targets->begin(), targets->end());
    } else {
        for (const auto& col : store.columns) {
            for (const auto& p : col.predictions) {
                required.insert(p.key());
            }
        }
    }
    for (const auto& col : store.columns) {
        std::set<SentenceKey> have;
        for (const auto& p : col.predictions) {
            have.insert(p.key());
        }
        for (const auto& key : required) {
            if (!have.count(key)) {
                throw DataError("coverage gap: column " + col.column_id + " has no prediction for sentence " +
                                key.article_id + ":" + std::to_string(key.index));
            }
        }
    }
    return store;
}

std::vector<FragmentSource> ingest_fragment_predictions(const Manifest& manifest) {
    std::vector<FragmentSource> out;
    std::set<std::string> ids;
    for (const auto& e : manifest.entries) {
        std::vector<std::string> models;
        FragmentSource src;
        src.column_id = e.column_id();
        if (!ids.insert(src.column_id).second) {
            throw DataError("manifest: duplicate column " + src.column_id);
        }
        src.fragments = read_fragment_file(e.path, &models);
        for (const auto& m : models) {
            if (m != e.model_id) {
                throw DataError(e.path.string() + ": row for model '" + m + "' in file registered as '" +
                                e.model_id + "'");
            }
        }
        out.push_back(std::move(src));
    }
    return out;
}

DocumentSet load_corpus(const fs::path& dir, const fs::path& annotations, bool fallback_tagger) {
    auto docs = load_articles(dir);
    if (!annotations.empty()) {
        load_annotations(annotations, docs);
    }
    if (fallback_tagger) {
        for (auto& d : docs.documents()) {
            apply_fallback_tags(d);
        }
    }
    return docs;
}

std::vector<SentenceKey> retained_keys(const DocumentSet& documents) {
    std::vector<SentenceKey> keys;
    for (const auto& d : documents) {
        for (const auto* s : d.retained_sentences()) {
            keys.push_back({d.article_id, s->index});
        }
    }
    return keys;
}

Resources load_resources(const PipelineConfig& config, const DocumentSet& corpus, const FeatureToggles& toggles) {
    Resources r;
    r.lexicons = load_lexicons(config.sentiment_lexicon, config.emotion_lexicon, config.loaded_lexicon,
                               config.sense_lexicon);
    if (toggles.embedding || config.postprocess) {
        if (config.embeddings.empty()) {
            throw UsageError("embedding features or postprocess enabled but no embeddings file configured");
        }
        r.embeddings = load_word_vectors(config.embeddings);
    }
    if (toggles.topical) {
        LdaOptions opts;
        opts.topics = config.lda_topics;
        opts.iterations = config.lda_iterations;
        opts.inference_passes = config.lda_inference_passes;
        opts.seed = derive_seed(config.seed, "lda");
        r.lda = in_stage("lda", [&] { return fit_lda(corpus, opts); });
    }
    return r;
}

SentenceFeatures featurize(const DocumentSet& documents, const Resources& resources, const FeatureToggles& toggles,
                           std::vector<std::string>* warnings) {
    SentenceFeatures out;
    for (const auto& doc : documents) {
        std::optional<DocumentTopics> topics;
        if (toggles.topical) {
            if (!resources.lda) {
                throw UsageError("topical features need a fitted topic model");
            }
            topics = compute_document_topics(doc, *resources.lda);
        }
        const EmbeddingTable* table = resources.embeddings ? &*resources.embeddings : nullptr;
        for (const auto* s : doc.retained_sentences()) {
            out[{doc.article_id, s->index}] = assemble_features(*s, doc, resources.lexicons, table,
                                                                topics ? &*topics : nullptr, toggles, warnings);
        }
    }
    return out;
}

std::string format_feature_table(const SentenceFeatures& features) {
    std::string out;
    if (features.empty()) {
        return out;
    }
    const auto& first = features.begin()->second;
    out += "#schema\t" + first.schema_id + "\n";
    out += "article_id\tsentence_index";
    for (const auto& n : first.names) {
        out += '\t' + n;
    }
    out += '\n';
    for (const auto& [key, v] : features) {
        out += key.article_id + '\t' + std::to_string(key.index);
        for (Eigen::Index i = 0; i < v.values.size(); ++i) {
            out += '\t' + format_double(v.values[i]);
        }
        out += '\n';
    }
    return out;
}

namespace {

LogRegOptions logreg_options(const PipelineConfig& c) {
    LogRegOptions o;
    o.l2 = c.l2;
    o.epochs = c.epochs;
    o.learning_rate = c.learning_rate;
    o.seed = derive_seed(c.seed, "logreg");
    o.standardize = true;
    return o;
}

std::vector<SentencePrediction> predict_keys(const LogRegModel& model, const SentenceFeatures& features,
                                             const std::vector<SentenceKey>& keys, const std::string& model_id) {
    std::vector<SentencePrediction> out;
    for (const auto& k : keys) {
        out.push_back({k.article_id, k.index, predict_proba(model, features.at(k)), model_id});
    }
    return out;
}

std::string format_matrix(const PredictionMatrix& m) {
    std::string out = "article_id\tsentence_index";
    for (const auto& c : m.columns) {
        out += '\t' + c;
    }
    out += '\n';
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        out += m.rows[r].article_id + '\t' + std::to_string(m.rows[r].index);
        for (std::size_t c = 0; c < m.columns.size(); ++c) {
            out += m.cells(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) ? "\t1" : "\t0";
        }
        out += '\n';
    }
    return out;
}

}  // namespace

LogRegModel train_slc_model(const PipelineConfig& config, const DocumentSet& corpus, const SlcLabels& labels,
                            const Resources& resources, const FeatureToggles& toggles) {
    const auto features = featurize(corpus, resources, toggles);
    std::vector<FeatureVector> x;
    std::vector<bool> y;
    for (const auto& [key, v] : features) {
        auto it = labels.find(key);
        if (it != labels.end()) {
            x.push_back(v);
            y.push_back(it->second);
        }
    }
    return train_logreg(x, y, logreg_options(config));
}

SlcRunResult run_slc(const PipelineConfig& config) {
    validate_config(config);
    if (config.corpus.empty() || config.slc_labels.empty()) {
        throw UsageError("run-slc needs corpus and slc_labels");
    }
    if (config.slc_models.empty()) {
        throw UsageError("run-slc needs at least one native model in slc_models");
    }
    const auto corpus = in_stage("ingest", [&] { return load_corpus(config.corpus, config.annotations, config.fallback_tagger); });
    const auto gold = in_stage("labels", [&] { return load_slc_labels(config.slc_labels, corpus); });
    std::optional<DocumentSet> dev;
    std::optional<SlcLabels> dev_gold;
    if (!config.dev_corpus.empty()) {
        dev = in_stage("dev ingest", [&] { return load_corpus(config.dev_corpus, config.dev_annotations, config.fallback_tagger); });
        if (!config.dev_slc_labels.empty()) {
            dev_gold = in_stage("dev labels", [&] { return load_slc_labels(config.dev_slc_labels, *dev); });
        }
    }

    std::vector<FeatureToggles> toggles;
    for (const auto& spec : config.slc_models) {
        toggles.push_back(parse_toggles(spec));
    }
    const auto resources = load_resources(config, corpus, union_toggles(toggles));
    const DocumentSet& target_docs = dev ? *dev : corpus;
    const auto targets = retained_keys(target_docs);

    std::vector<SentenceFeatures> train_features;
    std::vector<SentenceFeatures> target_features;
    for (const auto& t : toggles) {
        train_features.push_back(in_stage("featurize", [&] { return featurize(corpus, resources, t); }));
        target_features.push_back(dev ? in_stage("featurize dev", [&] { return featurize(*dev, resources, t); })
                                      : train_features.back());
    }

    std::optional<PredictionStore> external;
    if (!config.manifest.empty()) {
        const auto manifest = read_manifest(config.manifest);
        for (const auto& e : manifest.entries) {
            if (e.fold < 1 || e.fold > config.slc_folds) {
                throw UsageError("manifest entry " + e.model_id + " needs a fold in 1.." +
                                 std::to_string(config.slc_folds) + " for run-slc");
            }
        }
        external = in_stage("ingest predictions", [&] { return ingest_predictions(manifest, &targets); });
    }

    SlcRunResult result;
    result.plan = make_folds(corpus, config.slc_folds, derive_seed(config.seed, "slc-folds"));
    const fs::path out = config.output_dir;
    write_file(out / "config.txt", format_config(config));
    write_file(out / "folds.tsv", format_fold_plan(result.plan));

    std::vector<std::vector<PredictionColumn>> per_fold;
    std::map<std::string, double> dev_f1;
    std::vector<std::vector<BinaryScore>> internal_by_model(toggles.size());
    std::string report_tsv;
    for (int f = 0; f < config.slc_folds; ++f) {
        const int fold = f + 1;
        const auto test_ids = result.plan.test_ids(f);
        SlcFoldResult fold_result;
        fold_result.fold = fold;
        std::vector<PredictionColumn> columns;
        for (std::size_t m = 0; m < toggles.size(); ++m) {
            const auto model_id = native_model_id("logreg", m, toggles.size());
            const std::string stage = "fold " + std::to_string(fold) + " " + model_id;
            std::vector<FeatureVector> x;
            std::vector<bool> y;
            std::vector<SentenceKey> heldout;
            std::vector<bool> heldout_y;
            for (const auto& [key, v] : train_features[m]) {
                auto it = gold.find(key);
                if (it == gold.end()) continue;
                if (test_ids.count(key.article_id)) {
                    heldout.push_back(key);
                    heldout_y.push_back(it->second);
                } else {
                    x.push_back(v);
                    y.push_back(it->second);
                }
            }
            const auto model = in_stage(stage, [&] { return train_logreg(x, y, logreg_options(config)); });
            const auto heldout_pred = predict_keys(model, train_features[m], heldout, model_id);
            std::vector<double> probs;
            for (const auto& p : heldout_pred) probs.push_back(p.probability);
            const double tau = select_tau(probs, heldout_y, config.tau_grid);
            SlcLabels heldout_labels;
            SlcLabels heldout_gold;
            for (std::size_t i = 0; i < heldout.size(); ++i) {
                heldout_labels[heldout[i]] = apply_threshold(probs[i], DecisionRule(tau));
                heldout_gold[heldout[i]] = heldout_y[i];
            }
            const auto score = slc_scores(heldout_labels, heldout_gold);
            fold_result.taus.push_back(tau);
            fold_result.internal.push_back(score);
            internal_by_model[m].push_back(score);

            PredictionColumn col;
            col.model_id = model_id;
            col.fold = fold;
            col.column_id = fold_dir(fold) + "/" + model_id;
            col.tau = tau;
            col.predictions = predict_keys(model, target_features[m], targets, model_id);
            dev_f1[col.column_id] = score.f1;

            const auto dir = out / fold_dir(fold) / model_id;
            write_file(dir / "model.txt", save_logreg(model));
            write_file(dir / "tau.txt", format_double(tau) + "\n");
            write_file(dir / "heldout.tsv", format_sentence_predictions(heldout_pred));
            write_file(dir / "predictions.tsv", format_sentence_predictions(col.predictions));
            report_tsv += "tau\t" + col.column_id + "\t" + format_double(tau) + "\n";
            report_tsv += format_binary_tsv(score, "internal/" + col.column_id + "/");
            columns.push_back(std::move(col));
        }
        if (external) {
            for (const auto& col : external->columns) {
                if (col.fold == fold) {
                    columns.push_back(col);
                    dev_f1[col.column_id] = external->dev_f1.at(col.column_id);
                }
            }
        }
        per_fold.push_back(std::move(columns));
        result.folds.push_back(std::move(fold_result));
    }
    if (!result.plan.assignments.empty() && result.plan.k > 0) {
        for (std::size_t m = 0; m < toggles.size(); ++m) {
            result.pooled_internal.push_back(score_folds(internal_by_model[m]).pooled);
            report_tsv += format_binary_tsv(result.pooled_internal.back(),
                                            "internal/pooled/" + native_model_id("logreg", m, toggles.size()) + "/");
        }
    }

    EnsembleConfig ens;
    ens.mode = config.ensemble_mode;
    ens.relax_fraction = config.relax_fraction;
    ens.model_dev_f1 = dev_f1;
    const auto ensembled = in_stage("ensemble", [&] { return ensemble_plus(per_fold, ens, targets); });
    result.matrix = ensembled.matrix;
    result.labels = ensembled.labels;

    if (config.postprocess) {
        SlcLabels updated;
        for (const auto& doc : target_docs) {
            for (const auto& [k, v] : repetition_postprocess(doc, *resources.embeddings, result.labels, config.window,
                                                             config.lambda)) {
                updated[k] = v;
            }
        }
        result.labels = std::move(updated);
    }

    if (dev_gold) {
        SlcLabels restricted;
        for (const auto& k : targets) {
            auto it = dev_gold->find(k);
            if (it != dev_gold->end()) restricted[k] = it->second;
        }
        result.external = slc_scores(result.labels, restricted);
        report_tsv += format_binary_tsv(*result.external, "external/ensemble/");
    }
    report_tsv = "columns\t-\t" + std::to_string(result.matrix.columns.size()) + "\n" + report_tsv;

    std::string report = "sentence-level run: " + std::to_string(config.slc_folds) + " folds, " +
                         std::to_string(result.matrix.columns.size()) + " ensemble columns, mode " +
                         to_string(config.ensemble_mode) +
                         (config.ensemble_mode == VoteMode::relax ? " >= " + format_double(config.relax_fraction) : "") +
                         "\n";
    for (std::size_t m = 0; m < result.pooled_internal.size(); ++m) {
        report += format_binary_table(result.pooled_internal[m],
                                      "internal (held-out folds) " + native_model_id("logreg", m, toggles.size()));
    }
    if (result.external) {
        report += format_binary_table(*result.external, "external dev, ensemble");
    }
    write_file(out / "ensemble_matrix.tsv", format_matrix(result.matrix));
    write_file(out / "labels.tsv", format_slc_labels(result.labels));
    write_file(out / "report.tsv", report_tsv);
    write_file(out / "report.txt", report);
    return result;
}

CrfModel train_flc_model(const PipelineConfig& config, const DocumentSet& corpus, unsigned families,
                         std::uint64_t seed) {
    const auto lex = load_lexicons(config.sentiment_lexicon, config.emotion_lexicon, config.loaded_lexicon,
                                   config.sense_lexicon);
    std::vector<TokenFeatures> sequences;
    std::vector<std::vector<std::string>> tags;
    for (const auto& doc : corpus) {
        for (const auto* s : doc.retained_sentences()) {
            sequences.push_back(sentence_token_features(*s, lex, families));
            tags.push_back(encode_bio(*s, doc.article_id, doc.gold).tags);
        }
    }
    CrfOptions opts;
    opts.l2 = config.crf_l2;
    opts.epochs = config.crf_epochs;
    opts.learning_rate = config.crf_learning_rate;
    opts.seed = seed;
    return train_crf(sequences, tags, opts);
}

std::vector<Fragment> predict_fragments(const CrfModel& model, const DocumentSet& documents, const Lexicons& lex) {
    std::vector<Fragment> out;
    for (const auto& doc : documents) {
        for (const auto* s : doc.retained_sentences()) {
            TagSequence tags;
            tags.article_id = doc.article_id;
            tags.sentence_index = s->index;
            // Families left out at training time have no weights, so the full
            // feature set is safe here.
            tags.tags = viterbi(model, sentence_token_features(*s, lex, kFeatAll));
            auto frags = decode_bio(tags, *s);
            out.insert(out.end(), frags.begin(), frags.end());
        }
    }
    return out;
}

FlcRunResult run_flc(const PipelineConfig& config) {
    validate_config(config);
    if (config.corpus.empty() || config.flc_labels.empty()) {
        throw UsageError("run-flc needs corpus and flc_labels");
    }
    if (config.flc_configs.empty()) {
        throw UsageError("run-flc needs at least one entry in flc_configs");
    }
    auto corpus = in_stage("ingest", [&] { return load_corpus(config.corpus, config.annotations, config.fallback_tagger); });
    const auto gold = in_stage("labels", [&] { return load_flc_labels(config.flc_labels, corpus); });
    std::optional<DocumentSet> dev;
    std::optional<std::vector<Fragment>> dev_gold;
    if (!config.dev_corpus.empty()) {
        dev = in_stage("dev ingest", [&] { return load_corpus(config.dev_corpus, config.dev_annotations, config.fallback_tagger); });
        if (!config.dev_flc_labels.empty()) {
            dev_gold = in_stage("dev labels", [&] { return load_flc_labels(config.dev_flc_labels, *dev); });
        }
    }
    const auto lex = load_lexicons(config.sentiment_lexicon, config.emotion_lexicon, config.loaded_lexicon,
                                   config.sense_lexicon);
    std::vector<unsigned> families;
    for (const auto& spec : config.flc_configs) {
        families.push_back(parse_token_families(spec));
    }
    const DocumentSet& target_docs = dev ? *dev : corpus;

    FlcRunResult result;
    result.plan = make_folds(corpus, config.flc_folds, derive_seed(config.seed, "flc-folds"));
    const fs::path out = config.output_dir;
    write_file(out / "config.txt", format_config(config));
    write_file(out / "folds.tsv", format_fold_plan(result.plan));

    std::vector<FragmentSource> sources;
    std::vector<std::vector<Fragment>> heldout_by_config(families.size());
    std::vector<Fragment> heldout_merged;
    std::string report_tsv;
    for (int f = 0; f < config.flc_folds; ++f) {
        const int fold = f + 1;
        const auto train_docs = corpus.subset(result.plan.train_ids(f));
        const auto test_docs = corpus.subset(result.plan.test_ids(f));
        std::vector<std::vector<Fragment>> fold_heldout;
        for (std::size_t c = 0; c < families.size(); ++c) {
            const auto model_id = native_model_id("crf", c, families.size());
            const auto column = fold_dir(fold) + "/" + model_id;
            const auto model = in_stage("fold " + std::to_string(fold) + " " + model_id, [&] {
                return train_flc_model(config, train_docs, families[c], derive_seed(config.seed, "crf/" + column));
            });
            auto heldout = predict_fragments(model, test_docs, lex);
            FragmentSource src{column, predict_fragments(model, target_docs, lex)};
            const auto dir = out / column;
            write_file(dir / "model.txt", save_crf(model));
            write_file(dir / "heldout.tsv", format_fragments(heldout, model_id));
            write_file(dir / "predictions.tsv", format_fragments(src.fragments, model_id));
            heldout_by_config[c].insert(heldout_by_config[c].end(), heldout.begin(), heldout.end());
            fold_heldout.push_back(std::move(heldout));
            sources.push_back(std::move(src));
        }
        const auto merged = merge_fragments(fold_heldout);
        heldout_merged.insert(heldout_merged.end(), merged.begin(), merged.end());
    }
    if (!config.flc_manifest.empty()) {
        const auto manifest = read_manifest(config.flc_manifest);
        auto external = in_stage("ingest predictions", [&] { return ingest_fragment_predictions(manifest); });
        in_stage("ingest predictions", [&] {
            for (const auto& src : external) {
                validate_fragments(src.fragments, target_docs, src.column_id);
            }
            return 0;
        });
        sources.insert(sources.end(), external.begin(), external.end());
    }

    std::vector<std::vector<Fragment>> lists;
    for (const auto& src : sources) {
        result.source_ids.push_back(src.column_id);
        lists.push_back(src.fragments);
    }
    // Spans never cross articles, so one merge over all sources is the same
    // as merging article by article.
    result.merged = merge_fragments(lists);

    for (std::size_t c = 0; c < families.size(); ++c) {
        result.internal_per_config.push_back(flc_strict_scores(heldout_by_config[c], gold));
        report_tsv += format_span_tsv(result.internal_per_config.back(),
                                      "internal/" + native_model_id("crf", c, families.size()) + "/");
    }
    result.internal_merged = flc_strict_scores(heldout_merged, gold);
    report_tsv += format_span_tsv(result.internal_merged, "internal/merged/");
    if (dev_gold) {
        result.external = flc_strict_scores(result.merged, *dev_gold);
        report_tsv += format_span_tsv(*result.external, "external/merged/");
    }
    report_tsv = "sources\t-\t" + std::to_string(sources.size()) + "\n" + report_tsv;

    std::string report = "fragment-level run: " + std::to_string(config.flc_folds) + " folds, " +
                         std::to_string(sources.size()) + " merged sources\n";
    for (std::size_t c = 0; c < families.size(); ++c) {
        report += format_span_table(result.internal_per_config[c],
                                    "internal (held-out folds) " + native_model_id("crf", c, families.size()) + " [" +
                                        format_token_families(families[c]) + "]");
    }
    report += format_span_table(result.internal_merged, "internal (held-out folds) merged");
    if (result.external) {
        report += format_span_table(*result.external, "external dev, merged");
    }
    write_file(out / "merged.tsv", format_fragments(result.merged));
    write_file(out / "report.tsv", report_tsv);
    write_file(out / "report.txt", report);
    return result;
}

}  // namespace propdetect
