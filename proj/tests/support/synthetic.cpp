#include "synthetic.hpp"

#include <atomic>
#include <unistd.h>

#include "propdetect/logreg.hpp"
#include "propdetect/random.hpp"
#include "propdetect/textio.hpp"

namespace testsupport {

using namespace propdetect;

namespace {

std::atomic<int> counter{0};

const std::vector<std::string> kSlogans = {"BUILD THE WALL", "DRAIN THE SWAMP", "MAKE IT GREAT",
                                           "LOCK THEM UP",   "STOP THE STEAL",  "TAKE IT BACK"};

std::string pick(Rng& rng, const std::vector<std::string>& v) {
    return v[uniform_index(rng, v.size())];
}

std::string capitalize(std::string w) {
    if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

struct Line {
    std::string text;
    bool propaganda = false;
    // Offsets relative to the line start.
    std::vector<std::pair<std::size_t, std::size_t>> loaded;
    std::vector<std::pair<std::size_t, std::size_t>> slogans;
};

Line make_line(Rng& rng, bool propaganda, double slogan_rate) {
    const int n = 6 + static_cast<int>(uniform_index(rng, 6));
    std::vector<std::string> words;
    for (int i = 0; i < n; ++i) words.push_back(pick(rng, neutral_words()));
    int loaded_at = -1;
    int slogan_at = -1;
    std::string slogan;
    if (propaganda) {
        loaded_at = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - 1)));
        words[static_cast<std::size_t>(loaded_at)] = pick(rng, loaded_words());
        if (uniform01(rng) < slogan_rate) {
            do {
                slogan_at = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - 1)));
            } while (slogan_at == loaded_at);
            slogan = pick(rng, kSlogans);
        }
    }
    Line line;
    line.propaganda = propaganda;
    for (int i = 0; i < n; ++i) {
        const std::string w = i == 0 ? capitalize(words[0]) : words[static_cast<std::size_t>(i)];
        if (i > 0) line.text += ' ';
        if (i == slogan_at) {
            // The slogan replaces the word at this position.
            line.slogans.push_back({line.text.size(), line.text.size() + slogan.size()});
            line.text += slogan;
            continue;
        }
        if (i == loaded_at) line.loaded.push_back({line.text.size(), line.text.size() + w.size()});
        line.text += w;
    }
    line.text += '.';
    return line;
}

}  // namespace

TempDir::TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() /
            ("propdetect-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

const std::vector<std::string>& neutral_words() {
    static const std::vector<std::string> words = {
        "council",  "river",    "market",   "weather",  "school",    "report",   "bridge",   "garden",
        "harvest",  "museum",   "train",    "budget",   "festival",  "library",  "station",  "tourism",
        "farmers",  "students", "village",  "approved", "discussed", "opened",   "visited",  "measured",
        "planned",  "reviewed", "expanded", "announced", "repaired", "local",    "annual",   "quiet",
        "northern", "regional", "morning",  "evening",  "with",      "after",    "during",   "near"};
    return words;
}

const std::vector<std::string>& loaded_words() {
    static const std::vector<std::string> words = {"traitors", "disaster", "corrupt",  "evil",
                                                   "shameful", "treason",  "scandal", "destroy"};
    return words;
}

DocumentSet SyntheticCorpus::documents() const {
    DocumentSet docs;
    for (const auto& [id, text] : articles) docs.add(make_document(id, text));
    return docs;
}

SyntheticCorpus make_synthetic(const SyntheticOptions& o) {
    Rng rng(o.seed);
    SyntheticCorpus c;
    for (int a = 0; a < o.articles; ++a) {
        const std::string id = std::to_string(o.first_id + a);
        std::vector<Line> lines;
        for (int s = 0; s < o.sentences; ++s) {
            if (s == 0) {
                lines.push_back(make_line(rng, false, 0));
                continue;
            }
            if (o.plant_filtered_lines && uniform01(rng) < 0.06) {
                lines.push_back({uniform01(rng) < 0.5 ? "" : "Update", false, {}, {}});
                continue;
            }
            if (o.plant_duplicates && s >= 3 && uniform01(rng) < 0.15) {
                // Copy of a line 1..3 back (always inside a window of 10).
                const auto back = 1 + uniform_index(rng, 3);
                lines.push_back(lines[lines.size() - back]);
                continue;
            }
            lines.push_back(make_line(rng, uniform01(rng) < o.propaganda_rate, o.slogan_rate));
        }
        std::string text;
        // Offsets are in characters; the corpus is ASCII so bytes coincide.
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const auto base = text.size();
            const auto& l = lines[i];
            for (const auto& [b, e] : l.loaded) c.fragments.push_back({id, base + b, base + e, "Loaded_Language"});
            for (const auto& [b, e] : l.slogans) c.fragments.push_back({id, base + b, base + e, "Slogans"});
            text += l.text;
            if (i + 1 < lines.size()) text += '\n';
        }
        c.articles[id] = text;
        const auto doc = make_document(id, text);
        for (const auto* s : doc.retained_sentences()) {
            c.slc[{id, s->index}] = lines[static_cast<std::size_t>(s->index - 1)].propaganda;
        }
    }
    return c;
}

void write_articles(const SyntheticCorpus& corpus, const fs::path& dir) {
    for (const auto& [id, text] : corpus.articles) {
        write_file(dir / ("article" + id + ".txt"), text + "\n");
    }
}

void write_slc_labels(const SyntheticCorpus& corpus, const fs::path& path) {
    write_file(path, format_slc_labels(corpus.slc));
}

void write_flc_labels(const SyntheticCorpus& corpus, const fs::path& path) {
    write_file(path, format_fragments(corpus.fragments));
}

LexiconPaths write_lexicons(const fs::path& dir, std::uint64_t seed) {
    LexiconPaths p{dir / "sentiment.tsv", dir / "emotion.tsv", dir / "loaded.txt", dir / "senses.tsv",
                   dir / "vectors.txt"};
    std::string sentiment;
    std::string emotion;
    std::string loaded;
    for (const auto& w : loaded_words()) {
        sentiment += w + "\t-0.8\n";
        emotion += w + "\tanger\t1\n" + w + "\tfear\t1\n" + w + "\tjoy\t0\n";
        loaded += w + "\n";
    }
    sentiment += "festival\t0.6\nquiet\t0.3\nopened\t0.2\n";
    emotion += "festival\tjoy\t1\nharvest\tjoy\t1\n";
    loaded += "sell out\n";
    write_file(p.sentiment, sentiment);
    write_file(p.emotion, emotion);
    write_file(p.loaded, loaded);
    write_file(p.senses, "train\tNOUN\t17\ntrain\tVERB\t11\nreport\tNOUN\t7\nbridge\tNOUN\t6\n");

    Rng rng(seed);
    const int dim = 8;
    std::string vectors = std::to_string(neutral_words().size() + loaded_words().size()) + " " +
                          std::to_string(dim) + "\n";
    auto add = [&](const std::string& w) {
        vectors += w;
        for (int i = 0; i < dim; ++i) vectors += " " + format_double(uniform01(rng) * 2.0 - 1.0);
        vectors += '\n';
    };
    for (const auto& w : neutral_words()) add(w);
    for (const auto& w : loaded_words()) add(w);
    write_file(p.embeddings, vectors);
    return p;
}

void write_external_predictions(const SyntheticCorpus& corpus, const fs::path& path, const std::string& model_id,
                                std::uint64_t seed, double lo_lo, double lo_hi, double hi_lo, double hi_hi) {
    Rng rng(seed);
    std::vector<SentencePrediction> preds;
    for (const auto& [key, gold] : corpus.slc) {
        const double u = uniform01(rng);
        const double p = gold ? hi_lo + u * (hi_hi - hi_lo) : lo_lo + u * (lo_hi - lo_lo);
        preds.push_back({key.article_id, key.index, p, model_id});
    }
    write_file(path, format_sentence_predictions(preds));
}

fs::path write_experiment(const fs::path& dir, const SyntheticOptions& options, int slc_folds, int flc_folds,
                          int external_models) {
    const auto corpus = make_synthetic(options);
    write_articles(corpus, dir / "corpus");
    write_slc_labels(corpus, dir / "slc.tsv");
    write_flc_labels(corpus, dir / "flc.tsv");
    const auto lex = write_lexicons(dir);
    std::string config = "# synthetic experiment\n"
                         "corpus=corpus\nslc_labels=slc.tsv\nflc_labels=flc.tsv\n"
                         "sentiment_lexicon=sentiment.tsv\nemotion_lexicon=emotion.tsv\n"
                         "loaded_lexicon=loaded.txt\nsense_lexicon=senses.tsv\nembeddings=vectors.txt\n"
                         "slc_folds=" + std::to_string(slc_folds) + "\nflc_folds=" + std::to_string(flc_folds) +
                         "\nlda_topics=4\nlda_iterations=100\nlda_inference_passes=20\n"
                         "crf_epochs=60\nseed=" + std::to_string(options.seed) + "\n";
    if (external_models > 0) {
        std::string manifest = "tau=0.5\n";
        for (int m = 0; m < external_models; ++m) {
            const std::string model = "ext" + std::to_string(m + 1);
            for (int f = 1; f <= slc_folds; ++f) {
                const std::string file = "external/" + model + "-fold" + std::to_string(f) + ".tsv";
                write_external_predictions(corpus, dir / file, model,
                                           derive_seed(options.seed, model + "/" + std::to_string(f)));
                manifest += "model\t" + model + "\t" + std::to_string(f) + "\t" + file + "\t0." +
                            std::to_string(6 + m) + "\n";
            }
        }
        write_file(dir / "manifest.txt", manifest);
        config += "manifest=manifest.txt\n";
    }
    write_file(dir / "experiment.conf", config);
    return dir / "experiment.conf";
}

}  // namespace testsupport
