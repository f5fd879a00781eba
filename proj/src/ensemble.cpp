#include "propdetect/ensemble.hpp"

#include <algorithm>
#include <set>

#include "propdetect/error.hpp"
#include "propdetect/textio.hpp"

namespace propdetect {

VoteMode parse_vote_mode(std::string_view s) {
    if (s == "majority") return VoteMode::majority;
    if (s == "relax") return VoteMode::relax;
    throw UsageError("unknown ensemble mode '" + std::string(s) + "' (expected majority or relax)");
}

std::string to_string(VoteMode mode) {
    return mode == VoteMode::majority ? "majority" : "relax";
}

std::vector<bool> PredictionMatrix::row(std::size_t i) const {
    std::vector<bool> out(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out[c] = cells(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    }
    return out;
}

bool majority_vote(const std::vector<std::string>& model_ids, const std::vector<bool>& votes,
                   const EnsembleConfig& config) {
    if (votes.empty() || votes.size() != model_ids.size()) {
        throw UsageError("majority_vote: need one vote per model and at least one model");
    }
    const auto yes = static_cast<std::size_t>(std::count(votes.begin(), votes.end(), true));
    const auto no = votes.size() - yes;
    if (yes != no) {
        return yes > no;
    }
    std::size_t best = votes.size();
    double best_f1 = 0.0;
    for (std::size_t i = 0; i < model_ids.size(); ++i) {
        auto it = config.model_dev_f1.find(model_ids[i]);
        if (it == config.model_dev_f1.end()) {
            throw UsageError("majority_vote: tie needs dev F1 for model " + model_ids[i]);
        }
        if (best == votes.size() || it->second > best_f1 ||
            (it->second == best_f1 && model_ids[i] < model_ids[best])) {
            best = i;
            best_f1 = it->second;
        }
    }
    return votes[best];
}

bool relax_vote(const std::vector<bool>& votes, const EnsembleConfig& config) {
    if (votes.empty()) {
        throw UsageError("relax_vote: no votes");
    }
    if (!(config.relax_fraction > 0.0 && config.relax_fraction <= 1.0)) {
        throw UsageError("relax_vote: fraction must lie in (0, 1]");
    }
    const auto yes = static_cast<double>(std::count(votes.begin(), votes.end(), true));
    // Slack absorbs representation error in fractions such as 0.3 * 10.
    return yes > 0 && yes >= config.relax_fraction * static_cast<double>(votes.size()) - 1e-9;
}

bool vote(const std::vector<std::string>& model_ids, const std::vector<bool>& votes, const EnsembleConfig& config) {
    return config.mode == VoteMode::majority ? majority_vote(model_ids, votes, config) : relax_vote(votes, config);
}

PredictionMatrix build_prediction_matrix(const std::vector<PredictionColumn>& columns,
                                         std::vector<SentenceKey> targets) {
    if (columns.empty()) {
        throw UsageError("prediction matrix needs at least one column");
    }
    if (targets.empty()) {
        std::set<SentenceKey> all;
        for (const auto& col : columns) {
            for (const auto& p : col.predictions) {
                all.insert(p.key());
            }
        }
        targets.assign(all.begin(), all.end());
    } else {
        std::sort(targets.begin(), targets.end());
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    }
    PredictionMatrix m;
    m.rows = targets;
    m.cells = BoolMatrix::Constant(static_cast<Eigen::Index>(targets.size()),
                                   static_cast<Eigen::Index>(columns.size()), false);
    std::set<std::string> seen_columns;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto& col = columns[c];
        if (!seen_columns.insert(col.column_id).second) {
            throw DataError("duplicate ensemble column " + col.column_id);
        }
        m.columns.push_back(col.column_id);
        const DecisionRule rule(col.tau);
        std::map<SentenceKey, double> by_key;
        for (const auto& p : col.predictions) {
            by_key[p.key()] = p.probability;
        }
        for (std::size_t r = 0; r < targets.size(); ++r) {
            auto it = by_key.find(targets[r]);
            if (it == by_key.end()) {
                throw DataError("coverage gap: column " + col.column_id + " has no prediction for sentence " +
                                targets[r].article_id + ":" + std::to_string(targets[r].index));
            }
            m.cells(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = apply_threshold(it->second, rule);
        }
    }
    return m;
}

SlcLabels vote_matrix(const PredictionMatrix& matrix, const EnsembleConfig& config) {
    SlcLabels out;
    for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
        out[matrix.rows[r]] = vote(matrix.columns, matrix.row(r), config);
    }
    return out;
}

EnsembleResult ensemble_plus(const std::vector<std::vector<PredictionColumn>>& per_fold,
                             const EnsembleConfig& config, std::vector<SentenceKey> targets) {
    if (per_fold.empty()) {
        throw UsageError("ensemble_plus: no folds");
    }
    std::vector<std::string> roster;
    for (const auto& col : per_fold.front()) {
        roster.push_back(col.model_id);
    }
    std::sort(roster.begin(), roster.end());
    std::vector<PredictionColumn> columns;
    EnsembleConfig resolved = config;
    for (std::size_t f = 0; f < per_fold.size(); ++f) {
        std::vector<std::string> models;
        for (const auto& col : per_fold[f]) {
            models.push_back(col.model_id);
        }
        std::sort(models.begin(), models.end());
        if (models != roster) {
            throw DataError("ensemble_plus: fold " + std::to_string(f + 1) + " has a different model roster");
        }
        for (auto col : per_fold[f]) {
            if (col.column_id.empty()) {
                col.column_id = "fold" + std::to_string(f + 1) + "/" + col.model_id;
            }
            if (!resolved.model_dev_f1.count(col.column_id)) {
                auto it = config.model_dev_f1.find(col.model_id);
                if (it != config.model_dev_f1.end()) {
                    resolved.model_dev_f1[col.column_id] = it->second;
                }
            }
            columns.push_back(std::move(col));
        }
    }
    EnsembleResult result;
    result.matrix = build_prediction_matrix(columns, std::move(targets));
    result.labels = vote_matrix(result.matrix, resolved);
    return result;
}

namespace {

bool overlaps(const Fragment& a, const Fragment& b) {
    return a.article_id == b.article_id && a.start < b.end && b.start < a.end;
}

// Larger span first, then earlier start.
bool outranks(const Fragment& a, const Fragment& b) {
    const auto la = a.end - a.start;
    const auto lb = b.end - b.start;
    if (la != lb) return la > lb;
    return a.start < b.start;
}

}  // namespace

std::vector<Fragment> merge_fragments(const std::vector<std::vector<Fragment>>& fragment_sets) {
    struct LabelTally {
        std::size_t count = 0;
        std::pair<std::size_t, std::size_t> first_seen;  // (model, position)
    };
    using SpanKey = std::tuple<std::string, std::size_t, std::size_t>;
    std::map<SpanKey, std::map<std::string, LabelTally>> groups;
    for (std::size_t m = 0; m < fragment_sets.size(); ++m) {
        for (std::size_t i = 0; i < fragment_sets[m].size(); ++i) {
            const auto& f = fragment_sets[m][i];
            auto [it, fresh] = groups[{f.article_id, f.start, f.end}].try_emplace(f.technique);
            if (fresh) {
                it->second.first_seen = {m, i};
            }
            ++it->second.count;
        }
    }

    // Exact-span plurality picks the label; any emitted span survives.
    std::map<std::string, std::vector<Fragment>> by_label;
    for (const auto& [key, labels] : groups) {
        const std::string* best = nullptr;
        const LabelTally* best_tally = nullptr;
        for (const auto& [label, tally] : labels) {
            if (best == nullptr || tally.count > best_tally->count ||
                (tally.count == best_tally->count && tally.first_seen < best_tally->first_seen)) {
                best = &label;
                best_tally = &tally;
            }
        }
        const auto& [article, start, end] = key;
        by_label[*best].push_back({article, start, end, *best});
    }

    // Same-label overlaps: the highest-ranked fragment suppresses everything it
    // overlaps; repeated until no same-label overlap remains.
    std::vector<Fragment> out;
    for (auto& [label, frags] : by_label) {
        std::sort(frags.begin(), frags.end(), outranks);
        std::vector<Fragment> kept;
        for (auto& f : frags) {
            const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Fragment& k) { return overlaps(k, f); });
            if (!suppressed) {
                kept.push_back(std::move(f));
            }
        }
        out.insert(out.end(), kept.begin(), kept.end());
    }
    std::sort(out.begin(), out.end(), [](const Fragment& a, const Fragment& b) {
        return std::tie(a.article_id, a.start, a.end, a.technique) < std::tie(b.article_id, b.start, b.end, b.technique);
    });
    return out;
}

std::vector<bool> repetition_postprocess(const std::vector<Eigen::VectorXd>& embeddings,
                                         const std::vector<bool>& labels, int window, double lambda) {
    if (embeddings.size() != labels.size()) {
        throw UsageError("repetition_postprocess: embeddings and labels differ in length");
    }
    if (window < 1) {
        throw UsageError("repetition_postprocess: window must be >= 1");
    }
    if (!(lambda > 0.0 && lambda <= 1.0)) {
        throw UsageError("repetition_postprocess: lambda must lie in (0, 1]");
    }
    std::vector<bool> out = labels;
    for (std::size_t i = 1; i < embeddings.size(); ++i) {
        if (out[i]) {
            continue;
        }
        const std::size_t from = i > static_cast<std::size_t>(window) ? i - static_cast<std::size_t>(window) : 0;
        for (std::size_t j = from; j < i; ++j) {
            if (cosine(embeddings[i], embeddings[j]) > lambda) {
                out[i] = true;
                break;
            }
        }
    }
    return out;
}

SlcLabels repetition_postprocess(const Document& document, const EmbeddingTable& table, const SlcLabels& labels,
                                 int window, double lambda) {
    std::vector<Eigen::VectorXd> embeddings;
    std::vector<bool> flags;
    std::vector<SentenceKey> keys;
    for (const auto* s : document.retained_sentences()) {
        SentenceKey key{document.article_id, s->index};
        auto it = labels.find(key);
        if (it == labels.end()) {
            continue;
        }
        embeddings.push_back(sentence_embedding(*s, table));
        flags.push_back(it->second);
        keys.push_back(std::move(key));
    }
    const auto updated = repetition_postprocess(embeddings, flags, window, lambda);
    SlcLabels out;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        out[keys[i]] = updated[i];
    }
    return out;
}

}  // namespace propdetect
