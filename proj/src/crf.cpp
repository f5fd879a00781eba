#include "propdetect/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "propdetect/error.hpp"
#include "propdetect/random.hpp"
#include "propdetect/textio.hpp"

namespace propdetect {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double m = v.maxCoeff();
    if (m == kNegInf) {
        return kNegInf;
    }
    return m + std::log((v.array() - m).exp().sum());
}

bool is_inside(const std::string& tag) { return tag.size() > 2 && tag[0] == 'I' && tag[1] == '-'; }
bool is_begin(const std::string& tag) { return tag.size() > 2 && tag[0] == 'B' && tag[1] == '-'; }

struct ForwardBackward {
    Eigen::MatrixXd emissions;  // T x K
    Eigen::MatrixXd alpha;      // T x K
    Eigen::MatrixXd beta;       // T x K
    Eigen::MatrixXd trans;      // K x K, penalty included
    double log_z = 0.0;
};

ForwardBackward forward_backward(const CrfModel& model, const EncodedFeatures& features, bool with_backward) {
    ForwardBackward fb;
    const auto T = static_cast<Eigen::Index>(features.size());
    const Eigen::Index K = model.tag_count();
    fb.emissions = emission_scores(model, features);
    fb.trans = model.transition + model.transition_penalty();
    const Eigen::VectorXd start = model.start + model.start_penalty();
    fb.alpha.resize(T, K);
    fb.alpha.row(0) = (start + fb.emissions.row(0).transpose()).transpose();
    Eigen::VectorXd tmp(K);
    for (Eigen::Index i = 1; i < T; ++i) {
        for (Eigen::Index t = 0; t < K; ++t) {
            tmp = fb.alpha.row(i - 1).transpose() + fb.trans.col(t);
            fb.alpha(i, t) = log_sum_exp(tmp) + fb.emissions(i, t);
        }
    }
    fb.log_z = log_sum_exp(fb.alpha.row(T - 1).transpose());
    if (with_backward) {
        fb.beta = Eigen::MatrixXd::Zero(T, K);
        for (Eigen::Index i = T - 2; i >= 0; --i) {
            const Eigen::VectorXd next = fb.emissions.row(i + 1).transpose() + fb.beta.row(i + 1).transpose();
            for (Eigen::Index s = 0; s < K; ++s) {
                tmp = fb.trans.row(s).transpose() + next;
                fb.beta(i, s) = log_sum_exp(tmp);
            }
        }
    }
    return fb;
}

}  // namespace

int CrfModel::tag_index(std::string_view tag) const {
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] == tag) {
            return static_cast<int>(i);
        }
    }
    throw DataError("unknown tag '" + std::string(tag) + "'");
}

Eigen::MatrixXd CrfModel::transition_penalty() const {
    const Eigen::Index K = tag_count();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(K, K);
    if (!bio_constraints) {
        return p;
    }
    for (Eigen::Index to = 0; to < K; ++to) {
        const auto& t = tags[static_cast<std::size_t>(to)];
        if (!is_inside(t)) continue;
        const auto technique = t.substr(2);
        for (Eigen::Index from = 0; from < K; ++from) {
            const auto& f = tags[static_cast<std::size_t>(from)];
            const bool compatible = (is_begin(f) || is_inside(f)) && f.substr(2) == technique;
            if (!compatible) {
                p(from, to) = kInvalidTransitionPenalty;
            }
        }
    }
    return p;
}

Eigen::VectorXd CrfModel::start_penalty() const {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(tag_count());
    if (bio_constraints) {
        for (std::size_t t = 0; t < tags.size(); ++t) {
            if (is_inside(tags[t])) {
                p[static_cast<Eigen::Index>(t)] = kInvalidTransitionPenalty;
            }
        }
    }
    return p;
}

Eigen::Index CrfModel::parameter_count() const {
    return emission.size() + transition.size() + start.size();
}

Eigen::VectorXd CrfModel::flatten() const {
    Eigen::VectorXd theta(parameter_count());
    theta << Eigen::Map<const Eigen::VectorXd>(emission.data(), emission.size()),
        Eigen::Map<const Eigen::VectorXd>(transition.data(), transition.size()), start;
    return theta;
}

void CrfModel::unflatten(const Eigen::VectorXd& theta) {
    if (theta.size() != parameter_count()) {
        throw InvariantError("CRF parameter vector has wrong length");
    }
    Eigen::Index off = 0;
    emission = Eigen::Map<const Eigen::MatrixXd>(theta.data(), emission.rows(), emission.cols());
    off += emission.size();
    transition = Eigen::Map<const Eigen::MatrixXd>(theta.data() + off, transition.rows(), transition.cols());
    off += transition.size();
    start = theta.segment(off, start.size());
}

std::vector<std::string> bio_tag_set(const std::vector<std::string>& techniques) {
    std::vector<std::string> tags = {"O"};
    for (const auto& t : techniques) {
        tags.push_back("B-" + t);
        tags.push_back("I-" + t);
    }
    return tags;
}

CrfModel make_crf(std::vector<std::string> tags, std::vector<std::string> features, bool bio_constraints) {
    CrfModel m;
    m.tags = std::move(tags);
    m.features = std::move(features);
    for (std::size_t i = 0; i < m.features.size(); ++i) {
        if (!m.feature_ids.emplace(m.features[i], static_cast<int>(i)).second) {
            throw InvariantError("duplicate CRF feature " + m.features[i]);
        }
    }
    const Eigen::Index K = m.tag_count();
    m.emission = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.features.size()), K);
    m.transition = Eigen::MatrixXd::Zero(K, K);
    m.start = Eigen::VectorXd::Zero(K);
    m.bio_constraints = bio_constraints;
    return m;
}

EncodedFeatures encode_features(const CrfModel& model, const TokenFeatures& features) {
    EncodedFeatures out(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        for (const auto& f : features[i]) {
            auto it = model.feature_ids.find(f);
            if (it != model.feature_ids.end()) {
                out[i].push_back(it->second);
            }
        }
    }
    return out;
}

Eigen::MatrixXd emission_scores(const CrfModel& model, const EncodedFeatures& features) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(features.size()), model.tag_count());
    for (std::size_t i = 0; i < features.size(); ++i) {
        for (int f : features[i]) {
            e.row(static_cast<Eigen::Index>(i)) += model.emission.row(f);
        }
    }
    return e;
}

double crf_score_ids(const CrfModel& model, const EncodedFeatures& features, const std::vector<int>& tags) {
    if (tags.size() != features.size()) {
        throw DataError("crf_score: tag and token counts differ");
    }
    if (tags.empty()) {
        return 0.0;
    }
    const auto pen = model.transition_penalty();
    const auto start_pen = model.start_penalty();
    double score = model.start[tags[0]] + start_pen[tags[0]];
    for (std::size_t i = 0; i < tags.size(); ++i) {
        for (int f : features[i]) {
            score += model.emission(f, tags[i]);
        }
        if (i > 0) {
            score += model.transition(tags[i - 1], tags[i]) + pen(tags[i - 1], tags[i]);
        }
    }
    return score;
}

double crf_score(const CrfModel& model, const TokenFeatures& features, const std::vector<std::string>& tags) {
    std::vector<int> ids;
    for (const auto& t : tags) {
        ids.push_back(model.tag_index(t));
    }
    return crf_score_ids(model, encode_features(model, features), ids);
}

std::vector<int> viterbi_ids(const CrfModel& model, const EncodedFeatures& features) {
    const auto T = static_cast<Eigen::Index>(features.size());
    const Eigen::Index K = model.tag_count();
    if (T == 0) {
        return {};
    }
    const Eigen::MatrixXd e = emission_scores(model, features);
    const Eigen::MatrixXd trans = model.transition + model.transition_penalty();
    Eigen::MatrixXd delta(T, K);
    Eigen::MatrixXi back = Eigen::MatrixXi::Zero(T, K);
    delta.row(0) = (model.start + model.start_penalty()).transpose() + e.row(0);
    for (Eigen::Index i = 1; i < T; ++i) {
        for (Eigen::Index t = 0; t < K; ++t) {
            Eigen::Index best = 0;
            double best_score = delta(i - 1, 0) + trans(0, t);
            for (Eigen::Index s = 1; s < K; ++s) {
                const double sc = delta(i - 1, s) + trans(s, t);
                if (sc > best_score) {  // strict: lowest index wins ties
                    best_score = sc;
                    best = s;
                }
            }
            delta(i, t) = best_score + e(i, t);
            back(i, t) = static_cast<int>(best);
        }
    }
    std::vector<int> path(static_cast<std::size_t>(T));
    Eigen::Index last = 0;
    for (Eigen::Index t = 1; t < K; ++t) {
        if (delta(T - 1, t) > delta(T - 1, last)) {
            last = t;
        }
    }
    path.back() = static_cast<int>(last);
    for (Eigen::Index i = T - 1; i > 0; --i) {
        path[static_cast<std::size_t>(i - 1)] = back(i, path[static_cast<std::size_t>(i)]);
    }
    return path;
}

std::vector<std::string> viterbi(const CrfModel& model, const TokenFeatures& features) {
    std::vector<std::string> out;
    for (int t : viterbi_ids(model, encode_features(model, features))) {
        out.push_back(model.tags[static_cast<std::size_t>(t)]);
    }
    return out;
}

double log_partition(const CrfModel& model, const EncodedFeatures& features) {
    if (features.empty()) {
        return 0.0;
    }
    return forward_backward(model, features, false).log_z;
}

CrfObjective crf_objective(const CrfModel& model, const std::vector<CrfExample>& data, double l2) {
    CrfModel grad = model;
    grad.emission.setZero();
    grad.transition.setZero();
    grad.start.setZero();
    double value = 0.0;
    const Eigen::Index K = model.tag_count();
    for (const auto& ex : data) {
        if (ex.features.empty()) {
            continue;
        }
        const auto fb = forward_backward(model, ex.features, true);
        value += crf_score_ids(model, ex.features, ex.tags) - fb.log_z;
        const auto T = static_cast<Eigen::Index>(ex.features.size());
        for (Eigen::Index i = 0; i < T; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const Eigen::VectorXd marginal =
                (fb.alpha.row(i) + fb.beta.row(i)).array().transpose() - fb.log_z;
            Eigen::VectorXd residual = -marginal.array().exp().matrix();
            residual[ex.tags[ui]] += 1.0;
            for (int f : ex.features[ui]) {
                grad.emission.row(f) += residual.transpose();
            }
            if (i == 0) {
                grad.start += residual;
                continue;
            }
            for (Eigen::Index s = 0; s < K; ++s) {
                for (Eigen::Index t = 0; t < K; ++t) {
                    const double lp = fb.alpha(i - 1, s) + fb.trans(s, t) + fb.emissions(i, t) + fb.beta(i, t) -
                                      fb.log_z;
                    grad.transition(s, t) -= std::exp(lp);
                }
            }
            grad.transition(ex.tags[ui - 1], ex.tags[ui]) += 1.0;
        }
    }
    const Eigen::VectorXd theta = model.flatten();
    CrfObjective obj;
    obj.value = value - 0.5 * l2 * theta.squaredNorm();
    obj.gradient = grad.flatten() - l2 * theta;
    return obj;
}

CrfModel train_crf(const std::vector<TokenFeatures>& sequences,
                   const std::vector<std::vector<std::string>>& gold_tags, const CrfOptions& options) {
    std::set<std::string> techniques;
    for (const auto& seq : gold_tags) {
        for (const auto& t : seq) {
            if (t == "O") continue;
            if (!(is_begin(t) || is_inside(t))) {
                throw DataError("train_crf: malformed tag '" + t + "'");
            }
            techniques.insert(t.substr(2));
        }
    }
    return train_crf(sequences, gold_tags, bio_tag_set({techniques.begin(), techniques.end()}), options);
}

CrfModel train_crf(const std::vector<TokenFeatures>& sequences,
                   const std::vector<std::vector<std::string>>& gold_tags, std::vector<std::string> tag_set,
                   const CrfOptions& options) {
    if (sequences.empty()) {
        throw DataError("train_crf: no training sequences");
    }
    if (sequences.size() != gold_tags.size()) {
        throw UsageError("train_crf: sequence and tag list counts differ");
    }
    std::set<std::string> vocabulary;
    for (const auto& seq : sequences) {
        for (const auto& tok : seq) {
            vocabulary.insert(tok.begin(), tok.end());
        }
    }
    CrfModel model = make_crf(std::move(tag_set), {vocabulary.begin(), vocabulary.end()});
    model.l2 = options.l2;

    std::vector<CrfExample> data;
    for (std::size_t n = 0; n < sequences.size(); ++n) {
        if (sequences[n].size() != gold_tags[n].size()) {
            throw DataError("train_crf: sequence " + std::to_string(n) + " has mismatched tag count");
        }
        CrfExample ex;
        ex.features = encode_features(model, sequences[n]);
        for (const auto& t : gold_tags[n]) {
            ex.tags.push_back(model.tag_index(t));
        }
        data.push_back(std::move(ex));
    }

    Rng rng(options.seed);
    Eigen::VectorXd theta(model.parameter_count());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        theta[i] = (uniform01(rng) - 0.5) * 0.02;
    }
    model.unflatten(theta);

    double step = options.learning_rate / static_cast<double>(data.size());
    auto current = crf_objective(model, data, options.l2);
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        bool accepted = false;
        for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
            const Eigen::VectorXd next_theta = theta + step * current.gradient;
            model.unflatten(next_theta);
            auto next = crf_objective(model, data, options.l2);
            if (next.value >= current.value) {
                theta = next_theta;
                current = std::move(next);
                accepted = true;
                step *= 1.2;
            } else {
                step *= 0.5;
            }
        }
        model.unflatten(theta);
        if (options.objective_history != nullptr) {
            options.objective_history->push_back(current.value);
        }
        if (!accepted) {
            break;
        }
    }
    return model;
}

unsigned parse_token_families(std::string_view spec) {
    unsigned out = 0;
    for (const auto& raw : split(spec, ',')) {
        const auto name = trim(raw);
        if (name.empty()) continue;
        if (name == "all") out |= kFeatAll;
        else if (name == "word") out |= kFeatWord;
        else if (name == "pos") out |= kFeatPos;
        else if (name == "ner") out |= kFeatNer;
        else if (name == "polarity") out |= kFeatPolarity;
        else if (name == "shape") out |= kFeatShape;
        else if (name == "punct") out |= kFeatPunct;
        else if (name == "loaded") out |= kFeatLoaded;
        else throw UsageError("unknown token feature family '" + name + "'");
    }
    return out;
}

std::string format_token_families(unsigned families) {
    static const std::pair<unsigned, const char*> names[] = {
        {kFeatWord, "word"}, {kFeatPos, "pos"}, {kFeatNer, "ner"}, {kFeatPolarity, "polarity"},
        {kFeatShape, "shape"}, {kFeatPunct, "punct"}, {kFeatLoaded, "loaded"}};
    std::string out;
    for (const auto& [bit, name] : names) {
        if (families & bit) {
            out += (out.empty() ? "" : ",") + std::string(name);
        }
    }
    return out;
}

std::string shape_of(std::string_view token) {
    const auto cps = utf8_decode(token);
    const bool has_upper = std::any_of(cps.begin(), cps.end(), [](char32_t c) { return c >= U'A' && c <= U'Z'; });
    const bool has_lower = std::any_of(cps.begin(), cps.end(), [](char32_t c) { return c >= U'a' && c <= U'z'; });
    if (cps.size() >= 2 && has_upper && !has_lower) return "all-cap";
    if (!cps.empty() && cps[0] >= U'A' && cps[0] <= U'Z') return "first-cap";
    if (has_lower && !has_upper) return "lower";
    return "other";
}

std::vector<std::string> token_features(const Sentence& sentence, std::size_t i, const Lexicons& lex,
                                        const std::vector<bool>& loaded_mask, unsigned families) {
    const auto& tok = sentence.tokens.at(i);
    const auto lower = to_lower(tok.text);
    std::vector<std::string> f = {"bias"};
    if (families & kFeatWord) {
        f.push_back("w=" + lower);
    }
    if (families & kFeatPos) {
        f.push_back("pos=" + (tok.pos ? coarse_pos(*tok.pos) : std::string("NONE")));
    }
    if (families & kFeatNer) {
        f.push_back("ner=" + (tok.ner && !tok.ner->empty() ? *tok.ner : std::string("none")));
    }
    if (families & kFeatPolarity) {
        auto it = lex.sentiment.find(lower);
        const double s = it == lex.sentiment.end() ? 0.0 : it->second;
        f.push_back(s > 0 ? "pol=pos" : s < 0 ? "pol=neg" : "pol=neu");
    }
    if (families & kFeatShape) {
        f.push_back("shape=" + shape_of(tok.text));
    }
    if (families & kFeatPunct) {
        f.push_back(is_punctuation_token(tok.text) ? "punct=1" : "punct=0");
    }
    if (families & kFeatLoaded) {
        f.push_back(i < loaded_mask.size() && loaded_mask[i] ? "loaded=1" : "loaded=0");
    }
    return f;
}

TokenFeatures sentence_token_features(const Sentence& sentence, const Lexicons& lex, unsigned families) {
    const auto mask = loaded_phrase_mask(sentence, lex);
    TokenFeatures out;
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
        out.push_back(token_features(sentence, i, lex, mask, families));
    }
    return out;
}

std::string save_crf(const CrfModel& model) {
    std::ostringstream out;
    out << "propdetect-crf\t1\n";
    out << "l2\t" << format_double(model.l2) << '\n';
    out << "bio_constraints\t" << (model.bio_constraints ? 1 : 0) << '\n';
    for (const auto& t : model.tags) {
        out << "tag\t" << t << '\n';
    }
    for (const auto& f : model.features) {
        out << "feature\t" << f << '\n';
    }
    const Eigen::Index K = model.tag_count();
    for (Eigen::Index t = 0; t < K; ++t) {
        out << "start:" << t << '\t' << format_double(model.start[t]) << '\n';
    }
    for (Eigen::Index s = 0; s < K; ++s) {
        for (Eigen::Index t = 0; t < K; ++t) {
            out << "trans:" << s << ':' << t << '\t' << format_double(model.transition(s, t)) << '\n';
        }
    }
    for (Eigen::Index f = 0; f < model.emission.rows(); ++f) {
        for (Eigen::Index t = 0; t < K; ++t) {
            if (model.emission(f, t) != 0.0) {
                out << "emit:" << f << ':' << t << '\t' << format_double(model.emission(f, t)) << '\n';
            }
        }
    }
    return out.str();
}

CrfModel load_crf(std::string_view content) {
    const auto lines = split_lines(content);
    if (lines.empty() || lines[0] != "propdetect-crf\t1") {
        throw DataError("not a propdetect CRF model (version 1)");
    }
    std::vector<std::string> tags;
    std::vector<std::string> features;
    double l2 = 0.0;
    bool constraints = true;
    std::vector<std::pair<std::string, double>> weights;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        const auto tab = lines[n].find('\t');
        if (tab == std::string::npos) {
            throw DataError("CRF model line " + std::to_string(n + 1) + ": missing tab");
        }
        const std::string name = lines[n].substr(0, tab);
        const std::string value = lines[n].substr(tab + 1);
        if (name == "tag") {
            tags.push_back(value);
        } else if (name == "feature") {
            features.push_back(value);
        } else if (name == "bio_constraints") {
            constraints = value == "1";
        } else {
            double v = 0.0;
            if (!parse_double(value, v)) {
                throw DataError("CRF model line " + std::to_string(n + 1) + ": bad number");
            }
            if (name == "l2") {
                l2 = v;
            } else {
                weights.emplace_back(name, v);
            }
        }
    }
    CrfModel model = make_crf(std::move(tags), std::move(features), constraints);
    model.l2 = l2;
    const auto K = static_cast<long long>(model.tag_count());
    const auto F = static_cast<long long>(model.features.size());
    for (const auto& [name, v] : weights) {
        const auto parts = split(name, ':');
        std::vector<long long> idx;
        for (std::size_t i = 1; i < parts.size(); ++i) {
            long long x = 0;
            if (!parse_int(parts[i], x) || x < 0) {
                throw DataError("CRF model: bad weight name " + name);
            }
            idx.push_back(x);
        }
        if (parts[0] == "start" && idx.size() == 1 && idx[0] < K) {
            model.start[idx[0]] = v;
        } else if (parts[0] == "trans" && idx.size() == 2 && idx[0] < K && idx[1] < K) {
            model.transition(idx[0], idx[1]) = v;
        } else if (parts[0] == "emit" && idx.size() == 2 && idx[0] < F && idx[1] < K) {
            model.emission(idx[0], idx[1]) = v;
        } else {
            throw DataError("CRF model: bad weight name " + name);
        }
    }
    return model;
}

}  // namespace propdetect
