#include "propdetect/logreg.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "propdetect/error.hpp"
#include "propdetect/textio.hpp"

namespace propdetect {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) {
    return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double binary_f1(const std::vector<double>& p, const std::vector<bool>& y, double tau) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool pred = p[i] >= tau;
        tp += pred && y[i];
        fp += pred && !y[i];
        fn += !pred && y[i];
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    return prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
}

}  // namespace

double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

LogisticObjective logistic_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& weights, double bias, double l2) {
    const auto n = static_cast<double>(x.rows());
    const Eigen::VectorXd margin = (x * weights).array() + bias;
    LogisticObjective obj;
    Eigen::VectorXd residual(x.rows());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        // -log p(y|x) = softplus(m) - y m
        loss += softplus(margin[i]) - y[i] * margin[i];
        residual[i] = sigmoid(margin[i]) - y[i];
    }
    obj.value = loss / n + 0.5 * l2 * weights.squaredNorm();
    obj.grad_weights = x.transpose() * residual / n + l2 * weights;
    obj.grad_bias = residual.sum() / n;
    return obj;
}

LogRegModel train_logreg(const Eigen::MatrixXd& x, const std::vector<bool>& labels,
                         const LogRegOptions& options) {
    if (static_cast<std::size_t>(x.rows()) != labels.size()) {
        throw UsageError("train_logreg: feature rows and labels differ in length");
    }
    std::size_t positives = 0;
    for (bool b : labels) {
        positives += b ? 1 : 0;
    }
    if (positives == 0 || positives == labels.size()) {
        throw DataError("train_logreg: training set contains a single class");
    }
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        y[i] = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    }

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.cols());
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(x.cols());
    Eigen::MatrixXd z = x;
    if (options.standardize) {
        mean = x.colwise().mean();
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double sd = std::sqrt((x.col(j).array() - mean[j]).square().mean());
            scale[j] = sd > 1e-12 ? sd : 1.0;
        }
        z = (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
    double b = 0.0;
    double step = options.learning_rate;
    auto current = logistic_objective(z, y, w, b, options.l2);
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        bool accepted = false;
        for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
            const Eigen::VectorXd w_next = w - step * current.grad_weights;
            const double b_next = b - step * current.grad_bias;
            auto next = logistic_objective(z, y, w_next, b_next, options.l2);
            if (next.value <= current.value) {
                w = w_next;
                b = b_next;
                current = std::move(next);
                accepted = true;
            } else {
                step *= 0.5;
            }
        }
        if (options.loss_history != nullptr) {
            options.loss_history->push_back(current.value);
        }
        if (!accepted) {
            break;  // at a stationary point to machine precision
        }
    }

    LogRegModel model;
    model.l2 = options.l2;
    model.weights = w.array() / scale.array();
    model.bias = b - (w.array() * mean.array() / scale.array()).sum();
    return model;
}

LogRegModel train_logreg(const std::vector<FeatureVector>& features, const std::vector<bool>& labels,
                         const LogRegOptions& options) {
    if (features.empty()) {
        throw DataError("train_logreg: no training examples");
    }
    const auto& schema = features.front().schema_id;
    const auto width = features.front().size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(features.size()), width);
    for (std::size_t i = 0; i < features.size(); ++i) {
        check_schema(features[i], schema);
        if (features[i].size() != width) {
            throw DataError("train_logreg: feature width differs within one schema");
        }
        x.row(static_cast<Eigen::Index>(i)) = features[i].values.transpose();
    }
    auto model = train_logreg(x, labels, options);
    model.schema_id = schema;
    model.feature_names = features.front().names;
    return model;
}

double predict_proba(const LogRegModel& model, const FeatureVector& features) {
    check_schema(features, model.schema_id);
    if (features.size() != model.weights.size()) {
        throw DataError("predict_proba: feature width does not match model");
    }
    return sigmoid(model.weights.dot(features.values) + model.bias);
}

DecisionRule::DecisionRule(double t) : tau(t) {
    if (!(t > 0.0 && t < 1.0)) {
        throw UsageError("decision threshold must lie in (0, 1), got " + format_double(t));
    }
}

bool apply_threshold(double probability, const DecisionRule& rule) {
    return probability >= rule.tau;
}

double select_tau(const std::vector<double>& probabilities, const std::vector<bool>& labels,
                  const std::vector<double>& grid) {
    if (grid.empty()) {
        throw UsageError("empty threshold grid");
    }
    double best_tau = grid.front();
    double best_f1 = -1.0;
    for (double tau : grid) {
        const double f1 = binary_f1(probabilities, labels, tau);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_tau = tau;
        }
    }
    return best_tau;
}

std::string save_logreg(const LogRegModel& model) {
    std::ostringstream out;
    out << "propdetect-logreg\t1\n";
    out << "schema\t" << model.schema_id << '\n';
    out << "l2\t" << format_double(model.l2) << '\n';
    out << "bias\t" << format_double(model.bias) << '\n';
    for (Eigen::Index i = 0; i < model.weights.size(); ++i) {
        const auto& name = static_cast<std::size_t>(i) < model.feature_names.size()
                               ? model.feature_names[static_cast<std::size_t>(i)]
                               : "f" + std::to_string(i);
        out << "w:" << name << '\t' << format_double(model.weights[i]) << '\n';
    }
    return out.str();
}

LogRegModel load_logreg(std::string_view content) {
    const auto lines = split_lines(content);
    if (lines.empty() || lines[0] != "propdetect-logreg\t1") {
        throw DataError("not a propdetect logistic regression model (version 1)");
    }
    LogRegModel model;
    std::vector<double> weights;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        const auto tab = lines[n].rfind('\t');
        if (tab == std::string::npos) {
            throw DataError("model line " + std::to_string(n + 1) + ": missing tab");
        }
        const std::string name = lines[n].substr(0, tab);
        const std::string value = lines[n].substr(tab + 1);
        if (name == "schema") {
            model.schema_id = value;
            continue;
        }
        double v = 0.0;
        if (!parse_double(value, v)) {
            throw DataError("model line " + std::to_string(n + 1) + ": bad number '" + value + "'");
        }
        if (name == "l2") {
            model.l2 = v;
        } else if (name == "bias") {
            model.bias = v;
        } else if (name.rfind("w:", 0) == 0) {
            model.feature_names.push_back(name.substr(2));
            weights.push_back(v);
        } else {
            throw DataError("model line " + std::to_string(n + 1) + ": unknown entry '" + name + "'");
        }
    }
    model.weights = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    return model;
}

std::string format_sentence_predictions(const std::vector<SentencePrediction>& predictions) {
    std::string out;
    for (const auto& p : predictions) {
        out += p.article_id + '\t' + std::to_string(p.sentence_index) + '\t' + format_double(p.probability) +
               '\t' + p.model_id + '\n';
    }
    return out;
}

std::vector<SentencePrediction> read_sentence_predictions(const std::filesystem::path& path) {
    const auto lines = split_lines(read_file(path));
    std::vector<SentencePrediction> out;
    std::set<std::pair<std::string, SentenceKey>> seen;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        std::string_view line = lines[n];
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const auto where = path.string() + ":" + std::to_string(n + 1) + ": ";
        const auto f = split(line, '\t');
        long long index = 0;
        double p = 0.0;
        if (f.size() != 4 || f[0].empty() || f[3].empty() || !parse_int(f[1], index) || index < 1 ||
            !parse_double(f[2], p)) {
            throw DataError(where + "expected article_id, sentence_index, probability, model_id");
        }
        if (!(p >= 0.0 && p <= 1.0)) {
            throw DataError(where + "probability " + f[2] + " outside [0, 1]");
        }
        SentencePrediction pred{f[0], static_cast<int>(index), p, f[3]};
        if (!seen.emplace(pred.model_id, pred.key()).second) {
            throw DataError(where + "duplicate prediction for model " + f[3] + " sentence " + f[0] + ":" + f[1]);
        }
        out.push_back(std::move(pred));
    }
    return out;
}

}  // namespace propdetect
