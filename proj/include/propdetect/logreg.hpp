#pragma once

// L2-regularized logistic regression for sentence classification, the
// relaxed decision threshold, and sentence prediction files.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "propdetect/corpus.hpp"
#include "propdetect/features.hpp"

namespace propdetect {

struct LogRegModel {
    std::string schema_id;
    std::vector<std::string> feature_names;
    Eigen::VectorXd weights;
    double bias = 0.0;
    double l2 = 0.0;
};

struct LogRegOptions {
    double l2 = 1e-3;
    int epochs = 300;
    double learning_rate = 1.0;
    std::uint64_t seed = 0;  // unused: zero initialization is deterministic
    // Trains on z-scored columns and folds the scaling back into the weights.
    bool standardize = false;
    std::vector<double>* loss_history = nullptr;  // objective after each epoch
};

/// Mean logistic loss plus (l2/2)|w|^2 and its gradient. The bias is not
/// regularized.
struct LogisticObjective {
    double value = 0.0;
    Eigen::VectorXd grad_weights;
    double grad_bias = 0.0;
};

LogisticObjective logistic_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& weights, double bias, double l2);

double sigmoid(double z);

/// Full-batch gradient descent from zero; the step is halved whenever it would
/// increase the objective. Throws DataError on a single-class set.
LogRegModel train_logreg(const Eigen::MatrixXd& x, const std::vector<bool>& labels,
                         const LogRegOptions& options);
LogRegModel train_logreg(const std::vector<FeatureVector>& features, const std::vector<bool>& labels,
                         const LogRegOptions& options);

double predict_proba(const LogRegModel& model, const FeatureVector& features);

struct DecisionRule {
    double tau = 0.5;

    explicit DecisionRule(double t);
};

/// Inclusive: propaganda iff probability >= tau.
bool apply_threshold(double probability, const DecisionRule& rule);

inline const std::vector<double> kDefaultTauGrid = {0.50, 0.40, 0.35};

/// The grid entry with the best binary F1; ties keep the earlier entry.
double select_tau(const std::vector<double>& probabilities, const std::vector<bool>& labels,
                  const std::vector<double>& grid);

std::string save_logreg(const LogRegModel& model);
LogRegModel load_logreg(std::string_view content);

struct SentencePrediction {
    std::string article_id;
    int sentence_index = 0;
    double probability = 0.0;
    std::string model_id;

    SentenceKey key() const { return {article_id, sentence_index}; }
};

std::string format_sentence_predictions(const std::vector<SentencePrediction>& predictions);

/// Rejects malformed rows, probabilities outside [0, 1] and duplicate
/// (model, sentence) rows, naming the line.
std::vector<SentencePrediction> read_sentence_predictions(const std::filesystem::path& path);

}  // namespace propdetect
