#pragma once

#include "dga/features.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace dga {

struct TrainingConfig {
    // logistic regression
    int epochs = 20;
    int batch_size = 128;
    double learning_rate = 0.1;
    double l2 = 1e-4;
    // random forest
    int tree_count = 100;
    int max_depth = 20;
    int min_leaf = 2;
    int features_per_split = 0;  // 0 selects ceil(sqrt(D))

    std::uint64_t seed = 42;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainingConfig& cfg);
void from_json(const nlohmann::json& j, TrainingConfig& cfg);

/// Sorted (index, value) pairs.
using SparseRow = std::vector<std::pair<int, double>>;

SparseRow to_sparse(const BigramCountVector& bigrams);
SparseRow to_sparse(const Eigen::Ref<const Eigen::VectorXd>& dense);

struct LogRegExample {
    SparseRow features;
    int class_id = 0;
};

/// Binary models (two classes) keep one weight row and a sigmoid head;
/// otherwise one row per class with a softmax head.
class LogisticRegressionModel {
public:
    LogisticRegressionModel(int class_count, int dimension);

    int class_count() const noexcept { return class_count_; }
    int dimension() const noexcept { return static_cast<int>(weights_.cols()); }
    bool is_binary() const noexcept { return class_count_ == 2; }

    Eigen::MatrixXd& weights() noexcept { return weights_; }
    const Eigen::MatrixXd& weights() const noexcept { return weights_; }
    Eigen::VectorXd& bias() noexcept { return bias_; }
    const Eigen::VectorXd& bias() const noexcept { return bias_; }

    nlohmann::json to_json() const;
    static LogisticRegressionModel from_json(const nlohmann::json& j);

private:
    int class_count_;
    Eigen::MatrixXd weights_;
    Eigen::VectorXd bias_;
};

struct LogRegTrainingLog {
    std::vector<double> epoch_loss;  // regularized objective after each epoch
};

/// Mini-batch gradient descent on mean cross-entropy + (l2 / 2) ||W||^2.
/// Throws SingleClassDataset or DimensionMismatch. class_count 0 infers it
/// from the largest class id.
LogisticRegressionModel train_logreg(std::span<const LogRegExample> examples, int dimension, const TrainingConfig& cfg,
                                     LogRegTrainingLog* log = nullptr, int class_count = 0);
/// Probability per class; length class_count.
Eigen::VectorXd predict_logreg(const LogisticRegressionModel& model, const SparseRow& features);
double logreg_objective(const LogisticRegressionModel& model, std::span<const LogRegExample> examples, double l2);

/// Flat node array. Internal nodes route x[feature] <= threshold to the left.
class DecisionTree {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0;
        int left = -1;
        int right = -1;
        std::vector<double> probabilities;  // leaves only

        bool is_leaf() const noexcept { return feature < 0; }
    };

    DecisionTree() = default;
    explicit DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<double>& leaf_distribution(std::span<const double> x) const;

private:
    std::vector<Node> nodes_;
};

struct ForestExample {
    std::vector<double> features;
    int class_id = 0;
};

class RandomForestModel {
public:
    RandomForestModel(int dimension, int class_count, std::vector<DecisionTree> trees, std::vector<std::uint64_t> tree_seeds);

    int dimension() const noexcept { return dimension_; }
    int class_count() const noexcept { return class_count_; }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    const std::vector<std::uint64_t>& tree_seeds() const noexcept { return tree_seeds_; }

    nlohmann::json to_json() const;
    static RandomForestModel from_json(const nlohmann::json& j);

private:
    int dimension_;
    int class_count_;
    std::vector<DecisionTree> trees_;
    std::vector<std::uint64_t> tree_seeds_;
};

/// Bootstrap-sampled Gini trees with a random feature subset per node; tree i
/// uses seed cfg.seed + i. Throws SingleClassDataset or DimensionMismatch.
RandomForestModel train_forest(std::span<const ForestExample> examples, int class_count, const TrainingConfig& cfg);
Eigen::VectorXd predict_forest(const RandomForestModel& model, std::span<const double> features);
/// Accuracy of each example scored only by trees whose bootstrap left it out.
/// Examples never out of bag are skipped.
double out_of_bag_accuracy(const RandomForestModel& model, std::span<const ForestExample> examples);

/// Index of the largest entry; ties go to the lowest index.
int argmax(const Eigen::Ref<const Eigen::VectorXd>& scores);

/// One binary forest per class (class c vs. the rest).
class OneVsRestForest {
public:
    explicit OneVsRestForest(std::vector<RandomForestModel> members);

    int class_count() const noexcept { return static_cast<int>(members_.size()); }
    const std::vector<RandomForestModel>& members() const noexcept { return members_; }

    /// Raw per-class "is c" probabilities.
    Eigen::VectorXd scores(std::span<const double> features) const;
    /// Scores rescaled to sum to one (uniform when every score is zero).
    Eigen::VectorXd predict(std::span<const double> features) const;
    int predict_class(std::span<const double> features) const { return argmax(scores(features)); }

    nlohmann::json to_json() const;
    static OneVsRestForest from_json(const nlohmann::json& j);

private:
    std::vector<RandomForestModel> members_;
};

OneVsRestForest train_one_vs_rest(std::span<const ForestExample> examples, int class_count, const TrainingConfig& cfg);

}  // namespace dga
