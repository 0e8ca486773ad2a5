#include "dga/baselines.hpp"

#include "dga/error.hpp"
#include "dga/random.hpp"
#include "dga/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dga {

void TrainingConfig::validate() const {
    if (epochs <= 0 || batch_size <= 0 || learning_rate <= 0 || l2 < 0 || tree_count <= 0 || max_depth <= 0 ||
        min_leaf <= 0 || features_per_split < 0) {
        throw Error(ErrorCode::InvalidArgument, "training configuration values must be positive");
    }
}

void to_json(nlohmann::json& j, const TrainingConfig& cfg) {
    j = nlohmann::json{{"epochs", cfg.epochs},
                       {"batch_size", cfg.batch_size},
                       {"learning_rate", cfg.learning_rate},
                       {"l2", cfg.l2},
                       {"tree_count", cfg.tree_count},
                       {"max_depth", cfg.max_depth},
                       {"min_leaf", cfg.min_leaf},
                       {"features_per_split", cfg.features_per_split},
                       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, TrainingConfig& cfg) {
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.l2 = j.value("l2", cfg.l2);
    cfg.tree_count = j.value("tree_count", cfg.tree_count);
    cfg.max_depth = j.value("max_depth", cfg.max_depth);
    cfg.min_leaf = j.value("min_leaf", cfg.min_leaf);
    cfg.features_per_split = j.value("features_per_split", cfg.features_per_split);
    cfg.seed = j.value("seed", cfg.seed);
}

SparseRow to_sparse(const BigramCountVector& bigrams) {
    SparseRow row;
    row.reserve(bigrams.counts.size());
    for (const auto& [id, count] : bigrams.counts) row.emplace_back(id, static_cast<double>(count));
    return row;
}

SparseRow to_sparse(const Eigen::Ref<const Eigen::VectorXd>& dense) {
    SparseRow row;
    for (Eigen::Index i = 0; i < dense.size(); ++i) {
        if (dense[i] != 0.0) row.emplace_back(static_cast<int>(i), dense[i]);
    }
    return row;
}

LogisticRegressionModel::LogisticRegressionModel(int class_count, int dimension) : class_count_(class_count) {
    if (class_count < 2 || dimension < 1) {
        throw Error(ErrorCode::InvalidArgument, "logistic regression needs >= 2 classes and dimension >= 1");
    }
    const int rows = class_count == 2 ? 1 : class_count;
    weights_ = Eigen::MatrixXd::Zero(rows, dimension);
    bias_ = Eigen::VectorXd::Zero(rows);
}

nlohmann::json LogisticRegressionModel::to_json() const {
    return {{"format_version", 1},
            {"kind", "logistic_regression"},
            {"class_count", class_count_},
            {"rows", weights_.rows()},
            {"dimension", weights_.cols()},
            {"weights", flatten_row_major(weights_)},
            {"bias", flatten(bias_)}};
}

LogisticRegressionModel LogisticRegressionModel::from_json(const nlohmann::json& j) {
    check_format(j, "logistic_regression");
    LogisticRegressionModel model(j.at("class_count").get<int>(), j.at("dimension").get<int>());
    model.weights_ = unflatten_row_major(j.at("weights"), model.weights_.rows(), model.weights_.cols());
    model.bias_ = unflatten(j.at("bias"), model.bias_.size());
    return model;
}

namespace {

Eigen::VectorXd logits(const LogisticRegressionModel& model, const SparseRow& x) {
    Eigen::VectorXd z = model.bias();
    for (const auto& [index, value] : x) z += model.weights().col(index) * value;
    return z;
}

Eigen::VectorXd probabilities_from_logits(const LogisticRegressionModel& model, const Eigen::VectorXd& z) {
    if (model.is_binary()) {
        double p = 1.0 / (1.0 + std::exp(-z[0]));
        Eigen::VectorXd out(2);
        out << 1.0 - p, p;
        return out;
    }
    Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
    return e / e.sum();
}

void check_dimension(const SparseRow& x, int dimension) {
    for (const auto& [index, value] : x) {
        if (index < 0 || index >= dimension) {
            throw Error(ErrorCode::DimensionMismatch,
                        "feature index " + std::to_string(index) + " outside dimension " + std::to_string(dimension));
        }
    }
}

// d(loss)/d(logits) for one example.
Eigen::VectorXd logit_gradient(const LogisticRegressionModel& model, const Eigen::VectorXd& z, int label) {
    if (model.is_binary()) {
        double p = 1.0 / (1.0 + std::exp(-z[0]));
        return Eigen::VectorXd::Constant(1, p - (label == 1 ? 1.0 : 0.0));
    }
    Eigen::VectorXd g = probabilities_from_logits(model, z);
    g[label] -= 1.0;
    return g;
}

double example_loss(const LogisticRegressionModel& model, const Eigen::VectorXd& z, int label) {
    if (model.is_binary()) {
        // softplus(z) - y z, computed stably
        double v = z[0];
        double softplus = v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
        return softplus - (label == 1 ? v : 0.0);
    }
    double m = z.maxCoeff();
    double lse = m + std::log((z.array() - m).exp().sum());
    return lse - z[label];
}

}  // namespace

double logreg_objective(const LogisticRegressionModel& model, std::span<const LogRegExample> examples, double l2) {
    double loss = 0;
    for (const auto& ex : examples) loss += example_loss(model, logits(model, ex.features), ex.class_id);
    loss /= static_cast<double>(std::max<std::size_t>(examples.size(), 1));
    return loss + 0.5 * l2 * model.weights().squaredNorm();
}

Eigen::VectorXd predict_logreg(const LogisticRegressionModel& model, const SparseRow& features) {
    check_dimension(features, model.dimension());
    return probabilities_from_logits(model, logits(model, features));
}

LogisticRegressionModel train_logreg(std::span<const LogRegExample> examples, int dimension, const TrainingConfig& cfg,
                                     LogRegTrainingLog* log, int class_count) {
    cfg.validate();
    int max_class = -1;
    std::vector<int> seen;
    for (const auto& ex : examples) {
        if (ex.class_id < 0) throw Error(ErrorCode::InvalidArgument, "negative class id");
        max_class = std::max(max_class, ex.class_id);
        check_dimension(ex.features, dimension);
        if (std::find(seen.begin(), seen.end(), ex.class_id) == seen.end()) seen.push_back(ex.class_id);
    }
    if (seen.size() < 2) throw Error(ErrorCode::SingleClassDataset, "logistic regression needs two classes");

    if (class_count != 0 && class_count <= max_class) {
        throw Error(ErrorCode::InvalidArgument, "class id outside the declared class count");
    }
    LogisticRegressionModel model(class_count != 0 ? class_count : max_class + 1, dimension);
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    Eigen::MatrixXd grad_w = Eigen::MatrixXd::Zero(model.weights().rows(), dimension);
    Eigen::VectorXd grad_b = Eigen::VectorXd::Zero(model.bias().size());
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            grad_w.setZero();
            grad_b.setZero();
            for (std::size_t k = start; k < end; ++k) {
                const auto& ex = examples[order[k]];
                Eigen::VectorXd g = logit_gradient(model, logits(model, ex.features), ex.class_id);
                for (const auto& [index, value] : ex.features) grad_w.col(index) += g * value;
                grad_b += g;
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            model.weights() -= cfg.learning_rate * (grad_w * scale + cfg.l2 * model.weights());
            model.bias() -= cfg.learning_rate * grad_b * scale;
        }
        if (log != nullptr) log->epoch_loss.push_back(logreg_objective(model, examples, cfg.l2));
    }
    return model;
}

}  // namespace dga
