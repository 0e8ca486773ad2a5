#pragma once

#include "dga/baselines.hpp"
#include "dga/domain.hpp"
#include "dga/hmm.hpp"
#include "dga/lstm.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dga {

enum class ModelKind { lstm, bigram, forest, hmm };

std::string_view to_string(ModelKind kind);
/// Throws InvalidArgument for unknown names.
ModelKind model_kind_from_string(std::string_view name);

/// Examples with their class ids. Class 0 is always benign; `examples` keeps
/// the original family labels (the HMM ensemble needs them in binary mode).
struct TrainingSet {
    std::vector<LabeledExample> examples;
    std::vector<int> classes;
    std::vector<std::string> class_names;

    int class_count() const noexcept { return static_cast<int>(class_names.size()); }
};

/// Rows of a per-epoch (or per-iteration) training log.
struct TrainingTrace {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void write_csv(std::ostream& out) const;
};

class Classifier {
public:
    virtual ~Classifier() = default;

    virtual std::string kind() const = 0;
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }
    int class_count() const noexcept { return static_cast<int>(class_names_.size()); }

    /// class_count x N probabilities.
    virtual Eigen::MatrixXd probabilities(std::span<const DomainName> domains) const = 0;
    /// Higher means more DGA-like. Defaults to 1 - P(benign).
    virtual std::vector<double> scores(std::span<const DomainName> domains) const;
    /// Binary decisions use score >= threshold.
    virtual double threshold() const { return 0.5; }
    /// Binary models threshold the score; multiclass models take the argmax.
    virtual std::vector<int> predict(std::span<const DomainName> domains) const;
    /// Family name for a DGA verdict, "benign" otherwise.
    virtual std::string family(const DomainName& domain) const;

    /// Versioned envelope: format_version, kind "classifier", model_kind, class_names, model.
    nlohmann::json to_json() const;

protected:
    explicit Classifier(std::vector<std::string> class_names) : class_names_(std::move(class_names)) {}
    virtual nlohmann::json model_json() const = 0;

private:
    std::vector<std::string> class_names_;
};

std::unique_ptr<Classifier> load_classifier(const nlohmann::json& j);
std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path);

/// Training recipe for one named model.
struct ModelConfig {
    ModelKind kind = ModelKind::lstm;
    std::string name;  // report name; empty means to_string(kind)
    TrainingConfig baseline;
    LstmTrainingConfig lstm;
    /// "float" or "double" arithmetic for the LSTM.
    std::string lstm_precision = "float";
    HmmTrainingConfig hmm;
    int hmm_states = 0;    // 0 selects default_state_count over the training set
    int hmm_families = 3;  // DGA models for this many largest families
    double hmm_eta = 0.0;

    std::string display_name() const { return name.empty() ? std::string(to_string(kind)) : name; }
    /// Copy with every model seed replaced.
    ModelConfig with_seed(std::uint64_t seed) const;
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
/// Unspecified fields keep their defaults. Throws InvalidArgument.
void from_json(const nlohmann::json& j, ModelConfig& cfg);

std::unique_ptr<Classifier> train_classifier(const ModelConfig& cfg, const TrainingSet& data, TrainingTrace* trace = nullptr);

/// Test stub: scores 1 when the normalized domain contains any pattern, else 0.
class PatternOracle final : public Classifier {
public:
    explicit PatternOracle(std::vector<std::string> patterns);

    std::string kind() const override { return "pattern_oracle"; }
    Eigen::MatrixXd probabilities(std::span<const DomainName> domains) const override;
    const std::vector<std::string>& patterns() const noexcept { return patterns_; }

protected:
    nlohmann::json model_json() const override;

private:
    std::vector<std::string> patterns_;
};

/// Scores every domain with the same constant.
class ConstantClassifier final : public Classifier {
public:
    explicit ConstantClassifier(double score) : Classifier({"benign", "dga"}), score_(score) {}

    std::string kind() const override { return "constant"; }
    Eigen::MatrixXd probabilities(std::span<const DomainName> domains) const override;

protected:
    nlohmann::json model_json() const override { return {{"score", score_}}; }

private:
    double score_;
};

/// Manual-feature forest with the n-gram tables it was trained against.
class ForestClassifier final : public Classifier {
public:
    ForestClassifier(std::vector<std::string> class_names, NGramTables tables, RandomForestModel forest);
    ForestClassifier(std::vector<std::string> class_names, NGramTables tables, OneVsRestForest forests);

    std::string kind() const override { return "forest"; }
    Eigen::MatrixXd probabilities(std::span<const DomainName> domains) const override;
    std::vector<double> features(const DomainName& domain) const;
    const NGramTables& tables() const noexcept { return tables_; }

protected:
    nlohmann::json model_json() const override;

private:
    NGramTables tables_;
    std::optional<RandomForestModel> forest_;  // binary
    std::optional<OneVsRestForest> one_vs_rest_;
};

class BigramClassifier final : public Classifier {
public:
    BigramClassifier(std::vector<std::string> class_names, LogisticRegressionModel model);

    std::string kind() const override { return "bigram"; }
    Eigen::MatrixXd probabilities(std::span<const DomainName> domains) const override;
    const LogisticRegressionModel& model() const noexcept { return model_; }

protected:
    nlohmann::json model_json() const override { return model_.to_json(); }

private:
    LogisticRegressionModel model_;
};

template <typename Scalar>
class LstmClassifier final : public Classifier {
public:
    LstmClassifier(std::vector<std::string> class_names, LstmModel<Scalar> model, int max_length);

    std::string kind() const override { return "lstm"; }
    Eigen::MatrixXd probabilities(std::span<const DomainName> domains) const override;
    const LstmModel<Scalar>& model() const noexcept { return model_; }
    int max_length() const noexcept { return max_length_; }
    /// Encoded input as the network sees it (keeps the last max_length characters).
    Sequence clip(const DomainName& domain) const;

protected:
    nlohmann::json model_json() const override;

private:
    LstmModel<Scalar> model_;
    int max_length_;
};

class HmmClassifier final : public Classifier {
public:
    explicit HmmClassifier(HmmEnsemble ensemble);

    std::string kind() const override { return "hmm"; }
    /// Column is (1 - s, s) with s the logistic of ratio - eta.
    Eigen::MatrixXd probabilities(std::span<const DomainName> domains) const override;
    /// The log-likelihood ratio.
    std::vector<double> scores(std::span<const DomainName> domains) const override;
    double threshold() const override { return ensemble_.eta; }
    std::string family(const DomainName& domain) const override;
    const HmmEnsemble& ensemble() const noexcept { return ensemble_; }

protected:
    nlohmann::json model_json() const override { return ensemble_.to_json(); }

private:
    HmmEnsemble ensemble_;
};

}  // namespace dga
