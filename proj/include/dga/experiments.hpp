#pragma once

#include "dga/classifier.hpp"
#include "dga/data.hpp"
#include "dga/features.hpp"
#include "dga/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dga {

/// fold[i] is the fold of example i.
struct DatasetSplit {
    int k = 0;
    std::vector<int> fold;

    std::vector<std::size_t> test_indices(int f) const;
    std::vector<std::size_t> train_indices(int f) const;
};

/// Stratified by label name: each class is shuffled with `seed` and dealt
/// round-robin, continuing the rotation from the previous class so that
/// global fold sizes also differ by at most one. Throws TooFewExamples.
DatasetSplit stratified_kfold(std::span<const LabeledExample> examples, int k, std::uint64_t seed);

using Trainer = std::function<std::unique_ptr<Classifier>(const TrainingSet& data, std::uint64_t seed)>;

struct ModelSpec {
    std::string name;
    Trainer train;
    bool multiclass = true;  // false: skipped by the multiclass designs
};

ModelSpec model_spec(const ModelConfig& cfg);

struct ExperimentHooks {
    /// Called after each model is trained (fold -1 for the single holdout split).
    std::function<void(const std::string& model, int fold, const Classifier& classifier)> on_trained;
    std::function<void(const std::string& message)> progress;
};

struct FamilyRecall {
    std::string family;
    std::int64_t support = 0;
    double recall = 0;
    bool held_out = false;
};

struct ModelResult {
    std::string name;
    std::vector<std::string> class_names;
    ConfusionMatrix confusion{2};
    ClassificationReport report;
    std::optional<RocCurve> roc;
    std::vector<FamilyRecall> family_recall;
    double benign_fpr = 0;  // binary designs
    double train_seconds = 0;
    double eval_seconds = 0;
};

struct DendrogramMerge {
    std::vector<std::string> left;
    std::vector<std::string> right;
    double distance = 0;
};

struct SuperFamilyPartition {
    std::map<std::string, int> cluster_of;
    std::vector<DendrogramMerge> merges;  // full dendrogram, distances non-decreasing
    double threshold = 0.2;

    int cluster_count() const;
    /// Members of each cluster, sorted.
    std::vector<std::vector<std::string>> clusters() const;
    nlohmann::json to_json() const;
};

struct ExperimentResult {
    std::string design;
    std::uint64_t seed = 0;
    int k = 0;
    std::vector<ModelResult> models;
    std::vector<std::string> skipped_models;
    std::vector<std::string> held_out_families;
    std::optional<SuperFamilyPartition> partition;

    const ModelResult& model(const std::string& name) const;
};

/// All DGA families collapse into one positive class; k-fold training with
/// pooled test scores producing one ROC per model.
ExperimentResult run_binary(std::span<const ModelSpec> models, const Dataset& dataset, int k, std::uint64_t seed,
                            const ExperimentHooks* hooks = nullptr);
ExperimentResult run_binary(std::span<const ModelSpec> models, const Dataset& dataset, const DatasetSplit& split,
                            std::uint64_t seed, const ExperimentHooks* hooks = nullptr);

/// The holdout_count smallest families (support, then name) are left out of
/// training. The remaining data gets a stratified 90/10 split; the test set is
/// that 10% plus every held-out example. Throws TooFewFamilies.
ExperimentResult run_holdout_families(std::span<const ModelSpec> models, const Dataset& dataset, int holdout_count,
                                      std::uint64_t seed, const ExperimentHooks* hooks = nullptr);

/// Benign plus one class per family (sorted names). Models with
/// `multiclass == false` are skipped and listed.
ExperimentResult run_multiclass(std::span<const ModelSpec> models, const Dataset& dataset, int k, std::uint64_t seed,
                                const ExperimentHooks* hooks = nullptr);

/// 1 - cosine similarity, clamped to [0, 2]. Throws ZeroVector.
double cosine_distance(const UnigramDistribution& p, const UnigramDistribution& q);

/// Average-linkage agglomerative clustering; clusters whose linkage is at
/// most `threshold` are merged. Cluster ids follow each cluster's smallest member name.
SuperFamilyPartition super_families(const std::map<std::string, UnigramDistribution>& families, double threshold = 0.2);
std::map<std::string, UnigramDistribution> family_unigrams(const Dataset& dataset);

/// Name used for cluster `id` after relabelling.
std::string super_family_name(int id);
Dataset relabel_super_families(const Dataset& dataset, const SuperFamilyPartition& partition);
ExperimentResult run_superfamily_multiclass(std::span<const ModelSpec> models, const Dataset& dataset,
                                            const SuperFamilyPartition& partition, int k, std::uint64_t seed,
                                            const ExperimentHooks* hooks = nullptr);

/// Experiment description as read from JSON.
struct ExperimentConfig {
    std::string design = "binary";  // binary | holdout | multiclass | superfamily
    std::vector<std::filesystem::path> datasets;
    std::vector<GeneratorSpec> generators;
    std::vector<std::filesystem::path> benign_csv;
    std::vector<std::filesystem::path> dga_feeds;
    std::optional<std::filesystem::path> family_patterns;
    std::vector<ModelConfig> models;
    int k = 10;
    int holdout_count = 10;
    double threshold = 0.2;
    std::uint64_t seed = 42;

    /// Relative paths resolve against `base`. Throws InvalidArgument.
    static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
    nlohmann::json to_json() const;
};

Dataset load_experiment_dataset(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentHooks* hooks = nullptr);

/// Writes reports, ROC CSVs, confusion matrices, per-family recall, the ROC
/// SVG, the dendrogram, manifest.json (with the config hash) and timings.json.
/// Everything except timings.json is a pure function of the inputs.
void write_results(const ExperimentResult& result, const nlohmann::json& config, const std::filesystem::path& dir);

}  // namespace dga
