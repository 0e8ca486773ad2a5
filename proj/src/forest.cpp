#include "dga/baselines.hpp"

#include "dga/error.hpp"
#include "dga/random.hpp"
#include "dga/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dga {

int argmax(const Eigen::Ref<const Eigen::VectorXd>& scores) {
    int best = 0;
    for (Eigen::Index i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = static_cast<int>(i);
    }
    return best;
}

const std::vector<double>& DecisionTree::leaf_distribution(std::span<const double> x) const {
    std::size_t node = 0;
    while (!nodes_[node].is_leaf()) {
        const Node& n = nodes_[node];
        node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[node].probabilities;
}

RandomForestModel::RandomForestModel(int dimension, int class_count, std::vector<DecisionTree> trees,
                                     std::vector<std::uint64_t> tree_seeds)
    : dimension_(dimension), class_count_(class_count), trees_(std::move(trees)), tree_seeds_(std::move(tree_seeds)) {
    if (trees_.empty() || trees_.size() != tree_seeds_.size()) {
        throw Error(ErrorCode::InvalidArgument, "forest needs one seed per tree and at least one tree");
    }
}

nlohmann::json RandomForestModel::to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : trees_) {
        std::vector<int> feature, left, right;
        std::vector<double> threshold, leaf_probabilities;
        for (const auto& node : tree.nodes()) {
            feature.push_back(node.feature);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            if (node.is_leaf()) {
                leaf_probabilities.insert(leaf_probabilities.end(), node.probabilities.begin(), node.probabilities.end());
            }
        }
        trees.push_back({{"feature", feature},
                         {"threshold", threshold},
                         {"left", left},
                         {"right", right},
                         {"leaf_probabilities", leaf_probabilities}});
    }
    return {{"format_version", kFormatVersion},
            {"kind", "random_forest"},
            {"dimension", dimension_},
            {"class_count", class_count_},
            {"tree_seeds", tree_seeds_},
            {"trees", trees}};
}

RandomForestModel RandomForestModel::from_json(const nlohmann::json& j) {
    check_format(j, "random_forest");
    const int dimension = j.at("dimension").get<int>();
    const int class_count = j.at("class_count").get<int>();
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) {
        auto feature = t.at("feature").get<std::vector<int>>();
        auto threshold = t.at("threshold").get<std::vector<double>>();
        auto left = t.at("left").get<std::vector<int>>();
        auto right = t.at("right").get<std::vector<int>>();
        auto leaf = t.at("leaf_probabilities").get<std::vector<double>>();
        const std::size_t n = feature.size();
        if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n) {
            throw Error(ErrorCode::ModelUnreadable, "tree arrays disagree in length");
        }
        std::vector<DecisionTree::Node> nodes(n);
        std::size_t offset = 0;
        for (std::size_t i = 0; i < n; ++i) {
            auto& node = nodes[i];
            node.feature = feature[i];
            node.threshold = threshold[i];
            node.left = left[i];
            node.right = right[i];
            if (node.is_leaf()) {
                if (offset + static_cast<std::size_t>(class_count) > leaf.size()) {
                    throw Error(ErrorCode::ModelUnreadable, "leaf probabilities truncated");
                }
                node.probabilities.assign(leaf.begin() + static_cast<std::ptrdiff_t>(offset),
                                          leaf.begin() + static_cast<std::ptrdiff_t>(offset) + class_count);
                offset += static_cast<std::size_t>(class_count);
            } else if (node.feature >= dimension || node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
                       node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n)) {
                throw Error(ErrorCode::ModelUnreadable, "invalid tree node");
            }
        }
        trees.emplace_back(std::move(nodes));
    }
    return RandomForestModel(dimension, class_count, std::move(trees), j.at("tree_seeds").get<std::vector<std::uint64_t>>());
}

namespace {

struct TreeBuilder {
    std::span<const ForestExample> examples;
    int class_count;
    int dimension;
    const TrainingConfig& cfg;
    int features_per_split;
    Rng& rng;
    std::vector<DecisionTree::Node> nodes;
    std::vector<int> feature_pool;

    static double gini(std::span<const double> counts, double total) {
        double sum_sq = 0;
        for (double c : counts) sum_sq += c * c;
        return 1.0 - sum_sq / (total * total);
    }

    int make_leaf(std::span<const std::size_t> sample) {
        DecisionTree::Node leaf;
        leaf.probabilities.assign(static_cast<std::size_t>(class_count), 0.0);
        for (std::size_t i : sample) leaf.probabilities[static_cast<std::size_t>(examples[i].class_id)] += 1.0;
        for (auto& p : leaf.probabilities) p /= static_cast<double>(sample.size());
        nodes.push_back(std::move(leaf));
        return static_cast<int>(nodes.size() - 1);
    }

    // Builds the subtree for `sample` (reordered in place) and returns its node index.
    int build(std::span<std::size_t> sample, int depth) {
        std::vector<double> counts(static_cast<std::size_t>(class_count), 0.0);
        for (std::size_t i : sample) counts[static_cast<std::size_t>(examples[i].class_id)] += 1.0;
        const auto n = static_cast<double>(sample.size());
        const double parent_gini = gini(counts, n);
        const auto min_leaf = static_cast<std::size_t>(cfg.min_leaf);
        if (depth >= cfg.max_depth || parent_gini <= 0.0 || sample.size() < 2 * min_leaf) return make_leaf(sample);

        // partial Fisher-Yates picks the candidate features for this node
        for (int k = 0; k < features_per_split; ++k) {
            auto j = static_cast<std::size_t>(k) + rng.below(static_cast<std::uint64_t>(dimension - k));
            std::swap(feature_pool[static_cast<std::size_t>(k)], feature_pool[j]);
        }

        int best_feature = -1;
        double best_threshold = 0;
        double best_impurity = parent_gini - 1e-12;
        std::vector<std::pair<double, int>> column(sample.size());
        std::vector<double> left_counts(counts.size());
        std::vector<double> right_counts(counts.size());
        for (int k = 0; k < features_per_split; ++k) {
            const int f = feature_pool[static_cast<std::size_t>(k)];
            for (std::size_t s = 0; s < sample.size(); ++s) {
                const auto& ex = examples[sample[s]];
                column[s] = {ex.features[static_cast<std::size_t>(f)], ex.class_id};
            }
            std::sort(column.begin(), column.end());
            std::fill(left_counts.begin(), left_counts.end(), 0.0);
            right_counts = counts;
            for (std::size_t s = 0; s + 1 < column.size(); ++s) {
                left_counts[static_cast<std::size_t>(column[s].second)] += 1.0;
                right_counts[static_cast<std::size_t>(column[s].second)] -= 1.0;
                const double lo = column[s].first;
                const double hi = column[s + 1].first;
                if (lo == hi) continue;
                const std::size_t left_n = s + 1;
                const std::size_t right_n = column.size() - left_n;
                if (left_n < min_leaf || right_n < min_leaf) continue;
                const double impurity = (static_cast<double>(left_n) * gini(left_counts, static_cast<double>(left_n)) +
                                         static_cast<double>(right_n) * gini(right_counts, static_cast<double>(right_n))) /
                                        n;
                if (impurity < best_impurity) {
                    best_impurity = impurity;
                    best_feature = f;
                    best_threshold = lo + (hi - lo) / 2;
                    if (best_threshold >= hi) best_threshold = lo;
                }
            }
        }
        if (best_feature < 0) return make_leaf(sample);

        auto middle = std::partition(sample.begin(), sample.end(), [&](std::size_t i) {
            return examples[i].features[static_cast<std::size_t>(best_feature)] <= best_threshold;
        });
        const auto split = static_cast<std::size_t>(middle - sample.begin());

        const int index = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[static_cast<std::size_t>(index)].feature = best_feature;
        nodes[static_cast<std::size_t>(index)].threshold = best_threshold;
        const int left = build(sample.subspan(0, split), depth + 1);
        const int right = build(sample.subspan(split), depth + 1);
        nodes[static_cast<std::size_t>(index)].left = left;
        nodes[static_cast<std::size_t>(index)].right = right;
        return index;
    }
};

std::vector<std::size_t> bootstrap_indices(Rng& rng, std::size_t n) {
    std::vector<std::size_t> sample(n);
    for (auto& i : sample) i = rng.below(n);
    return sample;
}

void validate_forest_input(std::span<const ForestExample> examples, int class_count, int& dimension) {
    if (class_count < 2) throw Error(ErrorCode::SingleClassDataset, "forest needs >= 2 classes");
    if (examples.empty()) throw Error(ErrorCode::SingleClassDataset, "forest needs training examples");
    dimension = static_cast<int>(examples.front().features.size());
    if (dimension == 0) throw Error(ErrorCode::DimensionMismatch, "forest features are empty");
    std::vector<bool> seen(static_cast<std::size_t>(class_count), false);
    int distinct = 0;
    for (const auto& ex : examples) {
        if (static_cast<int>(ex.features.size()) != dimension) {
            throw Error(ErrorCode::DimensionMismatch, "forest examples disagree in feature dimension");
        }
        if (ex.class_id < 0 || ex.class_id >= class_count) {
            throw Error(ErrorCode::InvalidArgument, "class id outside class count");
        }
        if (!seen[static_cast<std::size_t>(ex.class_id)]) {
            seen[static_cast<std::size_t>(ex.class_id)] = true;
            ++distinct;
        }
    }
    if (distinct < 2) throw Error(ErrorCode::SingleClassDataset, "forest needs examples from >= 2 classes");
}

}  // namespace

RandomForestModel train_forest(std::span<const ForestExample> examples, int class_count, const TrainingConfig& cfg) {
    cfg.validate();
    int dimension = 0;
    validate_forest_input(examples, class_count, dimension);
    int per_split = cfg.features_per_split > 0 ? cfg.features_per_split
                                               : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(dimension))));
    per_split = std::min(per_split, dimension);

    std::vector<DecisionTree> trees;
    std::vector<std::uint64_t> seeds;
    for (int t = 0; t < cfg.tree_count; ++t) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(t);
        Rng rng(seed);
        auto sample = bootstrap_indices(rng, examples.size());
        TreeBuilder builder{examples, class_count, dimension, cfg, per_split, rng, {}, {}};
        builder.feature_pool.resize(static_cast<std::size_t>(dimension));
        std::iota(builder.feature_pool.begin(), builder.feature_pool.end(), 0);
        builder.build(sample, 0);
        trees.emplace_back(std::move(builder.nodes));
        seeds.push_back(seed);
    }
    return RandomForestModel(dimension, class_count, std::move(trees), std::move(seeds));
}

Eigen::VectorXd predict_forest(const RandomForestModel& model, std::span<const double> features) {
    if (static_cast<int>(features.size()) != model.dimension()) {
        throw Error(ErrorCode::DimensionMismatch, "forest expects " + std::to_string(model.dimension()) + " features");
    }
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(model.class_count());
    for (const auto& tree : model.trees()) {
        sum += Eigen::Map<const Eigen::VectorXd>(tree.leaf_distribution(features).data(), model.class_count());
    }
    return sum / static_cast<double>(model.trees().size());
}

double out_of_bag_accuracy(const RandomForestModel& model, std::span<const ForestExample> examples) {
    const std::size_t n = examples.size();
    Eigen::MatrixXd votes = Eigen::MatrixXd::Zero(model.class_count(), static_cast<Eigen::Index>(n));
    std::vector<bool> scored(n, false);
    for (std::size_t t = 0; t < model.trees().size(); ++t) {
        Rng rng(model.tree_seeds()[t]);
        std::vector<bool> in_bag(n, false);
        for (std::size_t i : bootstrap_indices(rng, n)) in_bag[i] = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (in_bag[i]) continue;
            const auto& dist = model.trees()[t].leaf_distribution(examples[i].features);
            votes.col(static_cast<Eigen::Index>(i)) += Eigen::Map<const Eigen::VectorXd>(dist.data(), model.class_count());
            scored[i] = true;
        }
    }
    std::size_t correct = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!scored[i]) continue;
        ++total;
        if (argmax(votes.col(static_cast<Eigen::Index>(i))) == examples[i].class_id) ++correct;
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

OneVsRestForest::OneVsRestForest(std::vector<RandomForestModel> members) : members_(std::move(members)) {
    if (members_.size() < 2) throw Error(ErrorCode::InvalidArgument, "one-vs-rest needs >= 2 classes");
    for (const auto& m : members_) {
        if (m.class_count() != 2 || m.dimension() != members_.front().dimension()) {
            throw Error(ErrorCode::DimensionMismatch, "one-vs-rest members must be binary forests of equal dimension");
        }
    }
}

Eigen::VectorXd OneVsRestForest::scores(std::span<const double> features) const {
    Eigen::VectorXd out(class_count());
    for (int c = 0; c < class_count(); ++c) out[c] = predict_forest(members_[static_cast<std::size_t>(c)], features)[1];
    return out;
}

Eigen::VectorXd OneVsRestForest::predict(std::span<const double> features) const {
    Eigen::VectorXd s = scores(features);
    const double total = s.sum();
    if (total <= 0) return Eigen::VectorXd::Constant(class_count(), 1.0 / class_count());
    return s / total;
}

nlohmann::json OneVsRestForest::to_json() const {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : members_) members.push_back(m.to_json());
    return {{"format_version", kFormatVersion}, {"kind", "one_vs_rest_forest"}, {"members", members}};
}

OneVsRestForest OneVsRestForest::from_json(const nlohmann::json& j) {
    check_format(j, "one_vs_rest_forest");
    std::vector<RandomForestModel> members;
    for (const auto& m : j.at("members")) members.push_back(RandomForestModel::from_json(m));
    return OneVsRestForest(std::move(members));
}

OneVsRestForest train_one_vs_rest(std::span<const ForestExample> examples, int class_count, const TrainingConfig& cfg) {
    if (class_count < 2) throw Error(ErrorCode::SingleClassDataset, "one-vs-rest needs >= 2 classes");
    std::vector<RandomForestModel> members;
    std::vector<ForestExample> relabeled(examples.begin(), examples.end());
    for (int c = 0; c < class_count; ++c) {
        int positives = 0;
        for (std::size_t i = 0; i < examples.size(); ++i) {
            relabeled[i].class_id = examples[i].class_id == c ? 1 : 0;
            positives += relabeled[i].class_id;
        }
        TrainingConfig member_cfg = cfg;
        member_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(c));
        if (positives == 0 || positives == static_cast<int>(examples.size())) {
            // class absent (or alone) in this training set: constant member
            DecisionTree::Node leaf;
            leaf.probabilities = positives == 0 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
            const int dimension = examples.empty() ? 1 : static_cast<int>(examples.front().features.size());
            members.emplace_back(dimension, 2, std::vector<DecisionTree>{DecisionTree({leaf})},
                                 std::vector<std::uint64_t>{member_cfg.seed});
            continue;
        }
        members.push_back(train_forest(relabeled, 2, member_cfg));
    }
    return OneVsRestForest(std::move(members));
}

}  // namespace dga
