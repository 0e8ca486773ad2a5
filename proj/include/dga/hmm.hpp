#pragma once

#include "dga/domain.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dga {

/// Discrete-emission HMM: initial distribution (S), transitions (S x S) and
/// emissions (S x V). Rows are stochastic; log tables are cached.
class HmmModel {
public:
    HmmModel(Eigen::VectorXd initial, Eigen::MatrixXd transition, Eigen::MatrixXd emission);

    int states() const noexcept { return static_cast<int>(initial_.size()); }
    int symbols() const noexcept { return static_cast<int>(emission_.cols()); }
    const Eigen::VectorXd& initial() const noexcept { return initial_; }
    const Eigen::MatrixXd& transition() const noexcept { return transition_; }
    const Eigen::MatrixXd& emission() const noexcept { return emission_; }
    const Eigen::VectorXd& log_initial() const noexcept { return log_initial_; }
    const Eigen::MatrixXd& log_transition() const noexcept { return log_transition_; }
    const Eigen::MatrixXd& log_emission() const noexcept { return log_emission_; }

    nlohmann::json to_json() const;
    static HmmModel from_json(const nlohmann::json& j);

private:
    Eigen::VectorXd initial_;
    Eigen::MatrixXd transition_;
    Eigen::MatrixXd emission_;
    Eigen::VectorXd log_initial_;
    Eigen::MatrixXd log_transition_;
    Eigen::MatrixXd log_emission_;
};

struct HmmTrainingConfig {
    int max_iterations = 100;
    /// Stop once the mean per-sequence log-likelihood improves by less than this.
    double tolerance = 1e-6;
    double probability_floor = 1e-10;
    std::uint64_t seed = 42;
};

void to_json(nlohmann::json& j, const HmmTrainingConfig& cfg);
void from_json(const nlohmann::json& j, HmmTrainingConfig& cfg);

struct HmmTrainingLog {
    /// Mean per-sequence log-likelihood of the parameters entering each EM iteration,
    /// followed by that of the returned model.
    std::vector<double> mean_log_likelihood;
};

/// Baum-Welch from rows drawn from a seeded symmetric Dirichlet(1). Throws
/// EmptySequenceSet (no or empty sequences) or IndexOutOfVocabulary.
HmmModel train_hmm(std::span<const Sequence> sequences, int states, int symbols, const HmmTrainingConfig& cfg,
                   HmmTrainingLog* log = nullptr);

/// log P(sequence | model) by the log-space forward recursion.
double log_likelihood(const HmmModel& model, std::span<const int> sequence);

/// round(mean length), halves rounded up, at least 1.
int default_state_count(std::span<const Sequence> sequences);

struct HmmEnsemble {
    HmmModel benign;
    std::map<std::string, HmmModel> dga;  // family name -> model
    double eta = 0.0;

    void validate() const;
    nlohmann::json to_json() const;
    static HmmEnsemble from_json(const nlohmann::json& j);
};

struct NpDecision {
    bool is_dga = false;
    std::string best_family;
    double ratio = 0.0;  // log P_best - log P_benign
};

/// Neyman-Pearson decision: DGA iff max_family log P - log P_benign >= eta.
/// Ties between families go to the lexicographically smallest name.
NpDecision np_classify(const HmmEnsemble& ensemble, std::span<const int> sequence);
NpDecision np_classify(const HmmEnsemble& ensemble, const DomainName& d);

}  // namespace dga
