#include "dga/hmm.hpp"

#include "dga/error.hpp"
#include "dga/random.hpp"
#include "dga/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dga {

namespace {

constexpr double kRowTolerance = 1e-9;

void check_stochastic_rows(const Eigen::MatrixXd& m, const char* what) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if ((m.row(r).array() < 0).any() || !m.row(r).allFinite() || std::abs(m.row(r).sum() - 1.0) > kRowTolerance) {
            throw Error(ErrorCode::InvalidArgument, std::string(what) + " row " + std::to_string(r) + " is not stochastic");
        }
    }
}

Eigen::MatrixXd safe_log(const Eigen::MatrixXd& m) {
    return m.unaryExpr([](double p) { return p > 0 ? std::log(p) : -std::numeric_limits<double>::infinity(); });
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

void floor_rows(Eigen::MatrixXd& m, double floor) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        double sum = m.row(r).sum();
        if (sum > 0) {
            m.row(r) /= sum;
        } else {
            m.row(r).setConstant(1.0 / static_cast<double>(m.cols()));
        }
        m.row(r) = m.row(r).cwiseMax(floor);
        m.row(r) /= m.row(r).sum();
    }
}

Eigen::MatrixXd dirichlet_rows(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.exponential();
        m.row(r) /= m.row(r).sum();
    }
    return m;
}

void check_sequences(std::span<const Sequence> sequences, int symbols) {
    if (sequences.empty()) throw Error(ErrorCode::EmptySequenceSet, "no training sequences");
    for (const auto& s : sequences) {
        if (s.empty()) throw Error(ErrorCode::EmptySequenceSet, "empty training sequence");
        for (int o : s) {
            if (o < 0 || o >= symbols) throw Error(ErrorCode::IndexOutOfVocabulary, "symbol " + std::to_string(o));
        }
    }
}

struct Accumulators {
    Eigen::VectorXd initial;
    Eigen::MatrixXd transition;
    Eigen::MatrixXd emission;
};

// Scaled forward-backward for one sequence; adds expected counts and returns log P.
double expectation(const HmmModel& model, const Sequence& seq, Accumulators& acc, Eigen::MatrixXd& alpha,
                   Eigen::MatrixXd& beta, Eigen::VectorXd& scale) {
    const Eigen::Index s = model.states();
    const auto t_len = static_cast<Eigen::Index>(seq.size());
    const auto& a = model.transition();
    const auto& b = model.emission();
    alpha.resize(s, t_len);
    beta.resize(s, t_len);
    scale.resize(t_len);

    alpha.col(0) = model.initial().cwiseProduct(b.col(seq[0]));
    for (Eigen::Index t = 0; t < t_len; ++t) {
        if (t > 0) alpha.col(t) = (a.transpose() * alpha.col(t - 1)).cwiseProduct(b.col(seq[static_cast<std::size_t>(t)]));
        scale[t] = alpha.col(t).sum();
        alpha.col(t) /= scale[t];
    }
    beta.col(t_len - 1).setOnes();
    for (Eigen::Index t = t_len - 2; t >= 0; --t) {
        beta.col(t) = a * b.col(seq[static_cast<std::size_t>(t + 1)]).cwiseProduct(beta.col(t + 1)) / scale[t + 1];
    }

    acc.initial += alpha.col(0).cwiseProduct(beta.col(0));
    for (Eigen::Index t = 0; t < t_len; ++t) {
        acc.emission.col(seq[static_cast<std::size_t>(t)]) += alpha.col(t).cwiseProduct(beta.col(t));
        if (t + 1 < t_len) {
            Eigen::VectorXd next = b.col(seq[static_cast<std::size_t>(t + 1)]).cwiseProduct(beta.col(t + 1)) / scale[t + 1];
            acc.transition.noalias() += (alpha.col(t) * next.transpose()).cwiseProduct(a);
        }
    }
    return scale.array().log().sum();
}

}  // namespace

HmmModel::HmmModel(Eigen::VectorXd initial, Eigen::MatrixXd transition, Eigen::MatrixXd emission)
    : initial_(std::move(initial)), transition_(std::move(transition)), emission_(std::move(emission)) {
    const Eigen::Index s = initial_.size();
    if (s < 1 || transition_.rows() != s || transition_.cols() != s || emission_.rows() != s || emission_.cols() < 1) {
        throw Error(ErrorCode::DimensionMismatch, "HMM parameter shapes disagree");
    }
    check_stochastic_rows(initial_.transpose(), "initial");
    check_stochastic_rows(transition_, "transition");
    check_stochastic_rows(emission_, "emission");
    log_initial_ = safe_log(initial_);
    log_transition_ = safe_log(transition_);
    log_emission_ = safe_log(emission_);
}

nlohmann::json HmmModel::to_json() const {
    return {{"format_version", kFormatVersion},
            {"kind", "hmm"},
            {"states", states()},
            {"symbols", symbols()},
            {"initial", flatten(initial_)},
            {"transition", flatten_row_major(transition_)},
            {"emission", flatten_row_major(emission_)}};
}

HmmModel HmmModel::from_json(const nlohmann::json& j) {
    check_format(j, "hmm");
    const int s = j.at("states").get<int>();
    const int v = j.at("symbols").get<int>();
    if (s < 1 || v < 1) throw Error(ErrorCode::ModelUnreadable, "HMM dimensions must be positive");
    return HmmModel(unflatten(j.at("initial"), s), unflatten_row_major(j.at("transition"), s, s),
                    unflatten_row_major(j.at("emission"), s, v));
}

void to_json(nlohmann::json& j, const HmmTrainingConfig& cfg) {
    j = nlohmann::json{{"max_iterations", cfg.max_iterations},
                       {"tolerance", cfg.tolerance},
                       {"probability_floor", cfg.probability_floor},
                       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, HmmTrainingConfig& cfg) {
    cfg.max_iterations = j.value("max_iterations", cfg.max_iterations);
    cfg.tolerance = j.value("tolerance", cfg.tolerance);
    cfg.probability_floor = j.value("probability_floor", cfg.probability_floor);
    cfg.seed = j.value("seed", cfg.seed);
}

HmmModel train_hmm(std::span<const Sequence> sequences, int states, int symbols, const HmmTrainingConfig& cfg,
                   HmmTrainingLog* log) {
    if (states < 1 || symbols < 1) throw Error(ErrorCode::InvalidArgument, "HMM needs >= 1 state and symbol");
    if (cfg.max_iterations < 0 || cfg.probability_floor < 0) {
        throw Error(ErrorCode::InvalidArgument, "HMM training configuration out of range");
    }
    check_sequences(sequences, symbols);

    Rng rng(cfg.seed);
    Eigen::MatrixXd initial = dirichlet_rows(rng, 1, states);
    Eigen::MatrixXd transition = dirichlet_rows(rng, states, states);
    Eigen::MatrixXd emission = dirichlet_rows(rng, states, symbols);
    floor_rows(initial, cfg.probability_floor);
    floor_rows(transition, cfg.probability_floor);
    floor_rows(emission, cfg.probability_floor);
    HmmModel model(initial.row(0).transpose(), transition, emission);

    const auto n = static_cast<double>(sequences.size());
    Eigen::MatrixXd alpha, beta;
    Eigen::VectorXd scale;
    double previous = -std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int iteration = 0; iteration < cfg.max_iterations; ++iteration) {
        Accumulators acc{Eigen::VectorXd::Zero(states), Eigen::MatrixXd::Zero(states, states),
                         Eigen::MatrixXd::Zero(states, symbols)};
        double total = 0;
        for (const auto& seq : sequences) total += expectation(model, seq, acc, alpha, beta, scale);
        const double mean = total / n;
        if (log != nullptr) log->mean_log_likelihood.push_back(mean);
        if (iteration > 0 && mean - previous < cfg.tolerance) {
            converged = true;
            break;
        }
        previous = mean;

        Eigen::MatrixXd next_initial = acc.initial.transpose();
        floor_rows(next_initial, cfg.probability_floor);
        floor_rows(acc.transition, cfg.probability_floor);
        floor_rows(acc.emission, cfg.probability_floor);
        model = HmmModel(next_initial.row(0).transpose(), acc.transition, acc.emission);
    }
    if (!converged && log != nullptr) {
        double total = 0;
        for (const auto& seq : sequences) total += log_likelihood(model, seq);
        log->mean_log_likelihood.push_back(total / n);
    }
    return model;
}

double log_likelihood(const HmmModel& model, std::span<const int> sequence) {
    if (sequence.empty()) throw Error(ErrorCode::EmptySequence, "log-likelihood of an empty sequence");
    for (int o : sequence) {
        if (o < 0 || o >= model.symbols()) throw Error(ErrorCode::IndexOutOfVocabulary, "symbol " + std::to_string(o));
    }
    const Eigen::Index s = model.states();
    Eigen::VectorXd la = model.log_initial() + model.log_emission().col(sequence[0]);
    Eigen::VectorXd next(s);
    for (std::size_t t = 1; t < sequence.size(); ++t) {
        for (Eigen::Index j = 0; j < s; ++j) {
            next[j] = log_sum_exp(la + model.log_transition().col(j)) + model.log_emission()(j, sequence[t]);
        }
        la.swap(next);
    }
    return log_sum_exp(la);
}

int default_state_count(std::span<const Sequence> sequences) {
    if (sequences.empty()) throw Error(ErrorCode::EmptySequenceSet, "no sequences for state count");
    std::uint64_t total = 0;
    for (const auto& s : sequences) total += s.size();
    const std::uint64_t n = sequences.size();
    const auto rounded = static_cast<int>((2 * total + n) / (2 * n));
    return std::max(rounded, 1);
}

void HmmEnsemble::validate() const {
    if (dga.empty()) throw Error(ErrorCode::InvalidArgument, "HMM ensemble needs at least one DGA model");
    for (const auto& [family, model] : dga) {
        if (model.symbols() != benign.symbols()) {
            throw Error(ErrorCode::DimensionMismatch, "HMM '" + family + "' has a different vocabulary size");
        }
    }
}

nlohmann::json HmmEnsemble::to_json() const {
    nlohmann::json families = nlohmann::json::object();
    for (const auto& [family, model] : dga) families[family] = model.to_json();
    return {{"format_version", kFormatVersion},
            {"kind", "hmm_ensemble"},
            {"eta", eta},
            {"benign", benign.to_json()},
            {"dga", families}};
}

HmmEnsemble HmmEnsemble::from_json(const nlohmann::json& j) {
    check_format(j, "hmm_ensemble");
    HmmEnsemble ensemble{HmmModel::from_json(j.at("benign")), {}, j.at("eta").get<double>()};
    for (const auto& [family, model] : j.at("dga").items()) ensemble.dga.emplace(family, HmmModel::from_json(model));
    ensemble.validate();
    return ensemble;
}

NpDecision np_classify(const HmmEnsemble& ensemble, std::span<const int> sequence) {
    ensemble.validate();
    NpDecision decision;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [family, model] : ensemble.dga) {
        const double ll = log_likelihood(model, sequence);
        if (decision.best_family.empty() || ll > best) {
            best = ll;
            decision.best_family = family;
        }
    }
    decision.ratio = best - log_likelihood(ensemble.benign, sequence);
    decision.is_dga = decision.ratio >= ensemble.eta;
    return decision;
}

NpDecision np_classify(const HmmEnsemble& ensemble, const DomainName& d) { return np_classify(ensemble, d.encoded()); }

}  // namespace dga
