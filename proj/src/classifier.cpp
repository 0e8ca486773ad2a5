#include "dga/classifier.hpp"

#include "dga/error.hpp"
#include "dga/features.hpp"
#include "dga/hash.hpp"
#include "dga/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace dga {

namespace {

nlohmann::json table_json(const NGramFrequencyTable& table) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [gram, count] : table.sorted_entries()) entries.push_back({gram, count});
    return {{"n", table.n()}, {"entries", entries}};
}

NGramFrequencyTable table_from_json(const nlohmann::json& j, int n) {
    if (j.at("n").get<int>() != n) throw Error(ErrorCode::ModelUnreadable, "n-gram table order mismatch");
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const auto& e : j.at("entries")) counts.emplace(e.at(0).get<std::string>(), e.at(1).get<std::uint64_t>());
    return NGramFrequencyTable(n, std::move(counts));
}

std::vector<const DomainName*> of_class(const TrainingSet& data, int cls) {
    std::vector<const DomainName*> out;
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
        if (data.classes[i] == cls) out.push_back(&data.examples[i].domain);
    }
    return out;
}

void check_training_set(const TrainingSet& data) {
    if (data.examples.size() != data.classes.size()) {
        throw Error(ErrorCode::DimensionMismatch, "training set labels and examples differ in length");
    }
    if (data.class_count() < 2) throw Error(ErrorCode::SingleClassDataset, "need at least two classes");
    for (int c : data.classes) {
        if (c < 0 || c >= data.class_count()) throw Error(ErrorCode::InvalidArgument, "class id out of range");
    }
}

template <typename Scalar>
std::unique_ptr<Classifier> train_lstm_classifier(const ModelConfig& cfg, const TrainingSet& data, TrainingTrace* trace) {
    std::vector<SequenceExample> examples;
    examples.reserve(data.examples.size());
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
        examples.push_back({data.examples[i].domain.encoded(), data.classes[i]});
    }
    LstmTrainingLog log;
    auto model = train_lstm<Scalar>(examples, data.class_count(), cfg.lstm, &log);
    if (trace != nullptr) {
        trace->columns = {"epoch", "train_loss", "validation_loss", "best_epoch"};
        for (const auto& r : log.epochs) {
            trace->rows.push_back({static_cast<double>(r.epoch), r.train_loss, r.validation_loss,
                                   static_cast<double>(log.best_epoch)});
        }
    }
    return std::make_unique<LstmClassifier<Scalar>>(data.class_names, std::move(model), cfg.lstm.max_length);
}

std::unique_ptr<Classifier> train_bigram(const ModelConfig& cfg, const TrainingSet& data, TrainingTrace* trace) {
    std::vector<LogRegExample> examples;
    examples.reserve(data.examples.size());
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
        examples.push_back({to_sparse(bigram_counts(data.examples[i].domain)), data.classes[i]});
    }
    LogRegTrainingLog log;
    auto model = train_logreg(examples, BigramCountVector::kDimension, cfg.baseline, &log, data.class_count());
    if (trace != nullptr) {
        trace->columns = {"epoch", "loss"};
        for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
            trace->rows.push_back({static_cast<double>(e + 1), log.epoch_loss[e]});
        }
    }
    return std::make_unique<BigramClassifier>(data.class_names, std::move(model));
}

std::unique_ptr<Classifier> train_forest_classifier(const ModelConfig& cfg, const TrainingSet& data, TrainingTrace* trace) {
    std::vector<DomainName> benign;
    for (const auto* d : of_class(data, 0)) benign.push_back(*d);
    if (benign.empty()) throw Error(ErrorCode::SingleClassDataset, "forest needs benign training domains for n-gram tables");
    NGramTables tables = NGramTables::build(benign);
    const auto& dict = WordDictionary::bundled();
    std::vector<ForestExample> examples;
    examples.reserve(data.examples.size());
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
        // benign training domains built the tables, so score them leave-one-out
        const auto& d = data.examples[i].domain;
        const auto v = (data.classes[i] == 0 ? extract_features_held_out(d, tables, dict) : extract_features(d, tables, dict)).values();
        examples.push_back({std::vector<double>(v.begin(), v.end()), data.classes[i]});
    }
    if (data.class_count() == 2) {
        auto forest = train_forest(examples, 2, cfg.baseline);
        if (trace != nullptr) {
            trace->columns = {"trees", "oob_accuracy"};
            trace->rows.push_back({static_cast<double>(forest.trees().size()), out_of_bag_accuracy(forest, examples)});
        }
        return std::make_unique<ForestClassifier>(data.class_names, std::move(tables), std::move(forest));
    }
    auto ovr = train_one_vs_rest(examples, data.class_count(), cfg.baseline);
    if (trace != nullptr) {
        trace->columns = {"class", "trees"};
        for (int c = 0; c < ovr.class_count(); ++c) {
            trace->rows.push_back({static_cast<double>(c), static_cast<double>(ovr.members()[static_cast<std::size_t>(c)].trees().size())});
        }
    }
    return std::make_unique<ForestClassifier>(data.class_names, std::move(tables), std::move(ovr));
}

std::unique_ptr<Classifier> train_hmm_classifier(const ModelConfig& cfg, const TrainingSet& data, TrainingTrace* trace) {
    std::vector<Sequence> benign;
    std::map<std::string, std::vector<Sequence>> families;
    std::vector<Sequence> all;
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
        const auto& ex = data.examples[i];
        all.push_back(ex.domain.encoded());
        if (data.classes[i] == 0) {
            benign.push_back(ex.domain.encoded());
        } else if (ex.label.is_dga()) {
            families[ex.label.family()].push_back(ex.domain.encoded());
        }
    }
    if (benign.empty() || families.empty()) {
        throw Error(ErrorCode::SingleClassDataset, "HMM ensemble needs benign and DGA training domains");
    }
    std::vector<std::pair<std::string, std::size_t>> support;
    for (const auto& [name, seqs] : families) support.emplace_back(name, seqs.size());
    std::stable_sort(support.begin(), support.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    support.resize(std::min<std::size_t>(support.size(), static_cast<std::size_t>(std::max(1, cfg.hmm_families))));

    const int states = cfg.hmm_states > 0 ? cfg.hmm_states : default_state_count(all);
    if (trace != nullptr) trace->columns = {"model", "iteration", "mean_log_likelihood"};
    int model_index = 0;
    auto fit = [&](const std::vector<Sequence>& seqs, std::uint64_t stream) {
        HmmTrainingConfig hc = cfg.hmm;
        hc.seed = derive_seed(cfg.hmm.seed, stream);
        HmmTrainingLog log;
        auto model = train_hmm(seqs, states, kVocabularySize, hc, &log);
        if (trace != nullptr) {
            for (std::size_t it = 0; it < log.mean_log_likelihood.size(); ++it) {
                trace->rows.push_back({static_cast<double>(model_index), static_cast<double>(it), log.mean_log_likelihood[it]});
            }
        }
        ++model_index;
        return model;
    };
    HmmModel benign_model = fit(benign, 0);
    std::map<std::string, HmmModel> dga;
    std::sort(support.begin(), support.end());
    for (std::size_t k = 0; k < support.size(); ++k) {
        dga.emplace(support[k].first, fit(families[support[k].first], k + 1));
    }
    HmmEnsemble ensemble{std::move(benign_model), std::move(dga), cfg.hmm_eta};
    return std::make_unique<HmmClassifier>(std::move(ensemble));
}

double logistic(double x) { return x >= 0 ? 1 / (1 + std::exp(-x)) : std::exp(x) / (1 + std::exp(x)); }

}  // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::lstm: return "lstm";
        case ModelKind::bigram: return "bigram";
        case ModelKind::forest: return "forest";
        case ModelKind::hmm: return "hmm";
    }
    return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
    for (auto k : {ModelKind::lstm, ModelKind::bigram, ModelKind::forest, ModelKind::hmm}) {
        if (to_string(k) == name) return k;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + std::string(name) + "' (lstm|bigram|forest|hmm)");
}

void TrainingTrace::write_csv(std::ostream& out) const {
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
    out << '\n';
    char buf[64];
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.10g", row[c]);
            out << (c ? "," : "") << buf;
        }
        out << '\n';
    }
}

std::vector<double> Classifier::scores(std::span<const DomainName> domains) const {
    const Eigen::MatrixXd p = probabilities(domains);
    std::vector<double> out(domains.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - p(0, static_cast<Eigen::Index>(i));
    return out;
}

std::vector<int> Classifier::predict(std::span<const DomainName> domains) const {
    std::vector<int> out(domains.size());
    if (class_count() == 2) {
        const auto s = scores(domains);
        const double t = threshold();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = s[i] >= t ? 1 : 0;
        return out;
    }
    const Eigen::MatrixXd p = probabilities(domains);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax(p.col(static_cast<Eigen::Index>(i)));
    return out;
}

std::string Classifier::family(const DomainName& domain) const {
    const int c = predict(std::span<const DomainName>(&domain, 1)).front();
    return class_names_[static_cast<std::size_t>(c)];
}

nlohmann::json Classifier::to_json() const {
    return {{"format_version", kFormatVersion},
            {"kind", "classifier"},
            {"model_kind", kind()},
            {"class_names", class_names_},
            {"model", model_json()}};
}

std::unique_ptr<Classifier> load_classifier(const nlohmann::json& j) {
    try {
        check_format(j, "classifier");
        const std::string kind = j.at("model_kind").get<std::string>();
        auto names = j.at("class_names").get<std::vector<std::string>>();
        const auto& m = j.at("model");
        if (kind == "lstm") {
            const int max_length = m.at("max_length").get<int>();
            if (m.at("precision").get<std::string>() == "double") {
                return std::make_unique<LstmClassifier<double>>(names, LstmModel<double>::from_json(m.at("network")), max_length);
            }
            return std::make_unique<LstmClassifier<float>>(names, LstmModel<float>::from_json(m.at("network")), max_length);
        }
        if (kind == "bigram") return std::make_unique<BigramClassifier>(names, LogisticRegressionModel::from_json(m));
        if (kind == "forest") {
            if (m.at("dictionary_fingerprint").get<std::string>() != hex64(WordDictionary::bundled().fingerprint())) {
                throw Error(ErrorCode::ModelUnreadable, "model was trained against a different word list");
            }
            const auto& t = m.at("ngram_tables");
            NGramTables tables{table_from_json(t.at(0), 3), table_from_json(t.at(1), 4), table_from_json(t.at(2), 5)};
            if (m.contains("one_vs_rest")) {
                return std::make_unique<ForestClassifier>(names, std::move(tables), OneVsRestForest::from_json(m.at("one_vs_rest")));
            }
            return std::make_unique<ForestClassifier>(names, std::move(tables), RandomForestModel::from_json(m.at("forest")));
        }
        if (kind == "hmm") return std::make_unique<HmmClassifier>(HmmEnsemble::from_json(m));
        if (kind == "pattern_oracle") return std::make_unique<PatternOracle>(m.at("patterns").get<std::vector<std::string>>());
        if (kind == "constant") return std::make_unique<ConstantClassifier>(m.at("score").get<double>());
        throw Error(ErrorCode::ModelUnreadable, "unknown model kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ModelUnreadable, e.what());
    }
}

std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path) {
    try {
        return load_classifier(read_json_file(path));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::FileUnreadable) throw Error(ErrorCode::ModelUnreadable, path.string() + ": unreadable");
        throw;
    }
}

ModelConfig ModelConfig::with_seed(std::uint64_t seed) const {
    ModelConfig out = *this;
    out.baseline.seed = seed;
    out.lstm.seed = seed;
    out.hmm.seed = seed;
    return out;
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
    j = nlohmann::json{{"kind", std::string(to_string(cfg.kind))},
                       {"name", cfg.display_name()},
                       {"training", cfg.baseline},
                       {"lstm", cfg.lstm},
                       {"lstm_precision", cfg.lstm_precision},
                       {"hmm", cfg.hmm},
                       {"hmm_states", cfg.hmm_states},
                       {"hmm_families", cfg.hmm_families},
                       {"hmm_eta", cfg.hmm_eta}};
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
    try {
        if (j.is_string()) {
            cfg.kind = model_kind_from_string(j.get<std::string>());
            return;
        }
        cfg.kind = model_kind_from_string(j.at("kind").get<std::string>());
        cfg.name = j.value("name", cfg.name);
        if (j.contains("training")) cfg.baseline = j.at("training").get<TrainingConfig>();
        if (j.contains("lstm")) cfg.lstm = j.at("lstm").get<LstmTrainingConfig>();
        cfg.lstm_precision = j.value("lstm_precision", cfg.lstm_precision);
        if (j.contains("hmm")) cfg.hmm = j.at("hmm").get<HmmTrainingConfig>();
        cfg.hmm_states = j.value("hmm_states", cfg.hmm_states);
        cfg.hmm_families = j.value("hmm_families", cfg.hmm_families);
        cfg.hmm_eta = j.value("hmm_eta", cfg.hmm_eta);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("model config: ") + e.what());
    }
    if (cfg.lstm_precision != "float" && cfg.lstm_precision != "double") {
        throw Error(ErrorCode::InvalidArgument, "lstm_precision must be float or double");
    }
    cfg.baseline.validate();
    cfg.lstm.validate();
}

std::unique_ptr<Classifier> train_classifier(const ModelConfig& cfg, const TrainingSet& data, TrainingTrace* trace) {
    check_training_set(data);
    switch (cfg.kind) {
        case ModelKind::lstm:
            return cfg.lstm_precision == "double" ? train_lstm_classifier<double>(cfg, data, trace)
                                                  : train_lstm_classifier<float>(cfg, data, trace);
        case ModelKind::bigram: return train_bigram(cfg, data, trace);
        case ModelKind::forest: return train_forest_classifier(cfg, data, trace);
        case ModelKind::hmm:
            if (data.class_count() != 2) throw Error(ErrorCode::InvalidArgument, "the HMM ensemble is binary only");
            return train_hmm_classifier(cfg, data, trace);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown model kind");
}

PatternOracle::PatternOracle(std::vector<std::string> patterns)
    : Classifier({"benign", "dga"}), patterns_(std::move(patterns)) {}

Eigen::MatrixXd PatternOracle::probabilities(std::span<const DomainName> domains) const {
    Eigen::MatrixXd p(2, static_cast<Eigen::Index>(domains.size()));
    for (std::size_t i = 0; i < domains.size(); ++i) {
        const bool hit = std::any_of(patterns_.begin(), patterns_.end(), [&](const std::string& pat) {
            return domains[i].normalized().find(pat) != std::string::npos;
        });
        p.col(static_cast<Eigen::Index>(i)) << (hit ? 0.0 : 1.0), (hit ? 1.0 : 0.0);
    }
    return p;
}

nlohmann::json PatternOracle::model_json() const { return {{"patterns", patterns_}}; }

Eigen::MatrixXd ConstantClassifier::probabilities(std::span<const DomainName> domains) const {
    Eigen::MatrixXd p(2, static_cast<Eigen::Index>(domains.size()));
    p.row(0).setConstant(1 - score_);
    p.row(1).setConstant(score_);
    return p;
}

ForestClassifier::ForestClassifier(std::vector<std::string> class_names, NGramTables tables, RandomForestModel forest)
    : Classifier(std::move(class_names)), tables_(std::move(tables)), forest_(std::move(forest)) {
    if (class_count() != forest_->class_count()) throw Error(ErrorCode::DimensionMismatch, "forest class count mismatch");
}

ForestClassifier::ForestClassifier(std::vector<std::string> class_names, NGramTables tables, OneVsRestForest forests)
    : Classifier(std::move(class_names)), tables_(std::move(tables)), one_vs_rest_(std::move(forests)) {
    if (class_count() != one_vs_rest_->class_count()) throw Error(ErrorCode::DimensionMismatch, "forest class count mismatch");
}

std::vector<double> ForestClassifier::features(const DomainName& domain) const {
    const auto v = extract_features(domain, tables_, WordDictionary::bundled()).values();
    return {v.begin(), v.end()};
}

Eigen::MatrixXd ForestClassifier::probabilities(std::span<const DomainName> domains) const {
    Eigen::MatrixXd p(class_count(), static_cast<Eigen::Index>(domains.size()));
    for (std::size_t i = 0; i < domains.size(); ++i) {
        const auto x = features(domains[i]);
        p.col(static_cast<Eigen::Index>(i)) = forest_ ? predict_forest(*forest_, x) : one_vs_rest_->predict(x);
    }
    return p;
}

nlohmann::json ForestClassifier::model_json() const {
    nlohmann::json j{{"ngram_tables", {table_json(tables_.n3), table_json(tables_.n4), table_json(tables_.n5)}},
                     {"dictionary_fingerprint", hex64(WordDictionary::bundled().fingerprint())},
                     {"feature_names", FeatureVector::names()}};
    if (forest_) {
        j["forest"] = forest_->to_json();
    } else {
        j["one_vs_rest"] = one_vs_rest_->to_json();
    }
    return j;
}

BigramClassifier::BigramClassifier(std::vector<std::string> class_names, LogisticRegressionModel model)
    : Classifier(std::move(class_names)), model_(std::move(model)) {
    if (class_count() != model_.class_count()) throw Error(ErrorCode::DimensionMismatch, "bigram class count mismatch");
}

Eigen::MatrixXd BigramClassifier::probabilities(std::span<const DomainName> domains) const {
    Eigen::MatrixXd p(class_count(), static_cast<Eigen::Index>(domains.size()));
    for (std::size_t i = 0; i < domains.size(); ++i) {
        p.col(static_cast<Eigen::Index>(i)) = predict_logreg(model_, to_sparse(bigram_counts(domains[i])));
    }
    return p;
}

template <typename Scalar>
LstmClassifier<Scalar>::LstmClassifier(std::vector<std::string> class_names, LstmModel<Scalar> model, int max_length)
    : Classifier(std::move(class_names)), model_(std::move(model)), max_length_(max_length) {
    if (class_count() != model_.class_count()) throw Error(ErrorCode::DimensionMismatch, "LSTM class count mismatch");
    if (max_length_ < 1) throw Error(ErrorCode::ModelUnreadable, "max_length must be positive");
}

template <typename Scalar>
Sequence LstmClassifier<Scalar>::clip(const DomainName& domain) const {
    const auto& s = domain.encoded();
    const auto keep = std::min(s.size(), static_cast<std::size_t>(max_length_));
    return Sequence(s.end() - static_cast<std::ptrdiff_t>(keep), s.end());
}

template <typename Scalar>
Eigen::MatrixXd LstmClassifier<Scalar>::probabilities(std::span<const DomainName> domains) const {
    std::vector<Sequence> seqs;
    seqs.reserve(domains.size());
    for (const auto& d : domains) seqs.push_back(clip(d));
    return predict_probabilities(model_, std::span<const Sequence>(seqs));
}

template <typename Scalar>
nlohmann::json LstmClassifier<Scalar>::model_json() const {
    return {{"precision", std::is_same_v<Scalar, double> ? "double" : "float"},
            {"max_length", max_length_},
            {"network", model_.to_json()}};
}

template class LstmClassifier<float>;
template class LstmClassifier<double>;

HmmClassifier::HmmClassifier(HmmEnsemble ensemble) : Classifier({"benign", "dga"}), ensemble_(std::move(ensemble)) {
    ensemble_.validate();
}

std::vector<double> HmmClassifier::scores(std::span<const DomainName> domains) const {
    std::vector<double> out;
    out.reserve(domains.size());
    for (const auto& d : domains) out.push_back(np_classify(ensemble_, d).ratio);
    return out;
}

Eigen::MatrixXd HmmClassifier::probabilities(std::span<const DomainName> domains) const {
    const auto s = scores(domains);
    Eigen::MatrixXd p(2, static_cast<Eigen::Index>(domains.size()));
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double q = logistic(s[i] - ensemble_.eta);
        p.col(static_cast<Eigen::Index>(i)) << 1 - q, q;
    }
    return p;
}

std::string HmmClassifier::family(const DomainName& domain) const {
    const auto decision = np_classify(ensemble_, domain);
    return decision.is_dga ? decision.best_family : "benign";
}

}  // namespace dga
