#include "dga/experiments.hpp"

#include "dga/error.hpp"
#include "dga/hash.hpp"
#include "dga/random.hpp"
#include "dga/serialization.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

namespace dga {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void say(const ExperimentHooks* hooks, const std::string& message) {
    if (hooks != nullptr && hooks->progress) hooks->progress(message);
}

TrainingSet subset(const Dataset& dataset, std::span<const std::size_t> indices, const std::vector<int>& classes,
                   const std::vector<std::string>& class_names) {
    TrainingSet out;
    out.class_names = class_names;
    out.examples.reserve(indices.size());
    out.classes.reserve(indices.size());
    for (auto i : indices) {
        out.examples.push_back(dataset.examples[i]);
        out.classes.push_back(classes[i]);
    }
    return out;
}

std::vector<DomainName> domains_of(const Dataset& dataset, std::span<const std::size_t> indices) {
    std::vector<DomainName> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(dataset.examples[i].domain);
    return out;
}

std::vector<int> binary_classes(const Dataset& dataset) {
    std::vector<int> out;
    out.reserve(dataset.examples.size());
    for (const auto& ex : dataset.examples) out.push_back(ex.label.is_dga() ? 1 : 0);
    return out;
}

void require_binary_data(const Dataset& dataset) {
    bool benign = false, dga = false;
    for (const auto& ex : dataset.examples) (ex.label.is_dga() ? dga : benign) = true;
    if (!benign || !dga) throw Error(ErrorCode::SingleClassDataset, "binary experiment needs benign and DGA examples");
}

/// Fills confusion, report, family recall and benign FPR for a binary run.
void summarize_binary(ModelResult& r, const Dataset& dataset, std::span<const std::size_t> indices,
                      std::span<const int> predicted, const std::set<std::string>& held_out) {
    r.class_names = {"benign", "dga"};
    r.confusion = ConfusionMatrix(2);
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> hits;  // family -> (detected, support)
    for (std::size_t n = 0; n < indices.size(); ++n) {
        const auto& label = dataset.examples[indices[n]].label;
        r.confusion.add(label.is_dga() ? 1 : 0, predicted[n]);
        if (label.is_dga()) {
            auto& h = hits[label.family()];
            h.first += predicted[n];
            h.second += 1;
        }
    }
    r.report = report(r.confusion);
    const auto negatives = r.confusion(0, 0) + r.confusion(0, 1);
    r.benign_fpr = negatives == 0 ? 0.0 : static_cast<double>(r.confusion(0, 1)) / static_cast<double>(negatives);
    for (const auto& [family, h] : hits) {
        r.family_recall.push_back({family, h.second, static_cast<double>(h.first) / static_cast<double>(h.second),
                                   held_out.contains(family)});
    }
}

std::string fixed8(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.8f", v);
    return buf;
}

std::string to_text(const auto& writer) {
    std::ostringstream out;
    writer(out);
    return out.str();
}

}  // namespace

std::vector<std::size_t> DatasetSplit::test_indices(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i) {
        if (fold[i] == f) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> DatasetSplit::train_indices(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i) {
        if (fold[i] != f) out.push_back(i);
    }
    return out;
}

DatasetSplit stratified_kfold(std::span<const LabeledExample> examples, int k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorCode::TooFewExamples, "k-fold needs k >= 2");
    if (examples.size() < static_cast<std::size_t>(k)) {
        throw Error(ErrorCode::TooFewExamples, "fewer examples (" + std::to_string(examples.size()) + ") than folds");
    }
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < examples.size(); ++i) by_class[examples[i].label.name()].push_back(i);
    DatasetSplit split{k, std::vector<int>(examples.size(), -1)};
    Rng rng(seed);
    int next = 0;
    for (auto& [name, members] : by_class) {
        rng.shuffle(std::span<std::size_t>(members));
        for (auto i : members) {
            split.fold[i] = next;
            next = (next + 1) % k;
        }
    }
    return split;
}

ModelSpec model_spec(const ModelConfig& cfg) {
    return ModelSpec{cfg.display_name(),
                     [cfg](const TrainingSet& data, std::uint64_t seed) { return train_classifier(cfg.with_seed(seed), data); },
                     cfg.kind != ModelKind::hmm};
}

int SuperFamilyPartition::cluster_count() const {
    int n = 0;
    for (const auto& [name, id] : cluster_of) n = std::max(n, id + 1);
    return n;
}

std::vector<std::vector<std::string>> SuperFamilyPartition::clusters() const {
    std::vector<std::vector<std::string>> out(static_cast<std::size_t>(cluster_count()));
    for (const auto& [name, id] : cluster_of) out[static_cast<std::size_t>(id)].push_back(name);
    return out;
}

nlohmann::json SuperFamilyPartition::to_json() const {
    nlohmann::json merges_json = nlohmann::json::array();
    for (const auto& m : merges) {
        merges_json.push_back({{"left", m.left}, {"right", m.right}, {"distance", m.distance},
                               {"within_threshold", m.distance <= threshold}});
    }
    nlohmann::json clusters_json = nlohmann::json::array();
    for (const auto& members : clusters()) clusters_json.push_back(members);
    return {{"threshold", threshold}, {"cluster_of", cluster_of}, {"clusters", clusters_json}, {"merges", merges_json}};
}

const ModelResult& ExperimentResult::model(const std::string& name) const {
    for (const auto& m : models) {
        if (m.name == name) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "no result for model '" + name + "'");
}

ExperimentResult run_binary(std::span<const ModelSpec> models, const Dataset& dataset, int k, std::uint64_t seed,
                            const ExperimentHooks* hooks) {
    require_binary_data(dataset);
    return run_binary(models, dataset, stratified_kfold(dataset.examples, k, seed), seed, hooks);
}

ExperimentResult run_binary(std::span<const ModelSpec> models, const Dataset& dataset, const DatasetSplit& split,
                            std::uint64_t seed, const ExperimentHooks* hooks) {
    require_binary_data(dataset);
    if (split.fold.size() != dataset.examples.size()) throw Error(ErrorCode::DimensionMismatch, "split does not match dataset");
    const auto classes = binary_classes(dataset);
    const std::vector<std::string> names{"benign", "dga"};
    ExperimentResult result{"binary", seed, split.k, {}, {}, {}, std::nullopt};
    for (const auto& spec : models) {
        ModelResult r;
        r.name = spec.name;
        std::vector<std::size_t> order;
        std::vector<double> scores;
        std::vector<int> predicted;
        for (int f = 0; f < split.k; ++f) {
            const auto train = split.train_indices(f);
            const auto test = split.test_indices(f);
            if (test.empty()) continue;
            auto t0 = Clock::now();
            auto model = spec.train(subset(dataset, train, classes, names), derive_seed(seed, static_cast<std::uint64_t>(f)));
            r.train_seconds += seconds_since(t0);
            if (hooks != nullptr && hooks->on_trained) hooks->on_trained(spec.name, f, *model);
            t0 = Clock::now();
            const auto domains = domains_of(dataset, test);
            const auto s = model->scores(domains);
            const double threshold = model->threshold();
            for (std::size_t n = 0; n < test.size(); ++n) {
                order.push_back(test[n]);
                scores.push_back(s[n]);
                predicted.push_back(s[n] >= threshold ? 1 : 0);
            }
            r.eval_seconds += seconds_since(t0);
            say(hooks, spec.name + " fold " + std::to_string(f + 1) + "/" + std::to_string(split.k));
        }
        std::unique_ptr<bool[]> flags(new bool[order.size()]);
        for (std::size_t n = 0; n < order.size(); ++n) flags[n] = classes[order[n]] == 1;
        r.roc = roc_curve(scores, std::span<const bool>(flags.get(), order.size()));
        summarize_binary(r, dataset, order, predicted, {});
        result.models.push_back(std::move(r));
    }
    return result;
}

ExperimentResult run_holdout_families(std::span<const ModelSpec> models, const Dataset& dataset, int holdout_count,
                                      std::uint64_t seed, const ExperimentHooks* hooks) {
    require_binary_data(dataset);
    const auto support = dataset.family_support();
    if (holdout_count < 1 || support.size() <= static_cast<std::size_t>(holdout_count)) {
        throw Error(ErrorCode::TooFewFamilies, "holdout needs more than " + std::to_string(holdout_count) + " families, got " +
                                                   std::to_string(support.size()));
    }
    std::vector<std::pair<std::size_t, std::string>> ranked;
    for (const auto& [name, n] : support) ranked.emplace_back(n, name);
    std::sort(ranked.begin(), ranked.end());
    std::set<std::string> held_out;
    for (int i = 0; i < holdout_count; ++i) held_out.insert(ranked[static_cast<std::size_t>(i)].second);

    std::vector<std::size_t> kept, excluded;
    std::vector<LabeledExample> kept_examples;
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
        const auto& label = dataset.examples[i].label;
        if (label.is_dga() && held_out.contains(label.family())) {
            excluded.push_back(i);
        } else {
            kept.push_back(i);
            kept_examples.push_back(dataset.examples[i]);
        }
    }
    const auto split = stratified_kfold(kept_examples, 10, seed);
    std::vector<std::size_t> train, test;
    for (std::size_t n = 0; n < kept.size(); ++n) (split.fold[n] == 0 ? test : train).push_back(kept[n]);
    test.insert(test.end(), excluded.begin(), excluded.end());

    const auto classes = binary_classes(dataset);
    const std::vector<std::string> names{"benign", "dga"};
    ExperimentResult result{"holdout", seed, 10, {}, {}, {held_out.begin(), held_out.end()}, std::nullopt};
    const auto test_domains = domains_of(dataset, test);
    std::unique_ptr<bool[]> flags(new bool[test.size()]);
    for (std::size_t n = 0; n < test.size(); ++n) flags[n] = classes[test[n]] == 1;
    for (const auto& spec : models) {
        ModelResult r;
        r.name = spec.name;
        auto t0 = Clock::now();
        auto model = spec.train(subset(dataset, train, classes, names), derive_seed(seed, 0));
        r.train_seconds = seconds_since(t0);
        if (hooks != nullptr && hooks->on_trained) hooks->on_trained(spec.name, -1, *model);
        t0 = Clock::now();
        const auto s = model->scores(test_domains);
        std::vector<int> predicted;
        for (double v : s) predicted.push_back(v >= model->threshold() ? 1 : 0);
        r.eval_seconds = seconds_since(t0);
        r.roc = roc_curve(s, std::span<const bool>(flags.get(), test.size()));
        summarize_binary(r, dataset, test, predicted, held_out);
        say(hooks, spec.name + " holdout done");
        result.models.push_back(std::move(r));
    }
    return result;
}

ExperimentResult run_multiclass(std::span<const ModelSpec> models, const Dataset& dataset, int k, std::uint64_t seed,
                                const ExperimentHooks* hooks) {
    std::vector<std::string> names{"benign"};
    for (const auto& f : dataset.families()) names.push_back(f);
    std::map<std::string, int> index;
    for (std::size_t c = 0; c < names.size(); ++c) index[names[c]] = static_cast<int>(c);
    std::vector<int> classes;
    std::set<int> present;
    for (const auto& ex : dataset.examples) {
        classes.push_back(index.at(ex.label.name()));
        present.insert(classes.back());
    }
    if (present.size() < 3) throw Error(ErrorCode::TooFewFamilies, "multiclass needs at least three classes");

    const auto split = stratified_kfold(dataset.examples, k, seed);
    ExperimentResult result{"multiclass", seed, k, {}, {}, {}, std::nullopt};
    for (const auto& spec : models) {
        if (!spec.multiclass) {
            result.skipped_models.push_back(spec.name);
            continue;
        }
        ModelResult r;
        r.name = spec.name;
        r.class_names = names;
        r.confusion = ConfusionMatrix(static_cast<int>(names.size()));
        for (int f = 0; f < k; ++f) {
            const auto train = split.train_indices(f);
            const auto test = split.test_indices(f);
            if (test.empty()) continue;
            auto t0 = Clock::now();
            auto model = spec.train(subset(dataset, train, classes, names), derive_seed(seed, static_cast<std::uint64_t>(f)));
            r.train_seconds += seconds_since(t0);
            if (hooks != nullptr && hooks->on_trained) hooks->on_trained(spec.name, f, *model);
            t0 = Clock::now();
            const auto predicted = model->predict(domains_of(dataset, test));
            for (std::size_t n = 0; n < test.size(); ++n) r.confusion.add(classes[test[n]], predicted[n]);
            r.eval_seconds += seconds_since(t0);
            say(hooks, spec.name + " fold " + std::to_string(f + 1) + "/" + std::to_string(k));
        }
        r.report = report(r.confusion);
        result.models.push_back(std::move(r));
    }
    return result;
}

double cosine_distance(const UnigramDistribution& p, const UnigramDistribution& q) {
    if (p.probabilities.size() != q.probabilities.size()) throw Error(ErrorCode::DimensionMismatch, "distribution sizes differ");
    const double np = p.probabilities.norm();
    const double nq = q.probabilities.norm();
    if (np == 0 || nq == 0) throw Error(ErrorCode::ZeroVector, "cosine distance of a zero vector");
    return std::clamp(1.0 - p.probabilities.dot(q.probabilities) / (np * nq), 0.0, 2.0);
}

SuperFamilyPartition super_families(const std::map<std::string, UnigramDistribution>& families, double threshold) {
    SuperFamilyPartition out;
    out.threshold = threshold;
    std::vector<std::string> names;
    std::vector<const UnigramDistribution*> dists;
    for (const auto& [name, d] : families) {
        names.push_back(name);
        dists.push_back(&d);
    }
    const std::size_t n = names.size();
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dist(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                cosine_distance(*dists[i], *dists[j]);
        }
    }
    // clusters hold item indices; kept ordered by smallest member (names are sorted)
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < n; ++i) clusters.push_back({i});
    auto linkage = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        double sum = 0;
        for (auto i : a) {
            for (auto j : b) sum += dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        return sum / static_cast<double>(a.size() * b.size());
    };
    auto member_names = [&](const std::vector<std::size_t>& c) {
        std::vector<std::string> out_names;
        for (auto i : c) out_names.push_back(names[i]);
        return out_names;
    };
    std::vector<std::vector<std::size_t>> at_threshold;
    bool cut = false;
    while (clusters.size() > 1) {
        std::size_t best_a = 0, best_b = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < clusters.size(); ++a) {
            for (std::size_t b = a + 1; b < clusters.size(); ++b) {
                const double d = linkage(clusters[a], clusters[b]);
                if (d < best) {
                    best = d;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        if (!cut && best > threshold) {
            at_threshold = clusters;
            cut = true;
        }
        out.merges.push_back({member_names(clusters[best_a]), member_names(clusters[best_b]), best});
        auto merged = clusters[best_a];
        merged.insert(merged.end(), clusters[best_b].begin(), clusters[best_b].end());
        std::sort(merged.begin(), merged.end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
        clusters[best_a] = std::move(merged);
        std::sort(clusters.begin(), clusters.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
    }
    if (!cut) at_threshold = clusters;
    for (std::size_t c = 0; c < at_threshold.size(); ++c) {
        for (auto i : at_threshold[c]) out.cluster_of[names[i]] = static_cast<int>(c);
    }
    return out;
}

std::map<std::string, UnigramDistribution> family_unigrams(const Dataset& dataset) {
    std::map<std::string, std::vector<DomainName>> members;
    for (const auto& ex : dataset.examples) {
        if (ex.label.is_dga()) members[ex.label.family()].push_back(ex.domain);
    }
    std::map<std::string, UnigramDistribution> out;
    for (const auto& [name, domains] : members) out.emplace(name, unigram_distribution(domains));
    return out;
}

std::string super_family_name(int id) { return "super_" + std::to_string(id); }

Dataset relabel_super_families(const Dataset& dataset, const SuperFamilyPartition& partition) {
    Dataset out;
    out.manifest.sources = dataset.manifest.sources;
    for (const auto& ex : dataset.examples) {
        if (ex.label.is_benign()) {
            out.examples.push_back(ex);
            continue;
        }
        const auto it = partition.cluster_of.find(ex.label.family());
        if (it == partition.cluster_of.end()) {
            throw Error(ErrorCode::InvalidArgument, "family '" + ex.label.family() + "' missing from the partition");
        }
        out.examples.push_back({ex.domain, FamilyLabel::dga(super_family_name(it->second))});
    }
    out.recount();
    return out;
}

ExperimentResult run_superfamily_multiclass(std::span<const ModelSpec> models, const Dataset& dataset,
                                            const SuperFamilyPartition& partition, int k, std::uint64_t seed,
                                            const ExperimentHooks* hooks) {
    const Dataset relabeled = relabel_super_families(dataset, partition);
    ExperimentResult result;
    if (partition.cluster_count() == 1) {
        result = run_binary(models, relabeled, k, seed, hooks);
        for (auto& m : result.models) m.class_names = {"benign", super_family_name(0)};
    } else {
        result = run_multiclass(models, relabeled, k, seed, hooks);
    }
    result.design = "superfamily";
    result.partition = partition;
    return result;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
    ExperimentConfig cfg;
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_absolute() || base.empty() ? path : base / path;
    };
    auto paths = [&](const char* key) {
        std::vector<std::filesystem::path> out;
        if (!j.contains(key)) return out;
        const auto& v = j.at(key);
        if (v.is_string()) {
            out.push_back(resolve(v.get<std::string>()));
        } else {
            for (const auto& p : v) out.push_back(resolve(p.get<std::string>()));
        }
        return out;
    };
    try {
        if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "experiment config must be a JSON object");
        cfg.design = j.value("design", cfg.design);
        if (cfg.design != "binary" && cfg.design != "holdout" && cfg.design != "multiclass" && cfg.design != "superfamily") {
            throw Error(ErrorCode::InvalidArgument, "unknown design '" + cfg.design + "'");
        }
        cfg.datasets = paths("datasets");
        cfg.benign_csv = paths("benign_csv");
        cfg.dga_feeds = paths("dga_feeds");
        if (j.contains("family_patterns")) cfg.family_patterns = resolve(j.at("family_patterns").get<std::string>());
        if (j.contains("generators")) cfg.generators = j.at("generators").get<std::vector<GeneratorSpec>>();
        if (j.contains("models")) cfg.models = j.at("models").get<std::vector<ModelConfig>>();
        cfg.k = j.value("k", cfg.k);
        cfg.holdout_count = j.value("holdout_count", cfg.holdout_count);
        cfg.threshold = j.value("threshold", cfg.threshold);
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("experiment config: ") + e.what());
    }
    if (cfg.models.empty()) throw Error(ErrorCode::InvalidArgument, "experiment config names no models");
    if (cfg.datasets.empty() && cfg.generators.empty() && cfg.benign_csv.empty() && cfg.dga_feeds.empty()) {
        throw Error(ErrorCode::InvalidArgument, "experiment config names no data");
    }
    return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
    auto strings = [](const std::vector<std::filesystem::path>& ps) {
        std::vector<std::string> out;
        for (const auto& p : ps) out.push_back(p.generic_string());
        return out;
    };
    nlohmann::json j{{"design", design},
                     {"datasets", strings(datasets)},
                     {"generators", generators},
                     {"benign_csv", strings(benign_csv)},
                     {"dga_feeds", strings(dga_feeds)},
                     {"models", models},
                     {"k", k},
                     {"holdout_count", holdout_count},
                     {"threshold", threshold},
                     {"seed", seed}};
    if (family_patterns) j["family_patterns"] = family_patterns->generic_string();
    return j;
}

Dataset load_experiment_dataset(const ExperimentConfig& cfg) {
    Dataset benign;
    std::vector<Dataset> others;
    auto take = [&](Dataset part) {
        std::vector<LabeledExample> b, d;
        for (auto& ex : part.examples) (ex.label.is_benign() ? b : d).push_back(std::move(ex));
        benign.manifest.sources.insert(benign.manifest.sources.end(), part.manifest.sources.begin(),
                                       part.manifest.sources.end());
        benign.examples.insert(benign.examples.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
        Dataset rest;
        rest.examples = std::move(d);
        others.push_back(std::move(rest));
    };
    for (const auto& p : cfg.datasets) {
        if (!std::filesystem::exists(p)) throw Error(ErrorCode::FileUnreadable, "dataset not found: " + p.string());
        take(read_dataset_csv(p));
    }
    for (const auto& p : cfg.benign_csv) take(load_benign_csv(p).dataset);
    if (!cfg.dga_feeds.empty()) {
        const auto patterns = cfg.family_patterns ? load_family_patterns(*cfg.family_patterns) : bundled_family_patterns();
        for (const auto& p : cfg.dga_feeds) take(load_dga_feed(p, patterns).dataset);
    }
    for (const auto& spec : cfg.generators) take(generate(spec));
    return assemble(benign, others, cfg.seed);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentHooks* hooks) {
    const Dataset dataset = load_experiment_dataset(cfg);
    std::vector<ModelSpec> specs;
    for (const auto& m : cfg.models) specs.push_back(model_spec(m));
    if (cfg.design == "binary") return run_binary(specs, dataset, cfg.k, cfg.seed, hooks);
    if (cfg.design == "holdout") return run_holdout_families(specs, dataset, cfg.holdout_count, cfg.seed, hooks);
    if (cfg.design == "multiclass") return run_multiclass(specs, dataset, cfg.k, cfg.seed, hooks);
    const auto partition = super_families(family_unigrams(dataset), cfg.threshold);
    return run_superfamily_multiclass(specs, dataset, partition, cfg.k, cfg.seed, hooks);
}

void write_results(const ExperimentResult& result, const nlohmann::json& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json timings = nlohmann::json::object();
    std::vector<RocSeries> series;
    nlohmann::json model_names = nlohmann::json::array();
    for (const auto& m : result.models) {
        const auto sub = dir / m.name;
        model_names.push_back(m.name);
        write_text_file(sub / "report.csv", to_text([&](std::ostream& o) { m.report.write_csv(o, m.class_names); }));
        write_text_file(sub / "report.json", m.report.to_json(m.class_names).dump(2) + "\n");
        write_text_file(sub / "confusion.csv", to_text([&](std::ostream& o) { m.confusion.write_csv(o, m.class_names); }));
        if (m.roc) {
            write_text_file(sub / "roc.csv", to_text([&](std::ostream& o) { m.roc->write_csv(o); }));
            series.push_back({m.name, &*m.roc});
        }
        if (!m.family_recall.empty()) {
            std::ostringstream o;
            o << "family,support,recall,held_out\n";
            for (const auto& fr : m.family_recall) {
                o << fr.family << ',' << fr.support << ',' << fixed8(fr.recall) << ',' << (fr.held_out ? 1 : 0) << '\n';
            }
            o << "benign_fpr,," << fixed8(m.benign_fpr) << ",\n";
            write_text_file(sub / "per_family_recall.csv", o.str());
        }
        timings[m.name] = {{"train_seconds", m.train_seconds}, {"eval_seconds", m.eval_seconds}};
    }
    if (!series.empty()) write_text_file(dir / "roc.svg", roc_svg(series));
    if (result.partition) write_text_file(dir / "dendrogram.json", result.partition->to_json().dump(2) + "\n");
    const std::string config_text = config.dump();
    nlohmann::json manifest{{"format_version", kFormatVersion},
                            {"design", result.design},
                            {"seed", result.seed},
                            {"k", result.k},
                            {"models", model_names},
                            {"skipped_models", result.skipped_models},
                            {"held_out_families", result.held_out_families},
                            {"config", config},
                            {"config_hash", hex64(fnv1a(config_text))},
                            {"dictionary_fingerprint", hex64(WordDictionary::bundled().fingerprint())},
                            {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                                  "." + std::to_string(EIGEN_MINOR_VERSION)}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    write_text_file(dir / "timings.json", timings.dump(2) + "\n");
}

}  // namespace dga
