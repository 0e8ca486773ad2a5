// Acceptance run: one PASS/FAIL line per criterion.
// usage: acceptance [out_dir] [criterion ...]
#include "dga/classifier.hpp"
#include "dga/data.hpp"
#include "dga/experiments.hpp"
#include "dga/hmm.hpp"
#include "dga/lstm.hpp"
#include "dga/metrics.hpp"
#include "dga/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace dga;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

// ---- 1: metric oracle

Outcome metric_oracle() {
    const int m[3][3] = {{5, 1, 0}, {0, 4, 2}, {1, 0, 7}};
    ConfusionMatrix::Counts counts(3, 3);
    std::vector<int> truth, pred;
    for (int t = 0; t < 3; ++t)
        for (int p = 0; p < 3; ++p) {
            counts(t, p) = m[t][p];
            for (int n = 0; n < m[t][p]; ++n) truth.push_back(t), pred.push_back(p);
        }
    const auto rep = report(ConfusionMatrix(counts));

    // brute force over the expanded prediction list
    double worst = 0, macro_p = 0, macro_r = 0, macro_f = 0, correct = 0;
    for (int c = 0; c < 3; ++c) {
        double tp = 0, fp = 0, fn = 0, support = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            tp += truth[i] == c && pred[i] == c;
            fp += truth[i] != c && pred[i] == c;
            fn += truth[i] == c && pred[i] != c;
            support += truth[i] == c;
        }
        correct += tp;
        const double p = tp / (tp + fp), r = tp / (tp + fn), f = 2 * p * r / (p + r);
        macro_p += p / 3, macro_r += r / 3, macro_f += f / 3;
        const auto& got = rep.per_class[static_cast<std::size_t>(c)];
        worst = std::max({worst, std::abs(got.scores.precision - p), std::abs(got.scores.recall - r),
                          std::abs(got.scores.f1 - f), std::abs(static_cast<double>(got.support) - support)});
    }
    const double acc = correct / static_cast<double>(truth.size());
    worst = std::max({worst, std::abs(rep.micro.precision - acc), std::abs(rep.micro.recall - acc),
                      std::abs(rep.micro.f1 - acc), std::abs(rep.macro.precision - macro_p),
                      std::abs(rep.macro.recall - macro_r), std::abs(rep.macro.f1 - macro_f)});
    return {worst <= 1e-12, "max abs diff " + sci(worst)};
}

// ---- 2: AUC vs rank statistic

Outcome auc_dual() {
    Rng rng(2024);
    double worst = 0;
    for (int set = 0; set < 1000; ++set) {
        std::vector<double> scores(50);
        std::unique_ptr<bool[]> labels(new bool[50]);
        int pos = 0;
        for (int i = 0; i < 50; ++i) {
            // a coarse grid forces ties
            scores[i] = rng.bernoulli(0.5) ? static_cast<double>(rng.below(6)) / 5.0 : rng.uniform();
            labels[i] = rng.bernoulli(0.5);
            pos += labels[i];
        }
        if (pos == 0) labels[0] = true;
        if (pos == 50) labels[0] = false;
        double wins = 0, pairs = 0;
        for (int i = 0; i < 50; ++i)
            for (int j = 0; j < 50; ++j) {
                if (!labels[i] || labels[j]) continue;
                pairs += 1;
                wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
            }
        const double a = auc(roc_curve(scores, std::span<const bool>(labels.get(), 50)));
        worst = std::max(worst, std::abs(a - wins / pairs));
    }
    return {worst <= 1e-9, "max |auc - rank stat| " + sci(worst)};
}

// ---- 3: HMM forward oracle and Baum-Welch monotonicity

Eigen::MatrixXd dirichlet_rows(Rng& rng, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = rng.exponential() + 1e-3;
        m.row(r) /= m.row(r).sum();
    }
    return m;
}

HmmModel random_hmm(Rng& rng, int s, int v) {
    Eigen::VectorXd init = dirichlet_rows(rng, 1, s).row(0).transpose();
    return HmmModel(init, dirichlet_rows(rng, s, s), dirichlet_rows(rng, s, v));
}

double enumerate_paths(const HmmModel& m, const std::vector<int>& seq) {
    const int s = m.states(), len = static_cast<int>(seq.size());
    long long paths = 1;
    for (int i = 0; i < len; ++i) paths *= s;
    double total = 0;
    std::vector<int> path(static_cast<std::size_t>(len));
    for (long long code = 0; code < paths; ++code) {
        long long c = code;
        for (auto& st : path) st = static_cast<int>(c % s), c /= s;
        double p = m.initial()(path[0]) * m.emission()(path[0], seq[0]);
        for (int t = 1; t < len; ++t) p *= m.transition()(path[t - 1], path[t]) * m.emission()(path[t], seq[t]);
        total += p;
    }
    return total;
}

Outcome hmm_oracle() {
    Rng rng(7);
    double worst_rel = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int s = 1 + static_cast<int>(rng.below(3)), v = 1 + static_cast<int>(rng.below(5));
        const int len = 1 + static_cast<int>(rng.below(6));
        const auto m = random_hmm(rng, s, v);
        std::vector<int> seq(static_cast<std::size_t>(len));
        for (auto& x : seq) x = static_cast<int>(rng.below(static_cast<std::uint64_t>(v)));
        // relative error of the likelihood itself
        const double brute = enumerate_paths(m, seq);
        worst_rel = std::max(worst_rel, std::abs(std::exp(log_likelihood(m, seq)) - brute) / brute);
    }

    const auto m = random_hmm(rng, 3, 3);
    double mass = 0;
    std::vector<int> seq(4);
    for (int code = 0; code < 81; ++code) {
        int c = code;
        for (auto& x : seq) x = c % 3, c /= 3;
        mass += std::exp(log_likelihood(m, seq));
    }

    double worst_drop = 0;
    for (int start = 0; start < 20; ++start) {
        const auto truth = random_hmm(rng, 3, 5);
        std::vector<Sequence> data;
        for (int n = 0; n < 40; ++n) {
            Sequence seq2;
            int st = 0;
            double u = rng.uniform();
            while (st < 2 && u > truth.initial().head(st + 1).sum()) ++st;
            const int len = 3 + static_cast<int>(rng.below(6));
            for (int t = 0; t < len; ++t) {
                int sym = 0;
                u = rng.uniform();
                double acc = truth.emission()(st, 0);
                while (sym < 4 && u > acc) acc += truth.emission()(st, ++sym);
                seq2.push_back(sym);
                u = rng.uniform();
                int next = 0;
                acc = truth.transition()(st, 0);
                while (next < 2 && u > acc) acc += truth.transition()(st, ++next);
                st = next;
            }
            data.push_back(seq2);
        }
        HmmTrainingConfig cfg;
        cfg.max_iterations = 50;
        cfg.tolerance = -std::numeric_limits<double>::infinity();
        cfg.seed = derive_seed(99, static_cast<std::uint64_t>(start));
        HmmTrainingLog log;
        train_hmm(data, 3, 5, cfg, &log);
        for (std::size_t i = 1; i < log.mean_log_likelihood.size(); ++i)
            worst_drop = std::max(worst_drop, log.mean_log_likelihood[i - 1] - log.mean_log_likelihood[i]);
    }
    const bool ok = worst_rel <= 1e-9 && std::abs(mass - 1) <= 1e-6 && worst_drop <= 1e-8;
    return {ok, "forward rel err " + sci(worst_rel) + ", total mass " + fmt(mass, 9) + ", worst EM drop " + sci(worst_drop)};
}

// ---- 4: LSTM gradient check

Outcome lstm_gradients() {
    Rng rng(11);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int outputs = trial % 2 == 0 ? 1 : 3;
        const auto model = init_lstm<double>(kVocabularySize, 8, 8, outputs, derive_seed(11, static_cast<std::uint64_t>(trial)), 0.0);
        SequenceExample ex;
        for (int t = 0; t < 12; ++t) ex.sequence.push_back(static_cast<int>(rng.below(kVocabularySize)));
        ex.class_id = static_cast<int>(rng.below(outputs == 1 ? 2 : 3));
        worst = std::max(worst, gradient_check(model, ex));
    }
    return {worst < 1e-5, "max relative error " + sci(worst)};
}

// ---- shared synthetic setups

GeneratorSpec benign_spec(std::uint64_t seed, int count) {
    GeneratorSpec b;
    b.kind = GeneratorKind::PronounceableBenign;
    b.seed = seed;
    b.count = count;
    b.min_length = 6;
    b.max_length = 16;
    b.subdomain_probability = 0.15;
    b.digit_suffix_probability = 0.15;
    b.hyphen_probability = 0.05;
    b.tlds = {"com", "net", "org", "de", "io"};
    return b;
}

GeneratorSpec family_spec(GeneratorKind kind, const std::string& family, std::uint64_t seed, int count) {
    GeneratorSpec g;
    g.kind = kind;
    g.family = family;
    g.seed = seed;
    g.count = count;
    g.tlds = {"com", "net", "biz", "info"};
    return g;
}

ModelConfig lstm_config(int epochs) {
    ModelConfig c;
    c.kind = ModelKind::lstm;
    c.lstm.epochs = epochs;
    return c;
}

ModelConfig simple_config(ModelKind kind) {
    ModelConfig c;
    c.kind = kind;
    return c;
}

nlohmann::json describe(const std::vector<GeneratorSpec>& gens, const std::vector<ModelConfig>& models) {
    nlohmann::json g = gens, m = models;
    return {{"generators", g}, {"models", m}};
}

Dataset build(const GeneratorSpec& benign, const std::vector<GeneratorSpec>& families, std::uint64_t seed) {
    std::vector<Dataset> parts;
    for (const auto& f : families) parts.push_back(generate(f));
    return assemble(generate(benign), parts, seed);
}

const FamilyRecall& recall_of(const ModelResult& r, const std::string& family) {
    for (const auto& f : r.family_recall)
        if (f.family == family) return f;
    throw std::runtime_error("no recall for " + family);
}

// ---- 5: binary benchmark

Outcome binary_benchmark(const fs::path& dir) {
    const auto benign = benign_spec(501, 20000);
    const auto uniform = family_spec(GeneratorKind::UniformChar, "uniform", 502, 20000);
    const auto data = build(benign, {uniform}, 503);
    const std::vector<ModelConfig> cfgs{lstm_config(8), simple_config(ModelKind::bigram)};
    std::vector<ModelSpec> specs;
    for (const auto& c : cfgs) specs.push_back(model_spec(c));
    const auto result = run_binary(specs, data, 10, 42);
    write_results(result, describe({benign, uniform}, cfgs), dir);
    const double lstm = auc(*result.model("lstm").roc), bigram = auc(*result.model("bigram").roc);
    const bool ok = lstm >= 0.99 && bigram >= 0.98 && lstm >= bigram - 0.002;
    return {ok, "lstm AUC " + fmt(lstm) + ", bigram AUC " + fmt(bigram)};
}

// ---- 6: dictionary DGA at FPR <= 0.01

Outcome dictionary_benchmark(const fs::path& dir) {
    int wins = 0;
    std::string detail;
    for (std::uint64_t s = 1; s <= 3; ++s) {
        const auto benign = benign_spec(derive_seed(600, s), 6000);
        auto dict = family_spec(GeneratorKind::DictionaryConcat, "dictionary", derive_seed(601, s), 6000);
        dict.word_list_size = 256;
        dict.word_list_seed = derive_seed(602, s);
        const auto data = build(benign, {dict}, derive_seed(603, s));

        // first 5000 of each class (in shuffled order) train, the rest test
        DatasetSplit split{1, std::vector<int>(data.examples.size(), 0)};
        std::map<std::string, int> seen;
        for (std::size_t i = 0; i < data.examples.size(); ++i)
            if (seen[data.examples[i].label.name()]++ < 5000) split.fold[i] = -1;

        const std::vector<ModelConfig> cfgs{lstm_config(25), simple_config(ModelKind::bigram)};
        std::vector<ModelSpec> specs;
        for (const auto& c : cfgs) specs.push_back(model_spec(c));
        const auto result = run_binary(specs, data, split, derive_seed(604, s));
        write_results(result, describe({benign, dict}, cfgs), dir / ("seed" + std::to_string(s)));
        const double lstm = tpr_at_fpr(*result.model("lstm").roc, 0.01);
        const double bigram = tpr_at_fpr(*result.model("bigram").roc, 0.01);
        wins += lstm > bigram;
        detail += (s > 1 ? "; " : "") + std::string("seed ") + std::to_string(s) + " lstm " + fmt(lstm, 3) + " vs bigram " +
                  fmt(bigram, 3);
    }
    return {wins >= 2, std::to_string(wins) + "/3 seeds won (" + detail + ")"};
}

// ---- 7: super-family structure

Outcome superfamily_structure(const fs::path& dir) {
    auto u1 = family_spec(GeneratorKind::UniformChar, "uniform_a", 701, 10000);
    auto u2 = family_spec(GeneratorKind::UniformChar, "uniform_b", 702, 10000);
    u2.min_length = 10;
    u2.max_length = 20;
    auto hex = family_spec(GeneratorKind::HexPrefixed, "hex", 703, 10000);
    hex.word_list_size = 32;
    hex.word_list_seed = 704;
    hex.min_length = 24;
    hex.max_length = 32;
    auto dict = family_spec(GeneratorKind::DictionaryConcat, "dictionary", 705, 10000);
    dict.word_list_size = 256;
    dict.word_list_seed = 706;
    std::vector<Dataset> parts{generate(u1), generate(u2), generate(hex), generate(dict)};
    const auto data = assemble(Dataset{}, parts, 707);
    const auto partition = super_families(family_unigrams(data), 0.2);

    fs::create_directories(dir);
    std::ofstream(dir / "dendrogram.json") << partition.to_json().dump(2) << "\n";

    const auto& of = partition.cluster_of;
    int hex_members = 0;
    for (const auto& [name, id] : of) hex_members += id == of.at("hex");
    const bool ok = of.at("uniform_a") == of.at("uniform_b") && hex_members == 1;
    std::string clusters;
    for (const auto& members : partition.clusters()) {
        clusters += clusters.empty() ? "" : " | ";
        for (std::size_t i = 0; i < members.size(); ++i) clusters += (i ? "," : "") + members[i];
    }
    return {ok, std::to_string(partition.cluster_count()) + " clusters: " + clusters};
}

// ---- 8: unseen template family

Outcome holdout_blind_spot(const fs::path& dir) {
    const auto benign = benign_spec(801, 10000);
    const auto uniform = family_spec(GeneratorKind::UniformChar, "uniform", 802, 10000);
    auto dict = family_spec(GeneratorKind::DictionaryConcat, "dictionary", 803, 10000);
    dict.word_list_size = 256;
    dict.word_list_seed = 804;
    auto tmpl = family_spec(GeneratorKind::RigidTemplate, "template", 805, 1000);
    tmpl.templates = {"ns1.backdates{N}", "ns2.backdates{N}", "ns1.backupdates{N}", "ns1.updatesys{N}"};
    tmpl.number_min = 0;
    tmpl.number_max = 999;
    tmpl.tlds = {"biz"};
    const auto data = build(benign, {uniform, dict, tmpl}, 806);
    const std::vector<ModelConfig> cfgs{lstm_config(25), simple_config(ModelKind::forest)};
    std::vector<ModelSpec> specs;
    for (const auto& c : cfgs) specs.push_back(model_spec(c));
    const auto result = run_holdout_families(specs, data, 1, 42);
    write_results(result, describe({benign, uniform, dict, tmpl}, cfgs), dir);
    const auto& l = recall_of(result.model("lstm"), "template");
    const auto& f = recall_of(result.model("forest"), "template");
    const bool ok = l.held_out && f.held_out && l.recall < 0.2 && f.recall > 0.8;
    return {ok, "held-out template recall: lstm " + fmt(l.recall, 3) + ", forest " + fmt(f.recall, 3)};
}

// ---- 9: byte-identical reruns

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    if (!fs::exists(dir)) return files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == "timings.json") continue;
        std::ifstream in(e.path(), std::ios::binary);
        files[fs::relative(e.path(), dir).string()] = std::string(std::istreambuf_iterator<char>(in), {});
    }
    return files;
}

using Runner = std::function<Outcome(const fs::path&)>;

const std::vector<std::pair<int, Runner>>& experiment_criteria() {
    static const std::vector<std::pair<int, Runner>> list{
        {5, binary_benchmark}, {6, dictionary_benchmark}, {7, superfamily_structure}, {8, holdout_blind_spot}};
    return list;
}

std::string criterion_dir(int n) { return "criterion" + std::to_string(n); }

Outcome determinism(const fs::path& out) {
    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const auto& [n, run] : experiment_criteria()) {
        const auto first = out / "run1" / criterion_dir(n);
        if (snapshot(first).empty()) run(first);
        const auto second = out / "run2" / criterion_dir(n);
        fs::remove_all(second);
        run(second);
        const auto a = snapshot(first), b = snapshot(second);
        if (a.size() != b.size()) differing.push_back(criterion_dir(n) + " (file sets differ)");
        for (const auto& [name, bytes] : a) {
            ++compared;
            auto it = b.find(name);
            if (it == b.end() || it->second != bytes) differing.push_back(criterion_dir(n) + "/" + name);
        }
    }
    std::string detail = std::to_string(compared) + " report files compared";
    for (std::size_t i = 0; i < differing.size() && i < 5; ++i) detail += (i ? ", " : "; differing: ") + differing[i];
    return {compared > 0 && differing.empty(), detail};
}

struct Criterion {
    int number;
    std::string title;
    double budget_seconds;
    std::function<Outcome(const fs::path&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    std::set<int> only;
    for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));

    auto in_run1 = [&out](int n, Outcome (*f)(const fs::path&)) {
        return [&out, n, f](const fs::path&) {
            fs::remove_all(out / "run1" / criterion_dir(n));
            return f(out / "run1" / criterion_dir(n));
        };
    };
    const std::vector<Criterion> criteria{
        {1, "metric oracle", 1, [](const fs::path&) { return metric_oracle(); }},
        {2, "AUC equals rank statistic", 10, [](const fs::path&) { return auc_dual(); }},
        {3, "HMM forward oracle and EM monotonicity", 30, [](const fs::path&) { return hmm_oracle(); }},
        {4, "LSTM gradient check", 60, [](const fs::path&) { return lstm_gradients(); }},
        {5, "binary benchmark AUC", 15 * 60, in_run1(5, binary_benchmark)},
        {6, "dictionary DGA recall at FPR 0.01", 10 * 60, in_run1(6, dictionary_benchmark)},
        {7, "super-family structure", 60, in_run1(7, superfamily_structure)},
        {8, "unseen template family blind spot", 10 * 60, in_run1(8, holdout_blind_spot)},
        {9, "deterministic reports", 1e9, [&out](const fs::path&) { return determinism(out); }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.number)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run(out);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_seconds;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::cout << "criterion " << c.number << " " << (pass ? "PASS" : "FAIL") << " " << c.title << ": " << o.detail
                  << " [" << fmt(secs, 1) << " s" << (in_time ? "" : ", over budget") << "]" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
