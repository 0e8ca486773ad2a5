#include "dga/classifier.hpp"
#include "dga/data.hpp"
#include "dga/error.hpp"
#include "dga/experiments.hpp"
#include "dga/hash.hpp"
#include "dga/lstm.hpp"
#include "dga/serialization.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace dga;

namespace {

struct Globals {
    std::uint64_t seed = 42;
    bool seed_given = false;
    std::string out;
    std::string config;
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

nlohmann::json parse_value(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        return text;
    }
}

// key=value overrides land in whichever config section defines the key.
void apply_overrides(ModelConfig& cfg, const std::vector<std::string>& overrides) {
    nlohmann::json j = cfg;
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "override '" + o + "' is not key=value");
        const std::string key = o.substr(0, eq);
        const auto value = parse_value(o.substr(eq + 1));
        bool placed = false;
        for (const char* section : {"training", "lstm", "hmm"}) {
            if (j[section].contains(key)) {
                j[section][key] = value;
                placed = true;
            }
        }
        if (!placed && j.contains(key) && key != "kind") {
            j[key] = value;
            placed = true;
        }
        if (!placed) throw Error(ErrorCode::InvalidArgument, "unknown training option '" + key + "'");
    }
    cfg = j.get<ModelConfig>();
}

TrainingSet training_set(const Dataset& data, bool multiclass) {
    TrainingSet set;
    set.class_names = {"benign"};
    if (multiclass) {
        for (const auto& f : data.families()) set.class_names.push_back(f);
    } else {
        set.class_names.push_back("dga");
    }
    for (const auto& ex : data.examples) {
        int c = 0;
        if (ex.label.is_dga()) {
            c = multiclass ? static_cast<int>(std::find(set.class_names.begin(), set.class_names.end(), ex.label.family()) -
                                              set.class_names.begin())
                           : 1;
        }
        set.examples.push_back(ex);
        set.classes.push_back(c);
    }
    return set;
}

int cmd_synth(const Globals& g) {
    if (g.config.empty() || g.out.empty()) throw Error(ErrorCode::InvalidArgument, "synth needs --config and --out");
    const auto j = read_json_file(g.config);
    const auto& list = j.is_object() && j.contains("generators") ? j.at("generators") : j;
    if (!list.is_array() || list.empty()) throw Error(ErrorCode::InvalidSpec, "generator spec list is empty");
    std::vector<GeneratorSpec> specs;
    try {
        specs = list.get<std::vector<GeneratorSpec>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidSpec, e.what());
    }
    Dataset benign;
    std::vector<Dataset> families;
    for (const auto& spec : specs) {
        auto part = generate(spec);
        if (spec.kind == GeneratorKind::PronounceableBenign) {
            benign.manifest.sources.insert(benign.manifest.sources.end(), part.manifest.sources.begin(),
                                           part.manifest.sources.end());
            benign.examples.insert(benign.examples.end(), part.examples.begin(), part.examples.end());
        } else {
            families.push_back(std::move(part));
        }
    }
    const Dataset data = assemble(benign, families, g.seed);
    std::ostringstream csv;
    write_dataset_csv(csv, data);
    auto manifest = data.manifest.to_json();
    manifest["seed"] = g.seed;
    manifest["spec_hash"] = hex64(fnv1a(list.dump()));
    write_text_file(g.out, csv.str());
    write_text_file(g.out + ".manifest.json", manifest.dump(2) + "\n");
    std::cerr << "wrote " << data.examples.size() << " examples to " << g.out << "\n";
    return 0;
}

int cmd_train(const Globals& g, const std::string& data_path, const std::string& kind, bool multiclass,
              const std::vector<std::string>& overrides) {
    if (g.out.empty()) throw Error(ErrorCode::InvalidArgument, "train needs --out");
    ModelConfig cfg;
    if (!g.config.empty()) cfg = read_json_file(g.config).get<ModelConfig>();
    cfg.kind = model_kind_from_string(kind);
    apply_overrides(cfg, overrides);
    if (g.seed_given) cfg = cfg.with_seed(g.seed);
    const Dataset data = read_dataset_csv(fs::path(data_path));
    TrainingTrace trace;
    const auto model = train_classifier(cfg, training_set(data, multiclass), &trace);
    const fs::path out(g.out);
    write_text_file(out / "model.json", model->to_json().dump() + "\n");
    std::ostringstream log;
    trace.write_csv(log);
    write_text_file(out / "training_log.csv", log.str());
    nlohmann::json manifest{{"dataset", data_path},
                            {"dataset_hash", hex64(fnv1a([&] {
                                 std::ostringstream o;
                                 write_dataset_csv(o, data);
                                 return o.str();
                             }()))},
                            {"config", cfg},
                            {"multiclass", multiclass},
                            {"config_hash", hex64(fnv1a(nlohmann::json(cfg).dump()))}};
    write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
    std::cerr << "trained " << cfg.display_name() << " on " << data.examples.size() << " examples\n";
    return 0;
}

int cmd_score(const Globals& g, const std::string& model_path) {
    const auto model = load_classifier(fs::path(model_path));
    const bool with_family = model->class_count() > 2 || model->kind() == "hmm";
    std::ofstream file;
    if (!g.out.empty()) {
        file.open(g.out);
        if (!file) throw Error(ErrorCode::IoError, "cannot write " + g.out);
    }
    std::ostream& out = g.out.empty() ? std::cout : file;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        try {
            const auto d = parse_domain(line);
            const double s = model->scores(std::span<const DomainName>(&d, 1)).front();
            out << line << ',' << num(s);
            if (with_family) out << ',' << model->family(d);
            out << '\n';
        } catch (const Error& e) {
            out << line << ",ERROR," << to_string(e.code()) << '\n';
        }
    }
    return 0;
}

int cmd_experiment(const Globals& g) {
    if (g.config.empty() || g.out.empty()) throw Error(ErrorCode::InvalidArgument, "experiment needs --config and --out");
    const fs::path config_path(g.config);
    auto cfg = ExperimentConfig::from_json(read_json_file(config_path), config_path.parent_path());
    if (g.seed_given) cfg.seed = g.seed;
    ExperimentHooks hooks;
    hooks.progress = [](const std::string& m) { std::cerr << m << "\n"; };
    const auto result = run_experiment(cfg, &hooks);
    write_results(result, cfg.to_json(), g.out);
    for (const auto& m : result.models) {
        std::cerr << m.name << ": micro F1 " << num(m.report.micro.f1);
        if (m.roc) std::cerr << ", AUC " << num(auc(*m.roc));
        std::cerr << "\n";
    }
    return 0;
}

template <typename Scalar>
void explain_with(const LstmClassifier<Scalar>& lstm, const std::vector<std::string>& domains, std::vector<int> cells,
                  const fs::path& out) {
    const int h = lstm.model().hidden_dim();
    if (cells.empty()) {
        for (int c = 0; c < h; ++c) cells.push_back(c);
    }
    for (int c : cells) {
        if (c < 0 || c >= h) throw Error(ErrorCode::InvalidArgument, "cell index " + std::to_string(c) + " out of range");
    }
    std::ostringstream trace;
    trace << "domain,step,char,cell_index,value\n";
    for (const auto& raw : domains) {
        const auto d = parse_domain(raw);
        const auto t = cell_trace(lstm.model(), lstm.clip(d));
        for (Eigen::Index step = 0; step < t.values.rows(); ++step) {
            const std::string ch = step == 0 ? "" : std::string(1, t.characters[static_cast<std::size_t>(step - 1)]);
            for (int c : cells) trace << raw << ',' << step << ',' << ch << ',' << c << ',' << num(t.values(step, c)) << '\n';
        }
    }
    write_text_file(out / "trace.csv", trace.str());
    const auto pca = embedding_pca(lstm.model());
    const auto& vocab = CharVocabulary::standard();
    std::ostringstream p;
    p << "char,pc1,pc2\n";
    for (int v = 0; v < vocab.size(); ++v) {
        p << vocab.char_at(v) << ',' << num(pca.coordinates(v, 0)) << ',' << num(pca.coordinates(v, 1)) << '\n';
    }
    write_text_file(out / "pca.csv", p.str());
}

int cmd_explain(const Globals& g, const std::string& model_path, std::vector<std::string> domains,
                const std::string& input, const std::vector<int>& cells) {
    if (g.out.empty()) throw Error(ErrorCode::InvalidArgument, "explain needs --out");
    const auto model = load_classifier(fs::path(model_path));
    if (!input.empty()) {
        std::ifstream in(input);
        if (!in) throw Error(ErrorCode::FileUnreadable, input);
        for (std::string line; std::getline(in, line);) {
            if (!line.empty()) domains.push_back(line);
        }
    }
    if (const auto* f = dynamic_cast<const LstmClassifier<float>*>(model.get())) {
        explain_with(*f, domains, cells, g.out);
    } else if (const auto* d = dynamic_cast<const LstmClassifier<double>*>(model.get())) {
        explain_with(*d, domains, cells, g.out);
    } else {
        throw Error(ErrorCode::WrongModelKind, "explain needs an LSTM model, got " + model->kind());
    }
    return 0;
}

int cmd_cluster(const Globals& g, const std::string& data_path, double threshold) {
    if (g.out.empty()) throw Error(ErrorCode::InvalidArgument, "cluster-families needs --out");
    const Dataset data = read_dataset_csv(fs::path(data_path));
    const auto unigrams = family_unigrams(data);
    if (unigrams.empty()) throw Error(ErrorCode::TooFewFamilies, "dataset has no DGA families");
    const auto partition = super_families(unigrams, threshold);
    const fs::path out(g.out);
    write_text_file(out / "dendrogram.json", partition.to_json().dump(2) + "\n");
    std::ostringstream clusters;
    clusters << "family,cluster\n";
    for (const auto& [name, id] : partition.cluster_of) clusters << name << ',' << id << '\n';
    write_text_file(out / "clusters.csv", clusters.str());
    const auto& vocab = CharVocabulary::standard();
    std::ostringstream u;
    u << "family";
    for (int v = 0; v < vocab.size(); ++v) u << ',' << vocab.char_at(v);
    u << '\n';
    for (const auto& [name, dist] : unigrams) {
        u << name;
        for (int v = 0; v < vocab.size(); ++v) u << ',' << num(dist.probabilities(v));
        u << '\n';
    }
    write_text_file(out / "unigrams.csv", u.str());
    std::cerr << partition.cluster_count() << " super families from " << unigrams.size() << " families\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DGA domain classifier toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->default_val(42);
    app.add_option("--out", g.out, "Output path");
    app.add_option("--config", g.config, "Configuration JSON");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from generator specs");

    auto* train = app.add_subcommand("train", "Train a model on a dataset CSV");
    std::string data_path, kind;
    bool multiclass = false;
    std::vector<std::string> overrides;
    train->add_option("--data", data_path, "label,family,domain CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--model", kind, "lstm|bigram|forest|hmm")
        ->required()
        ->check(CLI::IsMember({"lstm", "bigram", "forest", "hmm"}));
    train->add_flag("--multiclass", multiclass, "Benign plus one class per family");
    train->add_option("--set", overrides, "Training option override key=value");

    auto* score = app.add_subcommand("score", "Score domains read from standard input");
    std::string model_path;
    score->add_option("--model", model_path, "Trained model JSON")->required();

    auto* experiment = app.add_subcommand("experiment", "Run an experiment config");

    auto* explain = app.add_subcommand("explain", "Export LSTM cell traces and embedding PCA");
    std::vector<std::string> domains;
    std::string input;
    std::vector<int> cells;
    explain->add_option("--model", model_path, "Trained LSTM model JSON")->required();
    explain->add_option("domains", domains, "Domains to trace");
    explain->add_option("--input", input, "File with one domain per line");
    explain->add_option("--cell", cells, "Cell indices to trace (default all)");

    auto* cluster = app.add_subcommand("cluster-families", "Cluster DGA families into super families");
    double threshold = 0.2;
    cluster->add_option("--data", data_path, "label,family,domain CSV")->required()->check(CLI::ExistingFile);
    cluster->add_option("--threshold", threshold, "Cosine distance threshold")->default_val(0.2);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    g.seed_given = app.count("--seed") > 0;

    try {
        if (synth->parsed()) return cmd_synth(g);
        if (train->parsed()) return cmd_train(g, data_path, kind, multiclass, overrides);
        if (score->parsed()) return cmd_score(g, model_path);
        if (experiment->parsed()) return cmd_experiment(g);
        if (explain->parsed()) return cmd_explain(g, model_path, domains, input, cells);
        if (cluster->parsed()) return cmd_cluster(g, data_path, threshold);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
