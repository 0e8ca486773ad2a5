#include "dga/data.hpp"

#include "dga/error.hpp"
#include "dga/features.hpp"
#include "dga/random.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace dga {

namespace {

constexpr std::string_view kAlphanumeric = "abcdefghijklmnopqrstuvwxyz0123456789";
constexpr std::string_view kHex = "0123456789abcdef";
constexpr std::string_view kVowels = "aeiou";
constexpr std::string_view kConsonants = "bcdfghjklmnpqrstvwxyz";

struct KindName {
    GeneratorKind kind;
    std::string_view name;
};

constexpr std::array<KindName, 6> kKindNames = {{
    {GeneratorKind::UniformChar, "uniform_char"},
    {GeneratorKind::HexPrefixed, "hex_prefixed"},
    {GeneratorKind::DictionaryConcat, "dictionary_concat"},
    {GeneratorKind::VowelConsonantAlternating, "vowel_consonant_alternating"},
    {GeneratorKind::RigidTemplate, "rigid_template"},
    {GeneratorKind::PronounceableBenign, "pronounceable_benign"},
}};

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            return fields;
        }
        fields.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

char pick(Rng& rng, std::string_view alphabet) { return alphabet[rng.below(alphabet.size())]; }

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
    return items[rng.below(items.size())];
}

// Order-2 character Markov chain over a word list; '^' pads the start, '$' ends a word.
class WordMarkovChain {
public:
    explicit WordMarkovChain(const std::vector<std::string>& words) {
        for (const auto& w : words) {
            int a = kStart, b = kStart;
            for (char c : w) {
                if (c < 'a' || c > 'z') continue;
                const int next = c - 'a';
                ++counts_[static_cast<std::size_t>(context(a, b))][static_cast<std::size_t>(next)];
                a = b;
                b = next;
            }
            ++counts_[static_cast<std::size_t>(context(a, b))][kEnd];
        }
        for (auto& row : counts_) {
            std::uint64_t total = 0;
            for (auto c : row) total += c;
            row_totals_.push_back(total);
        }
    }

    std::string sample_word(Rng& rng, std::size_t max_length) const {
        std::string word;
        int a = kStart, b = kStart;
        while (word.size() < max_length) {
            const auto ctx = static_cast<std::size_t>(context(a, b));
            if (row_totals_[ctx] == 0) break;
            std::uint64_t r = rng.below(row_totals_[ctx]);
            std::size_t next = 0;
            while (r >= counts_[ctx][next]) r -= counts_[ctx][next++];
            if (next == kEnd) break;
            word.push_back(static_cast<char>('a' + next));
            a = b;
            b = static_cast<int>(next);
        }
        return word;
    }

private:
    static constexpr int kStart = 26;
    static constexpr std::size_t kEnd = 26;
    static int context(int a, int b) { return a * 27 + b; }

    std::array<std::array<std::uint64_t, 27>, 27 * 27> counts_{};
    std::vector<std::uint64_t> row_totals_;
};

const WordMarkovChain& bundled_chain() {
    static const WordMarkovChain chain(WordDictionary::bundled().sorted_words());
    return chain;
}

std::string pronounceable_label(const GeneratorSpec& spec, Rng& rng) {
    const auto& chain = bundled_chain();
    const auto target = static_cast<std::size_t>(rng.between(spec.min_length, spec.max_length));
    std::string label;
    while (label.size() < target) {
        std::string word;
        for (int attempt = 0; attempt < 20 && word.size() < 3; ++attempt) word = chain.sample_word(rng, 14);
        if (!label.empty() && rng.bernoulli(spec.hyphen_probability)) label.push_back('-');
        label += word;
    }
    if (label.size() > static_cast<std::size_t>(spec.max_length)) label.resize(static_cast<std::size_t>(spec.max_length));
    while (!label.empty() && label.back() == '-') label.pop_back();
    if (rng.bernoulli(spec.digit_suffix_probability)) label += std::to_string(rng.between(0, 999));
    if (!spec.subdomains.empty() && rng.bernoulli(spec.subdomain_probability)) {
        label = pick(rng, spec.subdomains) + "." + label;
    }
    return label;
}

std::string generate_label(const GeneratorSpec& spec, const std::vector<std::string>& words, Rng& rng) {
    switch (spec.kind) {
        case GeneratorKind::UniformChar: {
            std::string out(static_cast<std::size_t>(rng.between(spec.min_length, spec.max_length)), ' ');
            for (auto& c : out) c = pick(rng, kAlphanumeric);
            return out;
        }
        case GeneratorKind::HexPrefixed: {
            std::string out = pick(rng, words);
            const auto n = rng.between(spec.min_length, spec.max_length);
            for (long long i = 0; i < n; ++i) out.push_back(pick(rng, kHex));
            return out;
        }
        case GeneratorKind::DictionaryConcat: {
            std::string out;
            for (int i = 0; i < spec.word_count; ++i) out += pick(rng, words);
            return out;
        }
        case GeneratorKind::VowelConsonantAlternating: {
            const auto n = static_cast<std::size_t>(rng.between(spec.min_length, spec.max_length));
            bool vowel = rng.bernoulli(0.5);
            std::string out;
            for (std::size_t i = 0; i < n; ++i, vowel = !vowel) out.push_back(pick(rng, vowel ? kVowels : kConsonants));
            return out;
        }
        case GeneratorKind::RigidTemplate: {
            std::string out = pick(rng, spec.templates);
            const auto slot = out.find("{N}");
            out.replace(slot, 3, std::to_string(rng.between(spec.number_min, spec.number_max)));
            return out;
        }
        case GeneratorKind::PronounceableBenign:
            return pronounceable_label(spec, rng);
    }
    throw Error(ErrorCode::InvalidSpec, "unknown generator kind");
}

std::string class_name(const FamilyLabel& label) { return label.name(); }

}  // namespace

std::string_view to_string(GeneratorKind kind) {
    for (const auto& k : kKindNames) {
        if (k.kind == kind) return k.name;
    }
    return "unknown";
}

GeneratorKind generator_kind_from_string(std::string_view name) {
    for (const auto& k : kKindNames) {
        if (k.name == name) return k.kind;
    }
    throw Error(ErrorCode::InvalidSpec, "unknown generator kind '" + std::string(name) + "'");
}

void GeneratorSpec::validate() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidSpec, why); };
    if (count < 1) fail("count must be >= 1");
    if (min_length < 1 || min_length > max_length) fail("length bounds must satisfy 1 <= min <= max");
    if (tlds.empty()) fail("at least one TLD is required");
    for (const auto& tld : tlds) {
        if (tld.empty() || tld.find('.') != std::string::npos) fail("invalid TLD '" + tld + "'");
    }
    if (kind != GeneratorKind::PronounceableBenign) {
        try {
            (void)FamilyLabel::dga(family);
        } catch (const Error&) {
            fail("generator needs a valid family name, got '" + family + "'");
        }
    }
    if (kind == GeneratorKind::HexPrefixed || kind == GeneratorKind::DictionaryConcat) {
        if (words.empty() && word_list_size < 1) fail("word list is empty");
        if (word_count < 1) fail("word_count must be >= 1");
        if (!words.empty()) {
            try {
                (void)WordDictionary(words);
            } catch (const Error& e) {
                fail(e.what());
            }
        }
    }
    if (kind == GeneratorKind::RigidTemplate) {
        if (templates.empty()) fail("rigid_template needs templates");
        for (const auto& t : templates) {
            if (t.find("{N}") == std::string::npos) fail("template '" + t + "' has no {N} slot");
        }
        if (number_min < 0 || number_min > number_max) fail("number range must satisfy 0 <= min <= max");
    }
    if (subdomain_probability < 0 || subdomain_probability > 1 || digit_suffix_probability < 0 ||
        digit_suffix_probability > 1 || hyphen_probability < 0 || hyphen_probability > 1) {
        fail("probabilities must be in [0, 1]");
    }
}

FamilyLabel GeneratorSpec::label() const {
    return kind == GeneratorKind::PronounceableBenign ? FamilyLabel::benign() : FamilyLabel::dga(family);
}

std::vector<std::string> GeneratorSpec::resolved_words() const {
    if (!words.empty()) return words;
    auto all = WordDictionary::bundled().sorted_words();
    const auto n = std::min(all.size(), static_cast<std::size_t>(word_list_size));
    Rng rng(word_list_seed);
    for (std::size_t i = 0; i < n; ++i) std::swap(all[i], all[i + rng.below(all.size() - i)]);
    all.resize(n);
    return all;
}

void to_json(nlohmann::json& j, const GeneratorSpec& spec) {
    j = nlohmann::json{{"kind", std::string(to_string(spec.kind))},
                       {"family", spec.family},
                       {"seed", spec.seed},
                       {"count", spec.count},
                       {"min_length", spec.min_length},
                       {"max_length", spec.max_length},
                       {"tlds", spec.tlds},
                       {"words", spec.words},
                       {"word_list_size", spec.word_list_size},
                       {"word_list_seed", spec.word_list_seed},
                       {"word_count", spec.word_count},
                       {"templates", spec.templates},
                       {"number_min", spec.number_min},
                       {"number_max", spec.number_max},
                       {"subdomain_probability", spec.subdomain_probability},
                       {"subdomains", spec.subdomains},
                       {"digit_suffix_probability", spec.digit_suffix_probability},
                       {"hyphen_probability", spec.hyphen_probability}};
}

void from_json(const nlohmann::json& j, GeneratorSpec& spec) {
    try {
        if (!j.is_object()) throw Error(ErrorCode::InvalidSpec, "generator spec must be an object");
        spec.kind = generator_kind_from_string(j.at("kind").get<std::string>());
        spec.family = j.value("family", spec.family);
        spec.seed = j.value("seed", spec.seed);
        spec.count = j.value("count", spec.count);
        spec.min_length = j.value("min_length", spec.min_length);
        spec.max_length = j.value("max_length", spec.max_length);
        spec.tlds = j.value("tlds", spec.tlds);
        spec.words = j.value("words", spec.words);
        spec.word_list_size = j.value("word_list_size", spec.word_list_size);
        spec.word_list_seed = j.value("word_list_seed", spec.word_list_seed);
        spec.word_count = j.value("word_count", spec.word_count);
        spec.templates = j.value("templates", spec.templates);
        spec.number_min = j.value("number_min", spec.number_min);
        spec.number_max = j.value("number_max", spec.number_max);
        spec.subdomain_probability = j.value("subdomain_probability", spec.subdomain_probability);
        spec.subdomains = j.value("subdomains", spec.subdomains);
        spec.digit_suffix_probability = j.value("digit_suffix_probability", spec.digit_suffix_probability);
        spec.hyphen_probability = j.value("hyphen_probability", spec.hyphen_probability);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidSpec, e.what());
    }
}

nlohmann::json Manifest::to_json() const {
    nlohmann::json sources_json = nlohmann::json::array();
    for (const auto& s : sources) {
        sources_json.push_back({{"name", s.name},
                                {"kind", s.kind},
                                {"seed", s.seed},
                                {"requested", s.requested},
                                {"produced", s.produced}});
    }
    std::size_t total = 0;
    for (const auto& [name, count] : counts) total += count;
    return {{"sources", sources_json}, {"counts", counts}, {"total", total}};
}

void Dataset::recount() {
    manifest.counts.clear();
    for (const auto& ex : examples) ++manifest.counts[class_name(ex.label)];
}

std::vector<std::string> Dataset::families() const {
    std::set<std::string> names;
    for (const auto& ex : examples) {
        if (ex.label.is_dga()) names.insert(ex.label.family());
    }
    return {names.begin(), names.end()};
}

std::map<std::string, std::size_t> Dataset::family_support() const {
    std::map<std::string, std::size_t> support;
    for (const auto& ex : examples) {
        if (ex.label.is_dga()) ++support[ex.label.family()];
    }
    return support;
}

Dataset generate(const GeneratorSpec& spec) {
    spec.validate();
    const auto words = (spec.kind == GeneratorKind::HexPrefixed || spec.kind == GeneratorKind::DictionaryConcat)
                           ? spec.resolved_words()
                           : std::vector<std::string>{};
    const FamilyLabel label = spec.label();
    Rng rng(spec.seed);
    Dataset out;
    std::unordered_set<std::string> seen;
    const auto wanted = static_cast<std::size_t>(spec.count);
    const std::size_t max_attempts = wanted * 50;
    for (std::size_t attempt = 0; attempt < max_attempts && out.examples.size() < wanted; ++attempt) {
        std::string raw = generate_label(spec, words, rng) + "." + pick(rng, spec.tlds);
        DomainName domain = parse_domain(raw);
        if (!seen.insert(domain.normalized()).second) continue;
        out.examples.push_back(LabeledExample{std::move(domain), label});
    }
    const std::string name = spec.kind == GeneratorKind::PronounceableBenign ? "benign" : label.family();
    out.manifest.sources.push_back(
        SourceRecord{name, std::string(to_string(spec.kind)), spec.seed, wanted, out.examples.size()});
    out.recount();
    return out;
}

Dataset assemble(const Dataset& benign, std::span<const Dataset> families, std::uint64_t seed, bool deduplicate) {
    Dataset out;
    std::set<std::pair<std::string, std::string>> seen;
    auto append = [&](const Dataset& part) {
        out.manifest.sources.insert(out.manifest.sources.end(), part.manifest.sources.begin(), part.manifest.sources.end());
        for (const auto& ex : part.examples) {
            if (deduplicate && !seen.emplace(ex.domain.normalized(), ex.label.name()).second) continue;
            out.examples.push_back(ex);
        }
    };
    append(benign);
    for (const auto& part : families) append(part);
    if (out.examples.empty()) throw Error(ErrorCode::EmptyInput, "nothing to assemble");
    Rng rng(seed);
    rng.shuffle(std::span<LabeledExample>(out.examples));
    out.recount();
    return out;
}

LoadResult load_benign_csv(std::istream& in, const std::string& source_name) {
    LoadResult result;
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        if (rows == 0 && lower(text) == "rank,domain") continue;
        ++rows;
        const auto fields = split(text, ',');
        if (fields.size() != 2 || trim(fields[0]).empty() ||
            trim(fields[0]).find_first_not_of("0123456789") != std::string::npos) {
            ++result.skipped;
            continue;
        }
        try {
            result.dataset.examples.push_back(LabeledExample{parse_domain(trim(fields[1])), FamilyLabel::benign()});
        } catch (const Error&) {
            ++result.skipped;
        }
    }
    if (result.dataset.examples.empty()) {
        throw Error(ErrorCode::AllRowsMalformed, source_name + ": no usable rows (" + std::to_string(result.skipped) +
                                                     " malformed)");
    }
    result.dataset.manifest.sources.push_back(
        SourceRecord{source_name, "alexa_csv", 0, rows, result.dataset.examples.size()});
    result.dataset.recount();
    return result;
}

LoadResult load_benign_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileUnreadable, path.string());
    return load_benign_csv(in, path.filename().string());
}

std::vector<FamilyPattern> load_family_patterns(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileUnreadable, path.string());
    std::vector<FamilyPattern> patterns;
    try {
        const auto doc = nlohmann::json::parse(in);
        for (const auto& entry : doc.at("patterns")) {
            patterns.push_back({lower(entry.at("pattern").get<std::string>()), entry.at("family").get<std::string>()});
            (void)FamilyLabel::dga(patterns.back().family);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidSpec, path.string() + ": " + e.what());
    }
    return patterns;
}

const std::vector<FamilyPattern>& bundled_family_patterns() {
    static const std::vector<FamilyPattern> patterns = load_family_patterns(bundled_data_dir() / "family_patterns.json");
    return patterns;
}

LoadResult load_dga_feed(std::istream& in, std::span<const FamilyPattern> patterns, const std::string& source_name) {
    LoadResult result;
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        ++rows;
        const auto fields = split(text, ',');
        if (fields.size() < 2 || fields.size() > 4) {
            ++result.skipped;
            continue;
        }
        const std::string raw = trim(fields[0]);
        const std::string description = lower(fields[1]);
        const FamilyPattern* match = nullptr;
        for (const auto& p : patterns) {
            if (description.find(p.pattern) != std::string::npos) {
                match = &p;
                break;
            }
        }
        try {
            DomainName domain = parse_domain(raw);
            if (match == nullptr) {
                result.unknown.push_back(raw);
                continue;
            }
            result.dataset.examples.push_back(LabeledExample{std::move(domain), FamilyLabel::dga(match->family)});
        } catch (const Error&) {
            ++result.skipped;
        }
    }
    result.dataset.manifest.sources.push_back(
        SourceRecord{source_name, "dga_feed", 0, rows, result.dataset.examples.size()});
    result.dataset.recount();
    return result;
}

LoadResult load_dga_feed(const std::filesystem::path& path, std::span<const FamilyPattern> patterns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileUnreadable, path.string());
    return load_dga_feed(in, patterns, path.filename().string());
}

Dataset read_dataset_csv(std::istream& in) {
    Dataset out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#' || text == "label,family,domain") continue;
        const auto fields = split(text, ',');
        auto fail = [&](const std::string& why) {
            throw Error(ErrorCode::InvalidArgument, "dataset line " + std::to_string(line_no) + ": " + why);
        };
        if (fields.size() != 3) fail("expected label,family,domain");
        const std::string label = lower(trim(fields[0]));
        const std::string family = trim(fields[1]);
        FamilyLabel parsed = FamilyLabel::benign();
        if (label == "benign") {
            if (family != "-") fail("benign rows use family '-'");
        } else if (label == "dga") {
            try {
                parsed = FamilyLabel::dga(family);
            } catch (const Error& e) {
                fail(e.what());
            }
        } else {
            fail("label must be benign or dga");
        }
        try {
            out.examples.push_back(LabeledExample{parse_domain(trim(fields[2])), parsed});
        } catch (const Error& e) {
            fail(e.what());
        }
    }
    out.recount();
    return out;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileUnreadable, path.string());
    Dataset out = read_dataset_csv(in);
    out.manifest.sources.push_back(SourceRecord{path.filename().string(), "dataset_csv", 0, out.examples.size(),
                                                out.examples.size()});
    return out;
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
    out << "# label,family,domain\n";
    for (const auto& ex : dataset.examples) {
        out << (ex.label.is_benign() ? "benign,-," : "dga," + ex.label.family() + ",") << ex.domain.raw() << '\n';
    }
}

}  // namespace dga
