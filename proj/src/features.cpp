#include "dga/features.hpp"

#include "dga/error.hpp"
#include "dga/hash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#ifndef DGA_DATA_DIR
#define DGA_DATA_DIR "data"
#endif

namespace dga {

namespace {

void check_n(int n) {
    if (n < 3 || n > 5) throw Error(ErrorCode::InvalidN, "n must be 3, 4 or 5, got " + std::to_string(n));
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

}  // namespace

NGramFrequencyTable::NGramFrequencyTable(int n, std::unordered_map<std::string, std::uint64_t> counts)
    : n_(n), counts_(std::move(counts)) {
    check_n(n);
    for (const auto& [gram, count] : counts_) {
        if (gram.size() != static_cast<std::size_t>(n)) {
            throw Error(ErrorCode::InvalidArgument, "n-gram '" + gram + "' does not have length " + std::to_string(n));
        }
        total_ += count;
    }
}

std::uint64_t NGramFrequencyTable::count(std::string_view gram) const {
    auto it = counts_.find(std::string(gram));
    return it == counts_.end() ? 0 : it->second;
}

std::vector<std::pair<std::string, std::uint64_t>> NGramFrequencyTable::sorted_entries() const {
    std::vector<std::pair<std::string, std::uint64_t>> entries(counts_.begin(), counts_.end());
    std::sort(entries.begin(), entries.end());
    return entries;
}

void NGramFrequencyTable::write_tsv(std::ostream& out) const {
    for (const auto& [gram, count] : sorted_entries()) out << gram << '\t' << count << '\n';
}

NGramFrequencyTable NGramFrequencyTable::read_tsv(std::istream& in, int n) {
    check_n(n);
    std::unordered_map<std::string, std::uint64_t> counts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorCode::InvalidArgument, "n-gram table line " + std::to_string(line_no) + " has no tab");
        }
        char* end = nullptr;
        std::string number = line.substr(tab + 1);
        unsigned long long value = std::strtoull(number.c_str(), &end, 10);
        if (number.empty() || *end != '\0') {
            throw Error(ErrorCode::InvalidArgument, "n-gram table line " + std::to_string(line_no) + " has a bad count");
        }
        counts[line.substr(0, tab)] += value;
    }
    return NGramFrequencyTable(n, std::move(counts));
}

NGramFrequencyTable build_ngram_table(std::span<const std::string> normalized_corpus, int n) {
    check_n(n);
    std::unordered_map<std::string, std::uint64_t> counts;
    const auto width = static_cast<std::size_t>(n);
    for (const auto& name : normalized_corpus) {
        for (std::size_t i = 0; i + width <= name.size(); ++i) ++counts[name.substr(i, width)];
    }
    return NGramFrequencyTable(n, std::move(counts));
}

NGramFrequencyTable build_ngram_table(std::span<const DomainName> corpus, int n) {
    std::vector<std::string> names;
    names.reserve(corpus.size());
    for (const auto& d : corpus) names.push_back(d.normalized());
    return build_ngram_table(names, n);
}

NGramTables NGramTables::build(std::span<const DomainName> corpus) {
    return NGramTables{build_ngram_table(corpus, 3), build_ngram_table(corpus, 4), build_ngram_table(corpus, 5)};
}

WordDictionary::WordDictionary(std::span<const std::string> words) {
    const auto& vocab = CharVocabulary::standard();
    for (const auto& word : words) {
        std::string lower = word;
        for (auto& c : lower) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
        if (lower.size() < 3) throw Error(ErrorCode::InvalidArgument, "dictionary word '" + word + "' shorter than 3");
        for (std::size_t i = 0; i < lower.size(); ++i) {
            if (!vocab.contains(lower[i])) throw InvalidCharacterError(lower[i], i);
        }
        max_length_ = std::max(max_length_, lower.size());
        words_.insert(std::move(lower));
    }
}

WordDictionary WordDictionary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileUnreadable, path.string());
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line.front() == '#' || line.size() < 3) continue;
        words.push_back(line);
    }
    return WordDictionary(words);
}

std::filesystem::path bundled_data_dir() {
    if (const char* env = std::getenv("DGA_DATA_DIR"); env != nullptr && *env != '\0') return env;
    return DGA_DATA_DIR;
}

const WordDictionary& WordDictionary::bundled() {
    static const WordDictionary dict = load(bundled_data_dir() / "words_en.txt");
    return dict;
}

std::vector<std::string> WordDictionary::sorted_words() const {
    std::vector<std::string> out(words_.begin(), words_.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t WordDictionary::fingerprint() const {
    std::uint64_t hash = fnv1a("");
    for (const auto& word : sorted_words()) {
        hash = fnv1a(word, hash);
        hash = fnv1a("\n", hash);
    }
    return hash;
}

std::array<double, FeatureVector::kSize> FeatureVector::values() const {
    return {length,         entropy,        vowel_consonant_ratio, cooccurrence_3, cooccurrence_4,
            cooccurrence_5, normality_3,    normality_4,           normality_5,    meaningful_ratio};
}

const std::array<std::string_view, FeatureVector::kSize>& FeatureVector::names() {
    static const std::array<std::string_view, kSize> names = {
        "length",         "entropy",     "vowel_consonant_ratio", "cooccurrence_3", "cooccurrence_4",
        "cooccurrence_5", "normality_3", "normality_4",           "normality_5",    "meaningful_ratio"};
    return names;
}

double char_entropy(std::string_view s) {
    if (s.empty()) return 0.0;
    std::array<int, 256> counts{};
    for (unsigned char c : s) ++counts[c];
    double entropy = 0.0;
    const auto n = static_cast<double>(s.size());
    for (int count : counts) {
        if (count == 0) continue;
        double p = count / n;
        entropy -= p * std::log2(p);
    }
    return entropy;
}

double char_entropy(const DomainName& d) { return char_entropy(d.normalized()); }

double vowel_consonant_ratio(std::string_view s) {
    int vowels = 0;
    int consonants = 0;
    for (char c : s) {
        if (c < 'a' || c > 'z') continue;
        if (is_vowel(c)) {
            ++vowels;
        } else {
            ++consonants;
        }
    }
    return static_cast<double>(vowels) / std::max(consonants, 1);
}

double vowel_consonant_ratio(const DomainName& d) { return vowel_consonant_ratio(d.normalized()); }

double cooccurrence_count(std::string_view s, const NGramFrequencyTable& table) {
    const auto n = static_cast<std::size_t>(table.n());
    double present = 0;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
        if (table.count(s.substr(i, n)) > 0) present += 1;
    }
    return present;
}

double cooccurrence_count(const DomainName& d, const NGramFrequencyTable& table) {
    return cooccurrence_count(d.normalized(), table);
}

double ngram_normality(std::string_view s, const NGramFrequencyTable& table) {
    const auto n = static_cast<std::size_t>(table.n());
    if (s.size() < n) return 0.0;
    double sum = 0;
    std::size_t grams = 0;
    for (std::size_t i = 0; i + n <= s.size(); ++i, ++grams) sum += static_cast<double>(table.count(s.substr(i, n)));
    return sum / static_cast<double>(grams);
}

double ngram_normality(const DomainName& d, const NGramFrequencyTable& table) {
    return ngram_normality(d.normalized(), table);
}

double meaningful_ratio(std::string_view s, const WordDictionary& dict) {
    if (s.empty()) return 0.0;
    // best[i]: most characters of s[0, i) coverable by non-overlapping words.
    std::vector<std::size_t> best(s.size() + 1, 0);
    const std::size_t longest = dict.max_length();
    for (std::size_t i = 1; i <= s.size(); ++i) {
        best[i] = best[i - 1];
        for (std::size_t len = 3; len <= std::min(longest, i); ++len) {
            if (dict.contains(s.substr(i - len, len))) best[i] = std::max(best[i], best[i - len] + len);
        }
    }
    return static_cast<double>(best.back()) / static_cast<double>(s.size());
}

double meaningful_ratio(const DomainName& d, const WordDictionary& dict) { return meaningful_ratio(d.normalized(), dict); }

FeatureVector extract_features(const DomainName& d, const NGramTables& tables, const WordDictionary& dict) {
    if (tables.n3.n() != 3 || tables.n4.n() != 4 || tables.n5.n() != 5) {
        throw Error(ErrorCode::InvalidN, "feature tables must be built for n = 3, 4, 5");
    }
    const std::string& s = d.normalized();
    FeatureVector f;
    f.length = static_cast<double>(s.size());
    f.entropy = char_entropy(s);
    f.vowel_consonant_ratio = vowel_consonant_ratio(s);
    f.cooccurrence_3 = cooccurrence_count(s, tables.n3);
    f.cooccurrence_4 = cooccurrence_count(s, tables.n4);
    f.cooccurrence_5 = cooccurrence_count(s, tables.n5);
    f.normality_3 = ngram_normality(s, tables.n3);
    f.normality_4 = ngram_normality(s, tables.n4);
    f.normality_5 = ngram_normality(s, tables.n5);
    f.meaningful_ratio = meaningful_ratio(s, dict);
    return f;
}

namespace {

// count(g) minus the occurrences contributed by s itself
void held_out_ngram_features(std::string_view s, const NGramFrequencyTable& table, double& cooccurrence,
                             double& normality) {
    const auto n = static_cast<std::size_t>(table.n());
    cooccurrence = 0;
    normality = 0;
    if (s.size() < n) return;
    std::unordered_map<std::string_view, std::uint64_t> own;
    for (std::size_t i = 0; i + n <= s.size(); ++i) ++own[s.substr(i, n)];
    double sum = 0;
    std::size_t grams = 0;
    for (std::size_t i = 0; i + n <= s.size(); ++i, ++grams) {
        const auto g = s.substr(i, n);
        const std::uint64_t total = table.count(g);
        const std::uint64_t mine = own[g];
        const std::uint64_t rest = total > mine ? total - mine : 0;
        if (rest > 0) cooccurrence += 1;
        sum += static_cast<double>(rest);
    }
    normality = sum / static_cast<double>(grams);
}

}  // namespace

FeatureVector extract_features_held_out(const DomainName& d, const NGramTables& tables, const WordDictionary& dict) {
    FeatureVector f = extract_features(d, tables, dict);
    const std::string& s = d.normalized();
    held_out_ngram_features(s, tables.n3, f.cooccurrence_3, f.normality_3);
    held_out_ngram_features(s, tables.n4, f.cooccurrence_4, f.normality_4);
    held_out_ngram_features(s, tables.n5, f.cooccurrence_5, f.normality_5);
    return f;
}

int BigramCountVector::total() const {
    int sum = 0;
    for (const auto& [id, count] : counts) sum += count;
    return sum;
}

BigramCountVector bigram_counts(std::span<const int> encoded, const CharVocabulary& vocab) {
    BigramCountVector out;
    const int v = vocab.size();
    for (std::size_t i = 0; i + 1 < encoded.size(); ++i) {
        int a = encoded[i];
        int b = encoded[i + 1];
        if (a < 0 || a >= v || b < 0 || b >= v) throw Error(ErrorCode::IndexOutOfVocabulary, "bigram index");
        ++out.counts[a * v + b];
    }
    return out;
}

BigramCountVector bigram_counts(const DomainName& d, const CharVocabulary& vocab) {
    return bigram_counts(d.encoded(), vocab);
}

UnigramDistribution unigram_distribution(std::span<const std::string> normalized_names) {
    const auto& vocab = CharVocabulary::standard();
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(vocab.size());
    for (const auto& name : normalized_names) {
        for (std::size_t i = 0; i < name.size(); ++i) {
            auto index = vocab.index_of(name[i]);
            if (!index) throw InvalidCharacterError(name[i], i);
            counts[*index] += 1.0;
        }
    }
    const double total = counts.sum();
    if (total <= 0) throw Error(ErrorCode::EmptyInput, "unigram distribution needs at least one character");
    return UnigramDistribution{counts / total};
}

UnigramDistribution unigram_distribution(std::span<const DomainName> names) {
    std::vector<std::string> normalized;
    normalized.reserve(names.size());
    for (const auto& d : names) normalized.push_back(d.normalized());
    return unigram_distribution(normalized);
}

}  // namespace dga
