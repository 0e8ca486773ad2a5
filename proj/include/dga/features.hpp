#pragma once

#include "dga/domain.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dga {

/// Corpus counts of every contiguous length-n substring, n in {3, 4, 5}.
class NGramFrequencyTable {
public:
    NGramFrequencyTable(int n, std::unordered_map<std::string, std::uint64_t> counts);

    int n() const noexcept { return n_; }
    std::uint64_t total() const noexcept { return total_; }
    std::size_t distinct() const noexcept { return counts_.size(); }
    std::uint64_t count(std::string_view gram) const;

    /// `ngram<TAB>count` lines sorted lexicographically.
    void write_tsv(std::ostream& out) const;
    static NGramFrequencyTable read_tsv(std::istream& in, int n);
    std::vector<std::pair<std::string, std::uint64_t>> sorted_entries() const;

private:
    int n_;
    std::unordered_map<std::string, std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

NGramFrequencyTable build_ngram_table(std::span<const DomainName> corpus, int n);
NGramFrequencyTable build_ngram_table(std::span<const std::string> normalized_corpus, int n);

class WordDictionary {
public:
    WordDictionary() = default;
    /// Words are lowercased; entries shorter than three characters or with
    /// characters outside the vocabulary are rejected with InvalidArgument.
    explicit WordDictionary(std::span<const std::string> words);

    /// One word per line; blank lines and `#` comments skipped, short words ignored.
    static WordDictionary load(const std::filesystem::path& path);
    /// The word list bundled with the repository.
    static const WordDictionary& bundled();

    bool contains(std::string_view word) const { return words_.contains(std::string(word)); }
    std::size_t size() const noexcept { return words_.size(); }
    std::size_t max_length() const noexcept { return max_length_; }
    std::vector<std::string> sorted_words() const;

    /// FNV-1a over the sorted word list.
    std::uint64_t fingerprint() const;

private:
    std::unordered_set<std::string> words_;
    std::size_t max_length_ = 0;
};

std::filesystem::path bundled_data_dir();

struct FeatureVector {
    static constexpr std::size_t kSize = 10;

    double length = 0;
    double entropy = 0;
    double vowel_consonant_ratio = 0;
    double cooccurrence_3 = 0;
    double cooccurrence_4 = 0;
    double cooccurrence_5 = 0;
    double normality_3 = 0;
    double normality_4 = 0;
    double normality_5 = 0;
    double meaningful_ratio = 0;

    std::array<double, kSize> values() const;
    static const std::array<std::string_view, kSize>& names();
};

/// Table set backing the manual features: one table each for n = 3, 4, 5.
struct NGramTables {
    NGramFrequencyTable n3;
    NGramFrequencyTable n4;
    NGramFrequencyTable n5;

    static NGramTables build(std::span<const DomainName> corpus);
};

double char_entropy(const DomainName& d);
double char_entropy(std::string_view normalized);
double vowel_consonant_ratio(const DomainName& d);
double vowel_consonant_ratio(std::string_view normalized);
double cooccurrence_count(const DomainName& d, const NGramFrequencyTable& table);
double cooccurrence_count(std::string_view normalized, const NGramFrequencyTable& table);
double ngram_normality(const DomainName& d, const NGramFrequencyTable& table);
double ngram_normality(std::string_view normalized, const NGramFrequencyTable& table);
double meaningful_ratio(const DomainName& d, const WordDictionary& dict);
double meaningful_ratio(std::string_view normalized, const WordDictionary& dict);
FeatureVector extract_features(const DomainName& d, const NGramTables& tables, const WordDictionary& dict);
/// Features of a domain that is itself part of the tables' corpus, computed as
/// if its own n-gram occurrences were removed (leave-one-out).
FeatureVector extract_features_held_out(const DomainName& d, const NGramTables& tables, const WordDictionary& dict);

/// Sparse counts of adjacent vocabulary-index pairs; id = first * V + second.
struct BigramCountVector {
    static constexpr int kDimension = kVocabularySize * kVocabularySize;
    std::map<int, int> counts;

    int total() const;
};

BigramCountVector bigram_counts(const DomainName& d, const CharVocabulary& vocab = CharVocabulary::standard());
BigramCountVector bigram_counts(std::span<const int> encoded, const CharVocabulary& vocab = CharVocabulary::standard());

/// Character probabilities over the vocabulary (length V, sums to 1).
struct UnigramDistribution {
    Eigen::VectorXd probabilities;
};

UnigramDistribution unigram_distribution(std::span<const DomainName> names);
UnigramDistribution unigram_distribution(std::span<const std::string> normalized_names);

}  // namespace dga
