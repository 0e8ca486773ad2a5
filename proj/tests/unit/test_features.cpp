#include "dga/error.hpp"
#include "dga/features.hpp"
#include "dga/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

using namespace dga;

namespace {

NGramFrequencyTable table(int n, std::unordered_map<std::string, std::uint64_t> counts) {
    return NGramFrequencyTable(n, std::move(counts));
}

WordDictionary dict(std::vector<std::string> words) { return WordDictionary(words); }

std::string random_name(Rng& rng, std::string_view alphabet, int min_len, int max_len) {
    std::string s;
    const auto len = rng.between(min_len, max_len);
    for (long long i = 0; i < len; ++i) s.push_back(alphabet[rng.below(alphabet.size())]);
    return s;
}

// Best word coverage over every segmentation of s into pieces.
double coverage_by_segmentation(const std::string& s, const WordDictionary& d) {
    const std::size_t n = s.size();
    std::size_t best = 0;
    for (std::uint32_t cuts = 0; cuts < (1u << (n - 1)); ++cuts) {
        std::size_t start = 0, covered = 0;
        for (std::size_t i = 1; i <= n; ++i) {
            if (i == n || (cuts >> (i - 1) & 1u)) {
                if (d.contains(s.substr(start, i - start))) covered += i - start;
                start = i;
            }
        }
        best = std::max(best, covered);
    }
    return static_cast<double>(best) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("character entropy") {
    CHECK(char_entropy("aaaa") == 0.0);
    CHECK(char_entropy("ab") == doctest::Approx(1.0));
    CHECK(char_entropy("abcd") == doctest::Approx(2.0));
    CHECK(char_entropy("aab") == doctest::Approx(-(2.0 / 3) * std::log2(2.0 / 3) - (1.0 / 3) * std::log2(1.0 / 3)));
}

TEST_CASE("vowel consonant ratio") {
    CHECK(vowel_consonant_ratio("bcd") == 0.0);
    CHECK(vowel_consonant_ratio("ba") == 1.0);
    CHECK(vowel_consonant_ratio("aeiou") == 5.0);
    CHECK(vowel_consonant_ratio("a1b2-c") == doctest::Approx(1.0 / 2));
}

TEST_CASE("n-gram tables") {
    std::vector<std::string> one{"abc"};
    auto t = build_ngram_table(one, 3);
    CHECK(t.count("abc") == 1);
    CHECK(t.total() == 1);
    std::vector<std::string> two{"abab"};
    t = build_ngram_table(two, 3);
    CHECK(t.count("aba") == 1);
    CHECK(t.count("bab") == 1);
    CHECK(t.distinct() == 2);
    CHECK_THROWS_AS(build_ngram_table(one, 2), Error);
    CHECK_THROWS_AS(build_ngram_table(one, 6), Error);
}

TEST_CASE("n-gram total counts every window") {
    Rng rng(5);
    std::vector<std::string> corpus;
    std::uint64_t expected = 0;
    for (int i = 0; i < 100; ++i) {
        corpus.push_back(random_name(rng, "abcdef0-", 1, 12));
        expected += corpus.back().size() >= 3 ? corpus.back().size() - 2 : 0;
    }
    CHECK(build_ngram_table(corpus, 3).total() == expected);
}

TEST_CASE("n-gram TSV round trip") {
    std::vector<std::string> corpus{"google", "facebook", "goo"};
    const auto t = build_ngram_table(corpus, 4);
    std::stringstream ss;
    t.write_tsv(ss);
    const auto back = NGramFrequencyTable::read_tsv(ss, 4);
    CHECK(back.sorted_entries() == t.sorted_entries());
    CHECK(back.total() == t.total());
}

TEST_CASE("co-occurrence and normality") {
    const auto t = table(3, {{"abc", 5}});
    CHECK(cooccurrence_count("abc", t) == 1.0);
    CHECK(cooccurrence_count("xyz", t) == 0.0);
    CHECK(cooccurrence_count("ab", t) == 0.0);
    CHECK(ngram_normality("abc", table(3, {{"abc", 6}})) == 6.0);
    CHECK(ngram_normality("abcd", table(3, {{"abc", 4}, {"bcd", 2}})) == 3.0);
    CHECK(ngram_normality("xy", t) == 0.0);
}

TEST_CASE("meaningful ratio") {
    const auto d = dict({"face", "book", "cat"});
    CHECK(meaningful_ratio("facebook", d) == 1.0);
    CHECK(meaningful_ratio("face1234", d) == 0.5);
    CHECK(meaningful_ratio("zzzz", WordDictionary::bundled()) == 0.0);
    CHECK(meaningful_ratio("facebook", WordDictionary::bundled()) == 1.0);
}

TEST_CASE("meaningful ratio equals the best segmentation") {
    const auto d = dict({"abc", "bca", "cab", "aaa", "bbb", "abca", "ccab", "bcbc"});
    Rng rng(8);
    for (int i = 0; i < 300; ++i) {
        const auto s = random_name(rng, "abc", 1, 11);
        REQUIRE(meaningful_ratio(s, d) == doctest::Approx(coverage_by_segmentation(s, d)));
    }
}

TEST_CASE("word dictionary") {
    CHECK_THROWS_AS(dict({"ab!c"}), Error);
    CHECK_THROWS_AS(dict({"ab"}), Error);
    const auto d = dict({"Face", "book"});
    CHECK(d.contains("face"));
    CHECK(d.size() == 2);
    CHECK(d.fingerprint() == dict({"book", "face"}).fingerprint());
    CHECK(d.fingerprint() != dict({"book", "faces"}).fingerprint());
    CHECK(WordDictionary::bundled().size() > 1000);
}

TEST_CASE("feature vector") {
    std::vector<std::string> corpus{"google", "facebook", "aaaab"};
    NGramTables tables{build_ngram_table(corpus, 3), build_ngram_table(corpus, 4), build_ngram_table(corpus, 5)};
    const auto f = extract_features(parse_domain("aaaa.com"), tables, WordDictionary::bundled());
    CHECK(f.length == 4);
    CHECK(f.entropy == 0);
    CHECK(f.vowel_consonant_ratio == 4.0);
    CHECK(f.cooccurrence_3 == 2);  // "aaa" twice
    CHECK(f.normality_3 == 2);
    CHECK(f.cooccurrence_4 == 1);
    CHECK(f.cooccurrence_5 == 0);
    CHECK(FeatureVector::names().size() == FeatureVector::kSize);

    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const auto v = extract_features(parse_domain(random_name(rng, "abz09-.", 1, 20) + "x.com"), tables,
                                        WordDictionary::bundled())
                           .values();
        for (double x : v) REQUIRE(std::isfinite(x));
    }
}

TEST_CASE("held-out features match tables built without the domain") {
    Rng rng(12);
    std::vector<DomainName> corpus;
    for (int i = 0; i < 60; ++i) corpus.push_back(parse_domain(random_name(rng, "abcde", 4, 12) + std::to_string(i) + ".com"));
    const auto full = NGramTables::build(corpus);
    const auto& words = WordDictionary::bundled();
    for (std::size_t i = 0; i < corpus.size(); i += 7) {
        std::vector<DomainName> rest = corpus;
        rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
        const auto expected = extract_features(corpus[i], NGramTables::build(rest), words).values();
        const auto got = extract_features_held_out(corpus[i], full, words).values();
        for (std::size_t k = 0; k < expected.size(); ++k) REQUIRE(got[k] == doctest::Approx(expected[k]));
    }
}

TEST_CASE("bigram counts") {
    const auto& v = CharVocabulary::standard();
    const int a = *v.index_of('a'), b = *v.index_of('b');
    const auto c = bigram_counts(parse_domain("abab.com"));
    CHECK(c.counts.at(a * kVocabularySize + b) == 2);
    CHECK(c.counts.at(b * kVocabularySize + a) == 1);
    CHECK(c.counts.size() == 2);
    CHECK(bigram_counts(parse_domain("a.com")).counts.empty());
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        const auto s = random_name(rng, v.chars(), 1, 25);
        REQUIRE(bigram_counts(encode(s)).total() == static_cast<int>(s.size()) - 1);
    }
}

TEST_CASE("unigram distribution") {
    const auto& v = CharVocabulary::standard();
    std::vector<std::string> aa{"aa"};
    auto u = unigram_distribution(aa);
    CHECK(u.probabilities.size() == kVocabularySize);
    CHECK(u.probabilities(*v.index_of('a')) == 1.0);
    std::vector<std::string> ab{"ab", "ba"};
    u = unigram_distribution(ab);
    CHECK(u.probabilities(*v.index_of('a')) == 0.5);
    CHECK(u.probabilities(*v.index_of('b')) == 0.5);
    std::vector<std::string> none;
    CHECK_THROWS_AS(unigram_distribution(none), Error);
    Rng rng(6);
    for (int i = 0; i < 50; ++i) {
        std::vector<std::string> corpus;
        for (int j = 0; j < 20; ++j) corpus.push_back(random_name(rng, v.chars(), 1, 15));
        REQUIRE(unigram_distribution(corpus).probabilities.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}
