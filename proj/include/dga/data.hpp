#pragma once

#include "dga/domain.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dga {

enum class GeneratorKind {
    UniformChar,
    HexPrefixed,
    DictionaryConcat,
    VowelConsonantAlternating,
    RigidTemplate,
    PronounceableBenign,
};

std::string_view to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(std::string_view name);

/// Recipe for one synthetic family. Lengths bound the generated label (before
/// the TLD); for HexPrefixed they bound the hex suffix.
struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::UniformChar;
    std::string family;  // ignored for PronounceableBenign
    std::uint64_t seed = 42;
    int count = 1000;
    int min_length = 8;
    int max_length = 16;
    std::vector<std::string> tlds = {"com"};

    // DictionaryConcat words / HexPrefixed prefixes. When empty,
    // word_list_size words are drawn from the bundled dictionary with word_list_seed.
    std::vector<std::string> words;
    int word_list_size = 0;
    std::uint64_t word_list_seed = 0;
    int word_count = 2;

    // RigidTemplate: `{N}` is replaced by an integer in [number_min, number_max].
    std::vector<std::string> templates;
    long long number_min = 0;
    long long number_max = 99;

    // PronounceableBenign extras
    double subdomain_probability = 0.0;
    std::vector<std::string> subdomains = {"www", "ns1", "mail", "blog", "shop", "m", "app", "api", "cdn", "dev"};
    double digit_suffix_probability = 0.0;
    double hyphen_probability = 0.0;

    /// Throws InvalidSpec.
    void validate() const;
    /// The label every generated example receives.
    FamilyLabel label() const;
    /// Word list after resolving word_list_size against the bundled dictionary.
    std::vector<std::string> resolved_words() const;
};

void to_json(nlohmann::json& j, const GeneratorSpec& spec);
void from_json(const nlohmann::json& j, GeneratorSpec& spec);

struct SourceRecord {
    std::string name;
    std::string kind;
    std::uint64_t seed = 0;
    std::size_t requested = 0;
    std::size_t produced = 0;
};

struct Manifest {
    std::vector<SourceRecord> sources;
    std::map<std::string, std::size_t> counts;  // class name -> examples

    nlohmann::json to_json() const;
};

struct Dataset {
    std::vector<LabeledExample> examples;
    Manifest manifest;

    /// Recomputes manifest.counts from the examples.
    void recount();
    /// Sorted DGA family names.
    std::vector<std::string> families() const;
    std::map<std::string, std::size_t> family_support() const;
};

/// Deterministic in spec (including seed). Duplicate names are redrawn a
/// bounded number of times, so low-entropy templates may yield fewer than
/// `count` examples; the manifest records both numbers.
Dataset generate(const GeneratorSpec& spec);

/// Concatenates, drops duplicate (normalized domain, label) pairs when
/// `deduplicate`, shuffles with `seed` and merges manifests. Throws EmptyInput.
Dataset assemble(const Dataset& benign, std::span<const Dataset> families, std::uint64_t seed, bool deduplicate = true);

struct LoadResult {
    Dataset dataset;
    std::size_t skipped = 0;           // malformed lines
    std::vector<std::string> unknown;  // feed domains whose description matched no pattern
};

/// `rank,domain` lines; a `rank,domain` header is skipped. Throws FileUnreadable
/// or AllRowsMalformed.
LoadResult load_benign_csv(const std::filesystem::path& path);
LoadResult load_benign_csv(std::istream& in, const std::string& source_name = "benign");

struct FamilyPattern {
    std::string pattern;  // case-insensitive substring of the description
    std::string family;
};

std::vector<FamilyPattern> load_family_patterns(const std::filesystem::path& path);
const std::vector<FamilyPattern>& bundled_family_patterns();

/// `domain,description[,date[,source-url]]` lines; `#` comments skipped. The
/// first matching pattern (in table order) names the family.
LoadResult load_dga_feed(const std::filesystem::path& path, std::span<const FamilyPattern> patterns);
LoadResult load_dga_feed(std::istream& in, std::span<const FamilyPattern> patterns, const std::string& source_name = "feed");

/// Canonical `label,family,domain` files.
Dataset read_dataset_csv(const std::filesystem::path& path);
Dataset read_dataset_csv(std::istream& in);
void write_dataset_csv(std::ostream& out, const Dataset& dataset);

}  // namespace dga
