#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dga {

/// Encoded character sequence; each entry is a vocabulary index.
using Sequence = std::vector<int>;

/// The valid domain characters `-`, `.`, `0`-`9`, `_`, `a`-`z`, ordered by
/// code point. index_of(char_at(i)) == i for all i < size().
class CharVocabulary {
public:
    CharVocabulary();

    static const CharVocabulary& standard();

    int size() const noexcept { return static_cast<int>(chars_.size()); }
    char char_at(int index) const { return chars_.at(static_cast<std::size_t>(index)); }
    std::optional<int> index_of(char c) const noexcept {
        int i = index_[static_cast<unsigned char>(c)];
        return i < 0 ? std::nullopt : std::optional<int>(i);
    }
    bool contains(char c) const noexcept { return index_[static_cast<unsigned char>(c)] >= 0; }
    std::string_view chars() const noexcept { return chars_; }

private:
    std::string chars_;
    std::array<int, 256> index_{};
};

inline constexpr int kVocabularySize = 39;

Sequence encode(std::string_view normalized, const CharVocabulary& vocab = CharVocabulary::standard());
std::string decode(std::span<const int> encoded, const CharVocabulary& vocab = CharVocabulary::standard());

/// A domain after lowercasing and TLD removal. Only parse_domain creates one,
/// so normalized() is always nonempty and fully inside the vocabulary.
class DomainName {
public:
    const std::string& raw() const noexcept { return raw_; }
    const std::string& normalized() const noexcept { return normalized_; }
    const Sequence& encoded() const noexcept { return encoded_; }
    std::size_t length() const noexcept { return normalized_.size(); }

    friend bool operator==(const DomainName& a, const DomainName& b) { return a.normalized_ == b.normalized_; }

private:
    friend DomainName parse_domain(std::string_view raw, const CharVocabulary& vocab);
    DomainName(std::string raw, std::string normalized, Sequence encoded)
        : raw_(std::move(raw)), normalized_(std::move(normalized)), encoded_(std::move(encoded)) {}

    std::string raw_;
    std::string normalized_;
    Sequence encoded_;
};

/// Lowercases, drops one trailing root dot, strips the final label (the TLD)
/// and validates the remainder. Throws EmptyAfterNormalization or
/// InvalidCharacterError.
DomainName parse_domain(std::string_view raw, const CharVocabulary& vocab = CharVocabulary::standard());

class FamilyLabel {
public:
    static FamilyLabel benign() { return FamilyLabel{}; }
    /// Family names are lowercased; they must be nonempty and use [a-z0-9_-].
    static FamilyLabel dga(std::string_view family);

    bool is_benign() const noexcept { return family_.empty(); }
    bool is_dga() const noexcept { return !family_.empty(); }
    /// Empty for the benign label.
    const std::string& family() const noexcept { return family_; }
    /// "benign" or the family name.
    std::string name() const { return is_benign() ? std::string("benign") : family_; }

    friend bool operator==(const FamilyLabel&, const FamilyLabel&) = default;
    friend auto operator<=>(const FamilyLabel&, const FamilyLabel&) = default;

private:
    FamilyLabel() = default;
    explicit FamilyLabel(std::string family) : family_(std::move(family)) {}
    std::string family_;
};

struct LabeledExample {
    DomainName domain;
    FamilyLabel label;
};

}  // namespace dga
