#include "dga/domain.hpp"

#include "dga/error.hpp"

#include <algorithm>

namespace dga {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::EmptyAfterNormalization: return "EmptyAfterNormalization";
        case ErrorCode::InvalidCharacter: return "InvalidCharacter";
        case ErrorCode::InvalidN: return "InvalidN";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::SingleClassDataset: return "SingleClassDataset";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptySequenceSet: return "EmptySequenceSet";
        case ErrorCode::EmptySequence: return "EmptySequence";
        case ErrorCode::IndexOutOfVocabulary: return "IndexOutOfVocabulary";
        case ErrorCode::SingleClassLabels: return "SingleClassLabels";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::TooFewExamples: return "TooFewExamples";
        case ErrorCode::TooFewFamilies: return "TooFewFamilies";
        case ErrorCode::FileUnreadable: return "FileUnreadable";
        case ErrorCode::AllRowsMalformed: return "AllRowsMalformed";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ModelUnreadable: return "ModelUnreadable";
        case ErrorCode::WrongModelKind: return "WrongModelKind";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

CharVocabulary::CharVocabulary() {
    chars_ = "-.";
    for (char c = '0'; c <= '9'; ++c) chars_.push_back(c);
    chars_.push_back('_');
    for (char c = 'a'; c <= 'z'; ++c) chars_.push_back(c);
    index_.fill(-1);
    for (std::size_t i = 0; i < chars_.size(); ++i) {
        index_[static_cast<unsigned char>(chars_[i])] = static_cast<int>(i);
    }
}

const CharVocabulary& CharVocabulary::standard() {
    static const CharVocabulary vocab;
    return vocab;
}

Sequence encode(std::string_view normalized, const CharVocabulary& vocab) {
    Sequence out;
    out.reserve(normalized.size());
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        auto index = vocab.index_of(normalized[i]);
        if (!index) throw InvalidCharacterError(normalized[i], i);
        out.push_back(*index);
    }
    return out;
}

std::string decode(std::span<const int> encoded, const CharVocabulary& vocab) {
    std::string out;
    out.reserve(encoded.size());
    for (int index : encoded) {
        if (index < 0 || index >= vocab.size()) {
            throw Error(ErrorCode::IndexOutOfVocabulary, "index " + std::to_string(index));
        }
        out.push_back(vocab.char_at(index));
    }
    return out;
}

DomainName parse_domain(std::string_view raw, const CharVocabulary& vocab) {
    std::string lowered(raw);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(), [](unsigned char c) {
        return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
    });
    std::string_view view = lowered;
    if (!view.empty() && view.back() == '.') view.remove_suffix(1);

    auto dot = view.rfind('.');
    if (dot == std::string_view::npos || dot == 0) {
        throw Error(ErrorCode::EmptyAfterNormalization, "nothing left after removing TLD from '" + std::string(raw) + "'");
    }
    std::string normalized(view.substr(0, dot));
    Sequence encoded = encode(normalized, vocab);
    return DomainName(std::string(raw), std::move(normalized), std::move(encoded));
}

FamilyLabel FamilyLabel::dga(std::string_view family) {
    std::string name;
    name.reserve(family.size());
    for (char c : family) {
        char lower = (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
        bool ok = (lower >= 'a' && lower <= 'z') || (lower >= '0' && lower <= '9') || lower == '_' || lower == '-';
        if (!ok) throw Error(ErrorCode::InvalidArgument, "invalid family name '" + std::string(family) + "'");
        name.push_back(lower);
    }
    if (name.empty() || name == "-" || name == "benign") {
        throw Error(ErrorCode::InvalidArgument, "invalid family name '" + std::string(family) + "'");
    }
    return FamilyLabel(std::move(name));
}

}  // namespace dga
