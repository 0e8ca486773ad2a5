#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dga {

enum class ErrorCode {
    EmptyAfterNormalization,
    InvalidCharacter,
    InvalidN,
    EmptyInput,
    SingleClassDataset,
    DimensionMismatch,
    EmptySequenceSet,
    EmptySequence,
    IndexOutOfVocabulary,
    SingleClassLabels,
    ZeroVector,
    TooFewExamples,
    TooFewFamilies,
    FileUnreadable,
    AllRowsMalformed,
    InvalidSpec,
    InvalidArgument,
    ModelUnreadable,
    WrongModelKind,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI and tests can dispatch on it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// InvalidCharacter with the offending position in the normalized string.
class InvalidCharacterError : public Error {
public:
    InvalidCharacterError(char c, std::size_t position)
        : Error(ErrorCode::InvalidCharacter,
                "character 0x" + hex(c) + " at position " + std::to_string(position)),
          character_(c), position_(position) {}

    char character() const noexcept { return character_; }
    std::size_t position() const noexcept { return position_; }

private:
    static std::string hex(char c) {
        static constexpr char digits[] = "0123456789abcdef";
        auto u = static_cast<unsigned char>(c);
        return {digits[u >> 4], digits[u & 0xf]};
    }

    char character_;
    std::size_t position_;
};

}  // namespace dga
