#include "dga/domain.hpp"
#include "dga/error.hpp"
#include "dga/random.hpp"

#include <doctest.h>

#include <string>

using namespace dga;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("vocabulary has 39 characters in code point order") {
    const auto& v = CharVocabulary::standard();
    CHECK(v.size() == kVocabularySize);
    CHECK(v.chars() == "-.0123456789_abcdefghijklmnopqrstuvwxyz");
    for (int i = 0; i < v.size(); ++i) CHECK(*v.index_of(v.char_at(i)) == i);
    CHECK_FALSE(v.contains('A'));
    CHECK_FALSE(v.contains(' '));
}

TEST_CASE("parse_domain lowercases and strips the TLD") {
    CHECK(parse_domain("Google.COM").normalized() == "google");
    CHECK(parse_domain("Google.COM").raw() == "Google.COM");
    CHECK(parse_domain("ns1.backdates13.biz").normalized() == "ns1.backdates13");
    CHECK(parse_domain("example.co.uk").normalized() == "example.co");
    CHECK(parse_domain("example.com.").normalized() == "example");
}

TEST_CASE("parse_domain errors") {
    CHECK(code_of([] { parse_domain("com"); }) == ErrorCode::EmptyAfterNormalization);
    CHECK(code_of([] { parse_domain(""); }) == ErrorCode::EmptyAfterNormalization);
    CHECK(code_of([] { parse_domain(".com"); }) == ErrorCode::EmptyAfterNormalization);
    CHECK(code_of([] { parse_domain("localhost"); }) == ErrorCode::EmptyAfterNormalization);
    try {
        parse_domain("ab!c.com");
        FAIL("expected InvalidCharacter");
    } catch (const InvalidCharacterError& e) {
        CHECK(e.code() == ErrorCode::InvalidCharacter);
        CHECK(e.character() == '!');
        CHECK(e.position() == 2);
    }
}

TEST_CASE("encode") {
    CHECK(encode("").empty());
    const int a = *CharVocabulary::standard().index_of('a');
    CHECK(encode("aa") == Sequence{a, a});
    CHECK(code_of([] { encode("a b"); }) == ErrorCode::InvalidCharacter);
    CHECK(parse_domain("abc.com").encoded() == encode("abc"));
}

TEST_CASE("decode inverts encode on random strings") {
    Rng rng(3);
    const auto chars = CharVocabulary::standard().chars();
    for (int n = 0; n < 1000; ++n) {
        std::string s;
        const auto len = rng.below(30);
        for (std::uint64_t i = 0; i < len; ++i) s.push_back(chars[rng.below(chars.size())]);
        REQUIRE(decode(encode(s)) == s);
    }
}

TEST_CASE("family labels") {
    CHECK(FamilyLabel::benign().is_benign());
    CHECK(FamilyLabel::benign().name() == "benign");
    CHECK(FamilyLabel::dga("Conficker").family() == "conficker");
    CHECK(FamilyLabel::dga("x").is_dga());
    CHECK_THROWS_AS(FamilyLabel::dga(""), Error);
    CHECK_THROWS_AS(FamilyLabel::dga("bad name"), Error);
}

TEST_CASE("derive_seed spreads streams") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(5, 9) == derive_seed(5, 9));
    Rng a(1), b(1);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    Rng r(4);
    for (int i = 0; i < 1000; ++i) {
        const auto x = r.between(-3, 3);
        CHECK((x >= -3 && x <= 3));
        const double u = r.uniform();
        CHECK((u >= 0 && u < 1));
    }
}
