#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "zspot/lexmap.hpp"

using namespace zspot;

namespace {

ZoneRuleTable synthetic_table() {
    // mirrors the bundled synthetic script: plain bodies plus marked glyphs
    return parse_rule_table(
        "a\ta\t0\t0\n"
        "b\tb\t0\t0\n"
        "E\te\t1\t0\n"
        "F\tf\t1\t0\n"
        "h\te\t0\t1\n"
        "i\tf\t0\t1\n");
}

}  // namespace

TEST_CASE("split_graphemes: ascii, utf-8, combining marks") {
    auto g1 = split_graphemes("abc");
    CHECK(g1 == std::vector<std::string>{"a", "b", "c"});

    // "â" as 'a' + U+0302 combining circumflex stays one cluster
    std::string composed = "a\xCC\x82z";
    auto g2 = split_graphemes(composed);
    REQUIRE(g2.size() == 2);
    CHECK(g2[0] == "a\xCC\x82");
    CHECK(g2[1] == "z");

    // Devanagari ka + vowel sign u
    std::string ku = "\xE0\xA4\x95\xE0\xA5\x81";
    auto g3 = split_graphemes(ku);
    CHECK(g3.size() == 1);
}

TEST_CASE("map_keyword: identity rule") {
    auto q = map_keyword("a", synthetic_table());
    CHECK(q.middle_transcription == std::vector<std::string>{"a"});
    CHECK(q.upper_modifiers == 0);
    CHECK(q.lower_modifiers == 0);
}

TEST_CASE("map_keyword: marked glyph contributes its counts") {
    auto q = map_keyword("E", synthetic_table());
    CHECK(q.middle_transcription == std::vector<std::string>{"e"});
    CHECK(q.upper_modifiers == 1);
    CHECK(q.lower_modifiers == 0);

    auto q2 = map_keyword("bEhi", synthetic_table());
    CHECK(q2.middle_transcription == std::vector<std::string>{"b", "e", "e", "f"});
    CHECK(q2.upper_modifiers == 1);
    CHECK(q2.lower_modifiers == 2);
}

TEST_CASE("map_keyword: combining-mark grapheme uses one rule") {
    ZoneRuleTable t;
    t.add("a\xCC\x82", {{"a"}, 1, 0});
    auto q = map_keyword("a\xCC\x82", t);
    CHECK(q.middle_transcription == std::vector<std::string>{"a"});
    CHECK(q.upper_modifiers == 1);
}

TEST_CASE("map_keyword: unmapped grapheme and empty middle form") {
    CHECK_THROWS_AS(map_keyword("z", synthetic_table()), UnmappedGraphemeError);

    ZoneRuleTable t;
    t.add("x", {{}, 1, 0});  // modifier-only glyph
    CHECK_THROWS_AS(map_keyword("x", t), EmptyMiddleFormError);
}

TEST_CASE("map_keyword: counts are additive over concatenation") {
    auto t = synthetic_table();
    const char* words[] = {"ab", "Eh", "bFi", "a"};
    for (const char* x : words) {
        for (const char* y : words) {
            auto qx = map_keyword(x, t);
            auto qy = map_keyword(y, t);
            auto qxy = map_keyword(std::string(x) + y, t);
            CHECK(qxy.upper_modifiers == qx.upper_modifiers + qy.upper_modifiers);
            CHECK(qxy.lower_modifiers == qx.lower_modifiers + qy.lower_modifiers);
            CHECK(qxy.middle_transcription.size() ==
                  qx.middle_transcription.size() + qy.middle_transcription.size());
        }
    }
}

TEST_CASE("rule table: file round-trip is identical") {
    auto t = synthetic_table();
    std::string enc = encode_rule_table(t);
    auto back = parse_rule_table(enc);
    CHECK(encode_rule_table(back) == enc);
    CHECK(back.size() == t.size());
}

TEST_CASE("rule table: empty file, comments, errors with line numbers") {
    CHECK(parse_rule_table("").size() == 0);
    auto t = parse_rule_table("# header\n\na\ta\t0\t0\n");
    CHECK(t.size() == 1);

    try {
        parse_rule_table("a\ta\t0\t0\nb\tb\t0\t0\na\tz\t0\t0\n");
        FAIL("expected duplicate error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_rule_table("a\ta\tx\t0\n"), DataError);
    CHECK_THROWS_AS(parse_rule_table("a\ta\t0\n"), DataError);
}

TEST_CASE("rule table: validation against charsets") {
    auto t = synthetic_table();
    std::vector<std::string> full = {"a", "b", "E", "F", "h", "i"};
    std::vector<std::string> middle = {"a", "b", "e", "f"};
    validate_rule_table(t, full, middle);

    std::vector<std::string> missing_mid = {"a", "b", "e"};
    CHECK_THROWS_AS(validate_rule_table(t, full, missing_mid), DataError);

    full.push_back("q");  // charset grapheme without a rule
    CHECK_THROWS_AS(validate_rule_table(t, full, middle), DataError);
}
