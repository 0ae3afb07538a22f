#ifndef ZSPOT_LEXMAP_HPP
#define ZSPOT_LEXMAP_HPP

#include <string>
#include <vector>

#include "zspot/common.hpp"

namespace zspot {

// UTF-8 extended grapheme clusters, approximated by attaching combining
// marks (generic diacritics, Bangla/Devanagari signs, ZWJ/ZWNJ) to the
// preceding base character.
std::vector<std::string> split_graphemes(const std::string& utf8);

struct ZoneRule {
    std::vector<std::string> middle_form;  // possibly empty
    int upper_marks = 0;
    int lower_marks = 0;
};

struct ZoneRuleTable {
    std::vector<std::string> graphemes;  // file order
    std::vector<ZoneRule> rules;

    const ZoneRule* find(const std::string& grapheme) const;
    void add(const std::string& grapheme, ZoneRule rule);  // duplicate -> DataError
    std::size_t size() const { return graphemes.size(); }
};

struct KeywordQuery {
    std::string raw_text;
    std::vector<std::string> middle_transcription;
    int upper_modifiers = 0;  // M_u
    int lower_modifiers = 0;  // M_l
};

KeywordQuery map_keyword(const std::string& raw, const ZoneRuleTable& table);

// TSV: grapheme<TAB>middle_form<TAB>upper_count<TAB>lower_count, '#' comments.
ZoneRuleTable parse_rule_table(const std::string& text);
ZoneRuleTable load_rule_table(const std::string& path);
std::string encode_rule_table(const ZoneRuleTable& table);
void save_rule_table(const ZoneRuleTable& table, const std::string& path);

// Every rule's middle symbols must belong to middle_charset; every grapheme
// of full_charset must have a rule.
void validate_rule_table(const ZoneRuleTable& table,
                         const std::vector<std::string>& full_charset,
                         const std::vector<std::string>& middle_charset);

}  // namespace zspot

#endif
