#include "zspot/lexmap.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace zspot {

namespace {

bool is_cluster_extender(char32_t cp) {
    return (cp >= 0x0300 && cp <= 0x036F) ||  // combining diacritics
           (cp >= 0x0900 && cp <= 0x0903) ||  // Devanagari signs
           (cp >= 0x093A && cp <= 0x094F) || (cp >= 0x0951 && cp <= 0x0957) ||
           (cp >= 0x0962 && cp <= 0x0963) ||
           (cp >= 0x0980 && cp <= 0x0983) ||  // Bangla signs
           cp == 0x09BC || (cp >= 0x09BE && cp <= 0x09CD) || cp == 0x09D7 ||
           (cp >= 0x09E2 && cp <= 0x09E3) ||
           cp == 0x200C || cp == 0x200D;  // ZWNJ / ZWJ
}

// Decodes one code point; advances i. Malformed bytes are taken literally.
char32_t next_codepoint(const std::string& s, std::size_t& i, std::size_t& len) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = b0;
    len = 1;
    if ((b0 & 0x80) == 0) {
        cp = b0;
    } else if ((b0 & 0xE0) == 0xC0 && i + 1 < s.size()) {
        cp = (b0 & 0x1F) << 6 | (s[i + 1] & 0x3F);
        len = 2;
    } else if ((b0 & 0xF0) == 0xE0 && i + 2 < s.size()) {
        cp = (b0 & 0x0F) << 12 | (s[i + 1] & 0x3F) << 6 | (s[i + 2] & 0x3F);
        len = 3;
    } else if ((b0 & 0xF8) == 0xF0 && i + 3 < s.size()) {
        cp = (b0 & 0x07) << 18 | (s[i + 1] & 0x3F) << 12 | (s[i + 2] & 0x3F) << 6 |
             (s[i + 3] & 0x3F);
        len = 4;
    }
    i += len;
    return cp;
}

}  // namespace

std::vector<std::string> split_graphemes(const std::string& utf8) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < utf8.size()) {
        std::size_t start = i, len = 0;
        char32_t cp = next_codepoint(utf8, i, len);
        if (is_cluster_extender(cp) && !out.empty()) {
            out.back().append(utf8, start, len);
        } else {
            out.push_back(utf8.substr(start, len));
        }
    }
    return out;
}

const ZoneRule* ZoneRuleTable::find(const std::string& grapheme) const {
    for (std::size_t i = 0; i < graphemes.size(); ++i)
        if (graphemes[i] == grapheme) return &rules[i];
    return nullptr;
}

void ZoneRuleTable::add(const std::string& grapheme, ZoneRule rule) {
    if (find(grapheme))
        throw DataError("duplicate rule for grapheme '" + grapheme + "'");
    graphemes.push_back(grapheme);
    rules.push_back(std::move(rule));
}

KeywordQuery map_keyword(const std::string& raw, const ZoneRuleTable& table) {
    KeywordQuery q;
    q.raw_text = raw;
    for (const auto& g : split_graphemes(raw)) {
        const ZoneRule* rule = table.find(g);
        if (!rule)
            throw UnmappedGraphemeError("no zone rule for grapheme '" + g + "'");
        q.middle_transcription.insert(q.middle_transcription.end(),
                                      rule->middle_form.begin(),
                                      rule->middle_form.end());
        q.upper_modifiers += rule->upper_marks;
        q.lower_modifiers += rule->lower_marks;
    }
    if (q.middle_transcription.empty())
        throw EmptyMiddleFormError("keyword '" + raw + "' maps to an empty middle form");
    return q;
}

ZoneRuleTable parse_rule_table(const std::string& text) {
    ZoneRuleTable table;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty() || trimmed[0] == '#') continue;
        auto cols = split_tabs(line);
        if (cols.size() != 4)
            throw DataError("rule table line " + std::to_string(line_no) +
                            ": expected 4 tab-separated columns");
        ZoneRule rule;
        rule.middle_form = split_graphemes(cols[1]);
        try {
            rule.upper_marks = std::stoi(cols[2]);
            rule.lower_marks = std::stoi(cols[3]);
        } catch (const std::exception&) {
            throw DataError("rule table line " + std::to_string(line_no) +
                            ": malformed count");
        }
        if (rule.upper_marks < 0 || rule.lower_marks < 0)
            throw DataError("rule table line " + std::to_string(line_no) +
                            ": negative count");
        if (table.find(cols[0]))
            throw DataError("rule table line " + std::to_string(line_no) +
                            ": duplicate grapheme '" + cols[0] + "'");
        table.add(cols[0], std::move(rule));
    }
    return table;
}

ZoneRuleTable load_rule_table(const std::string& path) {
    return parse_rule_table(read_file(path));
}

std::string encode_rule_table(const ZoneRuleTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.size(); ++i) {
        std::string mid;
        for (const auto& s : table.rules[i].middle_form) mid += s;
        out += table.graphemes[i] + "\t" + mid + "\t" +
               std::to_string(table.rules[i].upper_marks) + "\t" +
               std::to_string(table.rules[i].lower_marks) + "\n";
    }
    return out;
}

void save_rule_table(const ZoneRuleTable& table, const std::string& path) {
    write_file(path, encode_rule_table(table));
}

void validate_rule_table(const ZoneRuleTable& table,
                         const std::vector<std::string>& full_charset,
                         const std::vector<std::string>& middle_charset) {
    std::set<std::string> middle(middle_charset.begin(), middle_charset.end());
    for (std::size_t i = 0; i < table.size(); ++i)
        for (const auto& s : table.rules[i].middle_form)
            if (!middle.count(s))
                throw DataError("rule for '" + table.graphemes[i] +
                                "' references unknown middle symbol '" + s + "'");
    for (const auto& g : full_charset)
        if (!table.find(g))
            throw DataError("charset grapheme '" + g + "' has no zone rule");
}

}  // namespace zspot
