#include "zspot/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace zspot {

namespace {

// canvas geometry (rows before shear)
constexpr int kCanvasH = 48;
constexpr int kUpperBandTop = 8;
constexpr int kHeadlineTop = 16;   // headline rows 16..17, first middle row
constexpr int kStrokeTop = 18;
constexpr int kStrokeBottom = 31;  // last middle row
constexpr int kLowerBandEnd = 40;
constexpr int kBand = 8;

struct Glyph {
    std::string symbol;
    int body = 0;
    int mark = 0;  // 0 none, 1 upper, 2 lower
};

struct Script {
    std::vector<Glyph> glyphs;
    ZoneRuleTable rules;
    std::vector<std::pair<std::string, std::string>> siblings;  // upper<->lower

    const Glyph& find(const std::string& symbol) const {
        for (const auto& g : glyphs)
            if (g.symbol == symbol) return g;
        throw DataError("synth: unknown glyph '" + symbol + "'");
    }
};

Script build_script(const SynthConfig& cfg) {
    int plain = cfg.alphabet_size - cfg.upper_marked - cfg.lower_marked;
    if (plain < 1)
        throw DataError("synth: alphabet smaller than its marked glyph counts");
    Script s;
    for (int i = 0; i < plain; ++i)
        s.glyphs.push_back({std::string(1, static_cast<char>('a' + i)), i, 0});
    for (int k = 0; k < cfg.upper_marked; ++k)
        s.glyphs.push_back({std::string(1, static_cast<char>('A' + k)), plain + k, 1});
    for (int k = 0; k < cfg.lower_marked; ++k)
        s.glyphs.push_back({std::string(1, static_cast<char>('n' + k)), plain + k, 2});
    for (const auto& g : s.glyphs) {
        ZoneRule rule;
        rule.middle_form = {std::string(1, static_cast<char>('a' + g.body))};
        rule.upper_marks = g.mark == 1 ? 1 : 0;
        rule.lower_marks = g.mark == 2 ? 1 : 0;
        s.rules.add(g.symbol, rule);
    }
    int shared = std::min(cfg.upper_marked, cfg.lower_marked);
    for (int k = 0; k < shared; ++k)
        s.siblings.emplace_back(std::string(1, static_cast<char>('A' + k)),
                                std::string(1, static_cast<char>('n' + k)));
    return s;
}

struct Painter {
    RasterImage img;
    double slope = 0;
    int shift = 0;

    Painter(int width, double slope_) : slope(slope_) {
        int drift = static_cast<int>(std::lround(slope_ * (width - 1)));
        shift = std::max(0, -drift);
        int extra = std::max(0, drift) + shift;
        img = RasterImage(width, kCanvasH + extra, PixelDepth::Binary);
    }

    void put(int r, int c) {
        int rr = r + static_cast<int>(std::lround(slope * c)) + shift;
        if (img.in_bounds(rr, c)) img.set(rr, c, 1);
    }
    void box(int r0, int r1, int c0, int c1) {
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c) put(r, c);
    }
    void diag(int r0, int c0, int r1, int c1) {
        int steps = std::max(1, r1 - r0);
        for (int r = r0; r <= r1; ++r) {
            int c = c0 + (c1 - c0) * (r - r0) / steps;
            put(r, c);
            put(r, c + 1);
        }
    }
};

// stroke catalog: glyph bodies are 2-3 strokes hanging from the headline
void draw_body(Painter& p, Rng& rng, int body, int x0, int cell) {
    int left = x0 + 2, right = x0 + cell - 5;
    int mid = (left + right) / 2;
    auto j = [&] { return rng.uniform_int(-1, 1); };
    int bottom = kStrokeBottom - rng.uniform_int(0, 1);
    auto lv = [&] { p.box(kStrokeTop, bottom, left + j(), left + 1 + j()); };
    auto rv = [&] { p.box(kStrokeTop, bottom, right + j(), right + 1 + j()); };
    auto cv = [&] { p.box(kStrokeTop, bottom, mid + j(), mid + 1 + j()); };
    auto ld = [&] { p.diag(kStrokeTop, left + j(), bottom, mid); };
    auto rd = [&] { p.diag(kStrokeTop, right + j(), bottom, mid); };
    auto bb = [&] { p.box(bottom - 1, bottom, left, right + 1); };
    auto mb = [&] { p.box(24, 25, left, right + 1); };
    switch (body % 7) {
        case 0: lv(); rv(); break;
        case 1: lv(); rd(); break;
        case 2: cv(); rv(); bb(); break;
        case 3: lv(); cv(); break;
        case 4: ld(); rd(); break;
        case 5: lv(); rv(); mb(); break;
        default: cv(); rd(); bb(); break;
    }
}

void draw_mark(Painter& p, Rng& rng, int mark, int cx) {
    cx += rng.uniform_int(-2, 2);
    int variant = rng.uniform_int(0, 2);
    if (mark == 1) {  // upper band, rows 9..14
        if (variant == 0) p.box(10, 13, cx - 2, cx + 1);
        else if (variant == 1) {
            p.diag(9, cx, 13, cx - 3);
            p.diag(9, cx, 13, cx + 3);
        } else {
            p.box(10, 11, cx - 3, cx - 2);
            p.box(10, 11, cx + 1, cx + 2);
            p.box(12, 13, cx - 1, cx);
        }
    } else {  // lower band, rows 34..38
        if (variant == 0) p.box(34, 37, cx - 2, cx + 1);
        else if (variant == 1) p.box(35, 36, cx - 3, cx + 2);
        else {
            p.diag(34, cx - 3, 38, cx);
            p.diag(34, cx + 3, 38, cx);
        }
    }
}

SynthLine render_line(const SynthConfig& cfg, const Script& script, Rng& rng,
                      const std::vector<std::string>& words, double slope,
                      double salt_pepper) {
    std::vector<int> gaps;
    int width = 2 * cfg.margin;
    for (std::size_t w = 0; w < words.size(); ++w) {
        width += static_cast<int>(words[w].size()) * cfg.glyph_cell;
        if (w + 1 < words.size()) {
            gaps.push_back(rng.uniform_int(cfg.word_gap_min, cfg.word_gap_max));
            width += gaps.back();
        }
    }

    Painter p(width, slope);
    SynthLine line;
    int x = cfg.margin;
    for (std::size_t w = 0; w < words.size(); ++w) {
        int word_w = static_cast<int>(words[w].size()) * cfg.glyph_cell;
        WordBox box;
        box.text = words[w];
        box.x0 = x;
        box.x1 = x + word_w - 1;
        p.box(kHeadlineTop, kHeadlineTop + 1, x + 1, x + word_w - 2);  // headline
        for (std::size_t g = 0; g < words[w].size(); ++g) {
            const Glyph& glyph = script.find(std::string(1, words[w][g]));
            int gx = x + static_cast<int>(g) * cfg.glyph_cell;
            draw_body(p, rng, glyph.body, gx, cfg.glyph_cell);
            if (glyph.mark) draw_mark(p, rng, glyph.mark, gx + cfg.glyph_cell / 2);
        }
        line.words.push_back(box);
        x += word_w + (w + 1 < words.size() ? gaps[w] : 0);
    }

    if (salt_pepper > 0)
        for (auto& px : p.img.pixels)
            if (rng.chance(salt_pepper)) px = px ? 0 : 1;

    line.image = std::move(p.img);
    for (std::size_t w = 0; w < words.size(); ++w) {
        if (w) line.transcription += " ";
        line.transcription += words[w];
    }
    line.truth.upper = kHeadlineTop + p.shift;
    line.truth.lower = kStrokeBottom + p.shift;
    line.truth.slope = slope;
    line.truth.band = kBand;
    return line;
}

std::string random_word(const SynthConfig& cfg, const Script& script, Rng& rng) {
    int len = rng.uniform_int(cfg.glyphs_per_word_min, cfg.glyphs_per_word_max);
    std::string w;
    for (int i = 0; i < len; ++i)
        w += script.glyphs[rng.uniform_int(0, static_cast<int>(script.glyphs.size()) - 1)]
                 .symbol;
    return w;
}

std::string middle_form_of(const std::string& word, const ZoneRuleTable& rules) {
    std::string m;
    for (const auto& g : split_graphemes(word)) {
        const ZoneRule* r = rules.find(g);
        if (r)
            for (const auto& s : r->middle_form) m += s;
    }
    return m;
}

std::string sibling_word(const Script& script, const std::string& word) {
    std::string out = word;
    for (auto& ch : out)
        for (const auto& [up, low] : script.siblings) {
            if (std::string(1, ch) == up) ch = low[0];
            else if (std::string(1, ch) == low) ch = up[0];
        }
    return out;
}

}  // namespace

std::string ZoneTruth::encode() const {
    return fmt_double(upper) + "\t" + fmt_double(lower) + "\t" + fmt_double(slope) +
           "\t" + std::to_string(band) + "\n";
}

ZoneTruth ZoneTruth::decode(const std::string& text) {
    auto line = text.substr(0, text.find('\n'));
    auto cols = split_tabs(line);
    if (cols.size() != 4) throw DataError("zone truth: expected 4 columns");
    ZoneTruth t;
    t.upper = std::stod(cols[0]);
    t.lower = std::stod(cols[1]);
    t.slope = std::stod(cols[2]);
    t.band = std::stoi(cols[3]);
    return t;
}

SynthConfig synth_config_from(const KeyValueConfig& kv) {
    SynthConfig c;
    c.alphabet_size = kv.get_int("alphabet_size", c.alphabet_size);
    c.upper_marked = kv.get_int("upper_marked", c.upper_marked);
    c.lower_marked = kv.get_int("lower_marked", c.lower_marked);
    c.train_lines = kv.get_int("train_lines", c.train_lines);
    c.test_lines = kv.get_int("test_lines", c.test_lines);
    c.keyword_count = kv.get_int("keyword_count", c.keyword_count);
    c.words_per_line_min = kv.get_int("words_per_line_min", c.words_per_line_min);
    c.words_per_line_max = kv.get_int("words_per_line_max", c.words_per_line_max);
    c.glyphs_per_word_min = kv.get_int("glyphs_per_word_min", c.glyphs_per_word_min);
    c.glyphs_per_word_max = kv.get_int("glyphs_per_word_max", c.glyphs_per_word_max);
    c.glyph_cell = kv.get_int("glyph_cell", c.glyph_cell);
    c.word_gap_min = kv.get_int("word_gap_min", c.word_gap_min);
    c.word_gap_max = kv.get_int("word_gap_max", c.word_gap_max);
    c.margin = kv.get_int("margin", c.margin);
    c.salt_pepper = kv.get_double("salt_pepper", c.salt_pepper);
    c.skew_jitter_deg = kv.get_double("skew_jitter_deg", c.skew_jitter_deg);
    c.decoy_rate = kv.get_double("decoy_rate", c.decoy_rate);
    c.seed = kv.get_u64("seed", c.seed);
    return c;
}

KeyValueConfig synth_config_to(const SynthConfig& c) {
    KeyValueConfig kv;
    kv.set("alphabet_size", std::to_string(c.alphabet_size));
    kv.set("upper_marked", std::to_string(c.upper_marked));
    kv.set("lower_marked", std::to_string(c.lower_marked));
    kv.set("train_lines", std::to_string(c.train_lines));
    kv.set("test_lines", std::to_string(c.test_lines));
    kv.set("keyword_count", std::to_string(c.keyword_count));
    kv.set("words_per_line_min", std::to_string(c.words_per_line_min));
    kv.set("words_per_line_max", std::to_string(c.words_per_line_max));
    kv.set("glyphs_per_word_min", std::to_string(c.glyphs_per_word_min));
    kv.set("glyphs_per_word_max", std::to_string(c.glyphs_per_word_max));
    kv.set("glyph_cell", std::to_string(c.glyph_cell));
    kv.set("word_gap_min", std::to_string(c.word_gap_min));
    kv.set("word_gap_max", std::to_string(c.word_gap_max));
    kv.set("margin", std::to_string(c.margin));
    kv.set("salt_pepper", fmt_double(c.salt_pepper));
    kv.set("skew_jitter_deg", fmt_double(c.skew_jitter_deg));
    kv.set("decoy_rate", fmt_double(c.decoy_rate));
    kv.set("seed", std::to_string(c.seed));
    return kv;
}

SynthPaths generate_corpus(const SynthConfig& cfg, const std::string& out_dir) {
    Rng rng(cfg.seed);
    Script script = build_script(cfg);

    SynthPaths paths;
    paths.dir = out_dir;
    ensure_dir(out_dir);
    ensure_dir(join_path(out_dir, "lines"));
    ensure_dir(join_path(out_dir, "zones_gt"));
    ensure_dir(join_path(out_dir, "words"));
    ensure_dir(join_path(out_dir, "queries"));

    paths.rules = join_path(out_dir, "rules.tsv");
    save_rule_table(script.rules, paths.rules);
    write_file(join_path(out_dir, "synth_config.txt"),
               encode_config(synth_config_to(cfg)));

    // keywords: most carry at least one marked glyph
    std::vector<std::string> marked_symbols;
    for (const auto& g : script.glyphs)
        if (g.mark) marked_symbols.push_back(g.symbol);
    std::vector<std::string> keywords;
    std::set<std::string> used;
    while (static_cast<int>(keywords.size()) < cfg.keyword_count) {
        std::string w = random_word(cfg, script, rng);
        bool want_marked =
            static_cast<int>(keywords.size()) < (3 * cfg.keyword_count) / 4;
        if (want_marked && !marked_symbols.empty()) {
            bool has = false;
            for (char ch : w)
                for (const auto& m : marked_symbols) has = has || m[0] == ch;
            if (!has)
                w[rng.uniform_int(0, static_cast<int>(w.size()) - 1)] =
                    marked_symbols[rng.uniform_int(
                        0, static_cast<int>(marked_symbols.size()) - 1)][0];
        }
        if (used.insert(w).second) keywords.push_back(w);
    }
    paths.keywords = join_path(out_dir, "keywords.txt");
    {
        std::string text;
        for (const auto& k : keywords) text += k + "\n";
        write_file(paths.keywords, text);
    }

    // decoys share the keyword's middle form but swap the marks
    std::vector<std::string> decoys;
    for (const auto& k : keywords) {
        std::string d = sibling_word(script, k);
        if (d != k && !used.count(d)) {
            used.insert(d);
            decoys.push_back(d);
        }
    }

    std::set<std::string> keyword_middles;
    for (const auto& k : keywords) keyword_middles.insert(middle_form_of(k, script.rules));
    std::vector<std::string> fillers;
    while (static_cast<int>(fillers.size()) < 14) {
        std::string w = random_word(cfg, script, rng);
        if (used.count(w)) continue;
        if (keyword_middles.count(middle_form_of(w, script.rules))) continue;
        used.insert(w);
        fillers.push_back(w);
    }

    double slope_range = std::tan(cfg.skew_jitter_deg * M_PI / 180.0);

    auto make_split = [&](const std::string& split, int count, Manifest& manifest,
                          std::vector<std::pair<std::string, std::string>>* word_rows) {
        for (int i = 0; i < count; ++i) {
            char id[32];
            std::snprintf(id, sizeof id, "%s_%04d", split.c_str(), i);
            int n_words = rng.uniform_int(cfg.words_per_line_min, cfg.words_per_line_max);
            std::vector<std::string> words;
            for (int w = 0; w < n_words; ++w)
                words.push_back(fillers[rng.uniform_int(
                    0, static_cast<int>(fillers.size()) - 1)]);
            if (i % 2 == 0) {
                const std::string& kw =
                    keywords[(i / 2) % static_cast<int>(keywords.size())];
                words[rng.uniform_int(0, n_words - 1)] = kw;
            }
            if (!decoys.empty() && rng.chance(cfg.decoy_rate)) {
                int slot = rng.uniform_int(0, n_words - 1);
                const std::string& d =
                    decoys[rng.uniform_int(0, static_cast<int>(decoys.size()) - 1)];
                bool taken = false;
                for (const auto& kw : keywords) taken = taken || words[slot] == kw;
                if (!taken) words[slot] = d;
            }
            double slope = rng.uniform(-slope_range, slope_range);
            SynthLine line =
                render_line(cfg, script, rng, words, slope, cfg.salt_pepper);

            std::string img_rel = "lines/" + std::string(id) + ".pbm";
            std::string gt_rel = "zones_gt/" + std::string(id) + ".txt";
            save_pnm(line.image, join_path(out_dir, img_rel));
            write_file(join_path(out_dir, gt_rel), line.truth.encode());
            manifest.records.push_back({id, img_rel, line.transcription, gt_rel});

            if (word_rows) {
                for (std::size_t w = 0; w < line.words.size(); ++w) {
                    const WordBox& box = line.words[w];
                    int x0 = std::max(0, box.x0 - 2);
                    int x1 = std::min(line.image.width - 1, box.x1 + 2);
                    RasterImage crop(x1 - x0 + 1, line.image.height, PixelDepth::Binary);
                    for (int r = 0; r < line.image.height; ++r)
                        for (int c = x0; c <= x1; ++c)
                            crop.set(r, c - x0, line.image.at(r, c));
                    std::string word_id = std::string(id) + "_w" + std::to_string(w);
                    std::string rel = "words/" + word_id + ".pbm";
                    save_pnm(crop, join_path(out_dir, rel));
                    word_rows->emplace_back(word_id + "\t" + rel + "\t" + box.text,
                                            box.text);
                }
            }
        }
    };

    Manifest train, test;
    train.base_dir = out_dir;
    test.base_dir = out_dir;
    std::vector<std::pair<std::string, std::string>> word_rows;
    make_split("train", cfg.train_lines, train, nullptr);
    make_split("test", cfg.test_lines, test, &word_rows);

    paths.train_manifest = join_path(out_dir, "manifest_train.tsv");
    paths.test_manifest = join_path(out_dir, "manifest_test.tsv");
    save_manifest(train, paths.train_manifest);
    save_manifest(test, paths.test_manifest);

    paths.words_manifest = join_path(out_dir, "words_manifest.tsv");
    {
        std::string text;
        for (const auto& [row, label] : word_rows) text += row + "\n";
        write_file(paths.words_manifest, text);
    }

    // clean keyword templates for the DTW baseline
    paths.queries_manifest = join_path(out_dir, "queries_manifest.tsv");
    {
        std::string text;
        for (std::size_t k = 0; k < keywords.size(); ++k) {
            SynthConfig quiet = cfg;
            quiet.margin = 6;
            SynthLine q = render_line(quiet, script, rng, {keywords[k]}, 0.0, 0.0);
            std::string rel = "queries/q" + std::to_string(k) + ".pbm";
            save_pnm(q.image, join_path(out_dir, rel));
            text += keywords[k] + "\t" + rel + "\n";
        }
        write_file(paths.queries_manifest, text);
    }
    return paths;
}

}  // namespace zspot
