#ifndef ZSPOT_SYNTH_HPP
#define ZSPOT_SYNTH_HPP

#include <string>
#include <vector>

#include "zspot/lexmap.hpp"
#include "zspot/manifest.hpp"
#include "zspot/raster.hpp"

namespace zspot {

// Procedural script on a 48-row canvas: blank margins, an upper-mark band,
// a solid headline over each word (so bottom reservoirs always form), dense
// middle-zone bodies, and a lower-mark band. Marked glyphs share their
// middle-zone body with a sibling glyph carrying the opposite mark, which
// is what makes middle-zone false positives (and re-ranking) reachable.
struct SynthConfig {
    int alphabet_size = 10;
    int upper_marked = 3;
    int lower_marked = 3;
    int train_lines = 150;
    int test_lines = 50;
    int keyword_count = 8;
    int words_per_line_min = 2, words_per_line_max = 4;
    int glyphs_per_word_min = 3, glyphs_per_word_max = 4;
    int glyph_cell = 26;  // column budget per glyph
    int word_gap_min = 28, word_gap_max = 34;
    int margin = 28;
    double salt_pepper = 0.0005;   // pixel flip probability
    double skew_jitter_deg = 1.0;  // per-line shear range
    double decoy_rate = 0.25;      // chance of a mark-swapped sibling word
    std::uint64_t seed = 42;
};

SynthConfig synth_config_from(const KeyValueConfig& kv);
KeyValueConfig synth_config_to(const SynthConfig& cfg);

struct ZoneTruth {
    double upper = 0, lower = 0;  // boundary rows at column 0
    double slope = 0;             // per-column drift
    int band = 8;                 // modifier band height above/below

    double upper_at(int col) const { return upper + slope * col; }
    double lower_at(int col) const { return lower + slope * col; }

    std::string encode() const;
    static ZoneTruth decode(const std::string& text);
};

struct SynthPaths {
    std::string dir;
    std::string train_manifest, test_manifest;
    std::string rules, keywords;
    std::string words_manifest, queries_manifest;
};

SynthPaths generate_corpus(const SynthConfig& cfg, const std::string& out_dir);

// Exposed for tests: one rendered line plus its word boxes and zone truth.
struct SynthScript;
struct WordBox {
    std::string text;
    int x0 = 0, x1 = 0;  // inclusive columns
};

struct SynthLine {
    RasterImage image;
    std::string transcription;
    std::vector<WordBox> words;
    ZoneTruth truth;
};

}  // namespace zspot

#endif
