#ifndef ZSPOT_SPOTTING_HPP
#define ZSPOT_SPOTTING_HPP

#include <map>
#include <string>
#include <vector>

#include "zspot/lexmap.hpp"
#include "zspot/seqmodel.hpp"
#include "zspot/zones.hpp"

namespace zspot {

struct SpotHit {
    std::string line_id;
    KeywordQuery keyword;
    int a = 0, b = 0;      // keyword frame span [a, b)
    int L_s = 0, L_f = 0;  // pixel columns in the height-normalized line
    double score = 0.0;
    bool kept = true;
    int upper_count = -1, lower_count = -1;  // N_u / N_l once re-ranked
    bool rerank_skipped = false;
    bool threshold_fallback = false;
};

// A network with its flattened expansion, reusable across lines.
struct SpotMachine {
    SpottingNetwork net;
    FlatNetwork flat;
};

SpotMachine make_filler_machine(const ModelSet& models);
SpotMachine make_keyword_machine(const ModelSet& models,
                                 const std::vector<std::string>& keyword_symbols);

// Score(X,W) = [log p(X_{a,b}|K) - log p(X_{a,b}|F)] / (b - a): the keyword
// span of the best keyword-network path against the span-restricted filler.
SpotHit score_line(const ModelSet& models, const SpotMachine& keyword,
                   const SpotMachine& filler, const EmissionTable& emissions,
                   const WindowSpec& spec = {});

struct ThresholdPolicy {
    enum class Kind { Global, Local };
    Kind kind = Kind::Global;
    double global_theta = -std::numeric_limits<double>::infinity();
    std::map<std::string, double> local_theta;  // per keyword raw text

    static ThresholdPolicy global(double theta) {
        ThresholdPolicy p;
        p.kind = Kind::Global;
        p.global_theta = theta;
        return p;
    }
};

// Keeps hits with score >= theta; a local policy without an entry for the
// hit's keyword falls back to the global theta and flags the hit.
std::vector<SpotHit> apply_threshold(const std::vector<SpotHit>& hits,
                                     const ThresholdPolicy& policy);

// Peak count of the zone's column projection after RLSA smoothing with
// t = H_L/4; adjacent peaks separate only where the valley drops to zero.
int count_modifier_peaks(const RasterImage& zone_img, int line_height);

// Algorithm-1 re-ranking: extract Z_u/Z_l over the hit's span, count peaks,
// keep only if both counts match the keyword's expected modifiers.
// Extraction failure keeps the hit and flags it (fail-open).
SpotHit rerank(const SpotHit& hit, const ZoneBoundaries& zb, const RasterImage& line_img,
               int line_height, const WindowSpec& spec = {});

// score desc, then line_id asc, then keyword asc
void sort_hits(std::vector<SpotHit>& hits);

// TSV: keyword line_id a b L_s L_f score kept
std::string encode_hits(const std::vector<SpotHit>& hits);
std::vector<SpotHit> decode_hits(const std::string& text);

}  // namespace zspot

#endif
