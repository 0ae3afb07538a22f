#ifndef ZSPOT_EVAL_HPP
#define ZSPOT_EVAL_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "zspot/features.hpp"
#include "zspot/spotting.hpp"

namespace zspot {

struct GroundTruth {
    std::map<std::string, std::set<std::string>> keywords_by_line;

    bool relevant(const std::string& keyword, const std::string& line_id) const {
        auto it = keywords_by_line.find(line_id);
        return it != keywords_by_line.end() && it->second.count(keyword) > 0;
    }
    int relevant_count(const std::string& keyword) const {
        int n = 0;
        for (const auto& [line, kws] : keywords_by_line) n += kws.count(keyword) > 0;
        return n;
    }
};

struct CurvePoint {
    double threshold = 0, precision = 0, recall = 0;
};

// Threshold sweep over the distinct scores (descending); a hit is a true
// positive iff its keyword is in the line's ground truth.
std::vector<CurvePoint> pr_curve(const std::vector<SpotHit>& hits,
                                 const GroundTruth& gt);

struct KeywordAp {
    std::string keyword;
    double ap = 0;
    int relevant = 0;
};

struct EvalReport {
    std::vector<KeywordAp> per_keyword;
    double map = 0;         // mean of per-keyword average precisions
    double curve_area = 0;  // area under the pooled P-R curve
    int keywords_excluded = 0;
    std::vector<CurvePoint> curve;
};

double mean_average_precision(const std::vector<SpotHit>& hits, const GroundTruth& gt);
EvalReport evaluate_hits(const std::vector<SpotHit>& hits, const GroundTruth& gt);

// Interpolated precision: best precision at recall >= level (0 when
// unreachable).
double precision_at_recall(const std::vector<CurvePoint>& curve, double level);

// Per-keyword thresholds maximizing F1 on validation hits (ties toward the
// larger theta); keywords without relevant lines fall back to the global.
ThresholdPolicy fit_local_thresholds(const std::vector<SpotHit>& validation_hits,
                                     const GroundTruth& gt, double global_fallback);

// ---------------------------------------------------------------- dtw

struct DtwParams {
    int band_radius = -1;  // -1: max(len) (effectively unbanded)
};

struct DtwMatch {
    double cost = 0;
    int path_len = 0;
};

// Classic DP with steps {(-1,0),(0,-1),(-1,-1)} inside |i-j| <= r; the step
// cost is the L1 distance over the four profile channels. Unnormalized.
double dtw_distance(const ProfileSequence& a, const ProfileSequence& b,
                    const DtwParams& p = {});
DtwMatch dtw_match(const ProfileSequence& a, const ProfileSequence& b,
                   const DtwParams& p = {});

struct RankedWord {
    std::string word_id;
    double distance = 0;
};

// Path-length-normalized DTW distances, ascending, ties by candidate id.
std::vector<RankedWord> dtw_baseline_rank(
    const ProfileSequence& query,
    const std::vector<std::pair<std::string, const ProfileSequence*>>& candidates,
    const DtwParams& p = {});

// ---------------------------------------------------------------- output

std::string encode_curve_csv(const std::vector<CurvePoint>& curve);
std::vector<CurvePoint> decode_curve_csv(const std::string& text);
std::string encode_report_tsv(const EvalReport& report);
double report_map(const std::string& report_tsv);  // reads the MAP footer
std::string render_curve_svg(const std::vector<CurvePoint>& curve,
                             const std::string& title);

}  // namespace zspot

#endif
