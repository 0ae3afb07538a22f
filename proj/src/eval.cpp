#include "zspot/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace zspot {

namespace {

std::vector<SpotHit> sorted_copy(const std::vector<SpotHit>& hits) {
    std::vector<SpotHit> s(hits);
    sort_hits(s);
    return s;
}

}  // namespace

std::vector<CurvePoint> pr_curve(const std::vector<SpotHit>& hits, const GroundTruth& gt) {
    if (gt.keywords_by_line.empty()) throw DataError("pr_curve: empty ground truth");
    std::vector<SpotHit> s = sorted_copy(hits);

    std::set<std::string> keywords;
    for (const auto& h : s) keywords.insert(h.keyword.raw_text);
    long total_relevant = 0;
    for (const auto& k : keywords) total_relevant += gt.relevant_count(k);

    std::vector<CurvePoint> curve;
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        double theta = s[i].score;
        while (i < s.size() && s[i].score == theta) {
            if (gt.relevant(s[i].keyword.raw_text, s[i].line_id)) ++tp;
            else ++fp;
            ++i;
        }
        CurvePoint pt;
        pt.threshold = theta;
        pt.precision = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
        pt.recall = total_relevant ? static_cast<double>(tp) / total_relevant : 0.0;
        curve.push_back(pt);
    }
    return curve;
}

namespace {

double average_precision(const std::vector<const SpotHit*>& ranked,
                         const GroundTruth& gt, const std::string& keyword,
                         int total_relevant) {
    double sum = 0;
    int tp = 0, seen = 0;
    for (const SpotHit* h : ranked) {
        ++seen;
        if (gt.relevant(keyword, h->line_id)) {
            ++tp;
            sum += static_cast<double>(tp) / seen;
        }
    }
    return total_relevant ? sum / total_relevant : 0.0;
}

}  // namespace

EvalReport evaluate_hits(const std::vector<SpotHit>& hits, const GroundTruth& gt) {
    if (gt.keywords_by_line.empty())
        throw DataError("evaluate_hits: empty ground truth");
    EvalReport report;

    std::map<std::string, std::vector<const SpotHit*>> by_keyword;
    for (const auto& h : hits) by_keyword[h.keyword.raw_text].push_back(&h);

    double ap_sum = 0;
    int ap_n = 0;
    for (auto& [keyword, list] : by_keyword) {
        std::stable_sort(list.begin(), list.end(),
                         [](const SpotHit* a, const SpotHit* b) {
                             if (a->score != b->score) return a->score > b->score;
                             return a->line_id < b->line_id;
                         });
        int rel = gt.relevant_count(keyword);
        if (rel == 0) {
            report.keywords_excluded++;
            continue;
        }
        KeywordAp ka;
        ka.keyword = keyword;
        ka.relevant = rel;
        ka.ap = average_precision(list, gt, keyword, rel);
        report.per_keyword.push_back(ka);
        ap_sum += ka.ap;
        ++ap_n;
    }
    if (ap_n == 0) throw DataError("evaluate_hits: no keyword has a relevant line");
    report.map = ap_sum / ap_n;

    report.curve = pr_curve(hits, gt);
    std::vector<CurvePoint> pts(report.curve);
    std::sort(pts.begin(), pts.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.recall < b.recall; });
    double area = 0, prev_r = 0, prev_p = pts.empty() ? 0 : pts.front().precision;
    for (const auto& pt : pts) {
        area += (pt.recall - prev_r) * (pt.precision + prev_p) / 2.0;
        prev_r = pt.recall;
        prev_p = pt.precision;
    }
    report.curve_area = area;
    return report;
}

double mean_average_precision(const std::vector<SpotHit>& hits, const GroundTruth& gt) {
    return evaluate_hits(hits, gt).map;
}

double precision_at_recall(const std::vector<CurvePoint>& curve, double level) {
    double best = 0;
    for (const auto& pt : curve)
        if (pt.recall >= level) best = std::max(best, pt.precision);
    return best;
}

ThresholdPolicy fit_local_thresholds(const std::vector<SpotHit>& validation_hits,
                                     const GroundTruth& gt, double global_fallback) {
    ThresholdPolicy policy;
    policy.kind = ThresholdPolicy::Kind::Local;
    policy.global_theta = global_fallback;

    std::map<std::string, std::vector<const SpotHit*>> by_keyword;
    for (const auto& h : validation_hits) by_keyword[h.keyword.raw_text].push_back(&h);
    for (auto& [keyword, list] : by_keyword) {
        int rel = gt.relevant_count(keyword);
        if (rel == 0) continue;  // fallback handles unseen/degenerate keywords
        std::stable_sort(list.begin(), list.end(),
                         [](const SpotHit* a, const SpotHit* b) {
                             if (a->score != b->score) return a->score > b->score;
                             return a->line_id < b->line_id;
                         });
        double best_f1 = -1, best_theta = global_fallback;
        int tp = 0, kept = 0;
        for (std::size_t i = 0; i < list.size(); ++i) {
            ++kept;
            if (gt.relevant(keyword, list[i]->line_id)) ++tp;
            if (i + 1 < list.size() && list[i + 1]->score == list[i]->score) continue;
            double precision = static_cast<double>(tp) / kept;
            double recall = static_cast<double>(tp) / rel;
            double f1 = precision + recall > 0
                            ? 2 * precision * recall / (precision + recall)
                            : 0.0;
            if (f1 > best_f1) {
                best_f1 = f1;
                best_theta = list[i]->score;
            }
        }
        policy.local_theta[keyword] = best_theta;
    }
    return policy;
}

// ---------------------------------------------------------------- dtw

namespace {

double frame_cost(const ProfileSequence& a, int i, const ProfileSequence& b, int j) {
    auto fa = a.frame(i);
    auto fb = b.frame(j);
    double c = 0;
    for (int k = 0; k < 4; ++k) c += std::abs(fa[k] - fb[k]);
    return c;
}

}  // namespace

DtwMatch dtw_match(const ProfileSequence& a, const ProfileSequence& b,
                   const DtwParams& p) {
    const int n = a.length(), m = b.length();
    if (n == 0 || m == 0) throw EmptyImageError("dtw: empty sequence");
    int r = p.band_radius < 0 ? std::max(n, m) : p.band_radius;
    if (std::abs(n - m) > r)
        throw BandTooNarrowError("dtw: band radius " + std::to_string(r) +
                                 " cannot reach the corner");

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(static_cast<std::size_t>(n) * m, inf);
    auto D = [&](int i, int j) -> double& {
        return dp[static_cast<std::size_t>(i) * m + j];
    };
    for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - r), hi = std::min(m - 1, i + r);
        for (int j = lo; j <= hi; ++j) {
            double c = frame_cost(a, i, b, j);
            if (i == 0 && j == 0) {
                D(i, j) = c;
                continue;
            }
            double best = inf;
            if (i > 0 && j > 0) best = std::min(best, D(i - 1, j - 1));
            if (i > 0) best = std::min(best, D(i - 1, j));
            if (j > 0) best = std::min(best, D(i, j - 1));
            D(i, j) = best + c;
        }
    }
    DtwMatch out;
    out.cost = D(n - 1, m - 1);
    if (!std::isfinite(out.cost)) throw BandTooNarrowError("dtw: band infeasible");

    int i = n - 1, j = m - 1, steps = 1;
    while (i > 0 || j > 0) {
        double diag = i > 0 && j > 0 ? D(i - 1, j - 1) : inf;
        double up = i > 0 ? D(i - 1, j) : inf;
        double left = j > 0 ? D(i, j - 1) : inf;
        if (diag <= up && diag <= left) {
            --i;
            --j;
        } else if (up <= left) {
            --i;
        } else {
            --j;
        }
        ++steps;
    }
    out.path_len = steps;
    return out;
}

double dtw_distance(const ProfileSequence& a, const ProfileSequence& b,
                    const DtwParams& p) {
    return dtw_match(a, b, p).cost;
}

std::vector<RankedWord> dtw_baseline_rank(
    const ProfileSequence& query,
    const std::vector<std::pair<std::string, const ProfileSequence*>>& candidates,
    const DtwParams& p) {
    std::vector<RankedWord> out;
    for (const auto& [id, seq] : candidates) {
        DtwMatch m = dtw_match(query, *seq, p);
        out.push_back({id, m.cost / m.path_len});
    }
    std::sort(out.begin(), out.end(), [](const RankedWord& a, const RankedWord& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.word_id < b.word_id;
    });
    return out;
}

// ---------------------------------------------------------------- output

std::string encode_curve_csv(const std::vector<CurvePoint>& curve) {
    std::string out = "threshold,precision,recall\n";
    for (const auto& pt : curve)
        out += fmt_double(pt.threshold) + "," + fmt_double(pt.precision) + "," +
               fmt_double(pt.recall) + "\n";
    return out;
}

std::vector<CurvePoint> decode_curve_csv(const std::string& text) {
    std::vector<CurvePoint> out;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string a, b, c;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') ||
            !std::getline(row, c, ','))
            throw DataError("curve csv: malformed row");
        out.push_back({std::stod(a), std::stod(b), std::stod(c)});
    }
    return out;
}

std::string encode_report_tsv(const EvalReport& report) {
    std::string out;
    for (const auto& ka : report.per_keyword)
        out += ka.keyword + "\t" + fmt_double(ka.ap) + "\t" +
               std::to_string(ka.relevant) + "\n";
    out += "EXCLUDED\t" + std::to_string(report.keywords_excluded) + "\n";
    out += "CURVE_AUC\t" + fmt_double(report.curve_area) + "\n";
    out += "MAP\t" + fmt_double(report.map) + "\n";
    return out;
}

double report_map(const std::string& report_tsv) {
    std::istringstream in(report_tsv);
    std::string line;
    while (std::getline(in, line)) {
        auto cols = split_tabs(line);
        if (cols.size() == 2 && cols[0] == "MAP") return std::stod(cols[1]);
    }
    throw DataError("report: no MAP footer");
}

std::string render_curve_svg(const std::vector<CurvePoint>& curve,
                             const std::string& title) {
    const double x0 = 60, x1 = 780, y0 = 580, y1 = 20;
    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\">\n"
        "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n"
        "<line x1=\"60\" y1=\"580\" x2=\"780\" y2=\"580\" stroke=\"black\"/>\n"
        "<line x1=\"60\" y1=\"580\" x2=\"60\" y2=\"20\" stroke=\"black\"/>\n"
        "<text x=\"400\" y=\"598\" text-anchor=\"middle\" font-size=\"14\">recall</text>\n"
        "<text x=\"16\" y=\"300\" text-anchor=\"middle\" font-size=\"14\" "
        "transform=\"rotate(-90 16 300)\">precision</text>\n"
        "<text x=\"400\" y=\"16\" text-anchor=\"middle\" font-size=\"14\">" +
        title + "</text>\n<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
    std::vector<CurvePoint> pts(curve);
    std::sort(pts.begin(), pts.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.recall < b.recall; });
    for (const auto& pt : pts) {
        double x = x0 + pt.recall * (x1 - x0);
        double y = y0 + pt.precision * (y1 - y0);
        svg += fmt_double(x) + "," + fmt_double(y) + " ";
    }
    svg += "\"/>\n</svg>\n";
    return svg;
}

}  // namespace zspot
