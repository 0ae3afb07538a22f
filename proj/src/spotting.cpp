#include "zspot/spotting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace zspot {

SpotMachine make_filler_machine(const ModelSet& models) {
    SpotMachine m;
    m.net = build_filler(models);
    m.flat = flatten(models, m.net);
    return m;
}

SpotMachine make_keyword_machine(const ModelSet& models,
                                 const std::vector<std::string>& keyword_symbols) {
    SpotMachine m;
    m.net = build_keyword_network(models, keyword_symbols);
    m.flat = flatten(models, m.net);
    return m;
}

namespace {

// Sum of emissions over [a,b) plus the transitions inside the span; the
// transitions into and out of the span are excluded, mirroring the free
// entry/exit of the restricted filler pass.
double span_path_loglik(const ModelSet& models, const SpottingNetwork& net,
                        const Alignment& al, const EmissionTable& em, int a, int b) {
    auto gsid = [&](int node, int state) {
        return models.state_offset(net.nodes[node].model) + state;
    };
    double total = 0;
    for (int t = a; t < b; ++t)
        total += em.at(t, gsid(al.frame_states[t].first, al.frame_states[t].second));
    for (int t = a; t + 1 < b; ++t) {
        auto [n1, s1] = al.frame_states[t];
        auto [n2, s2] = al.frame_states[t + 1];
        const CharHmm& m1 = models.models[net.nodes[n1].model];
        if (n1 == n2 && s1 == s2) {
            total += m1.log_self[s1];
        } else if (n1 == n2 && s2 == s1 + 1) {
            total += m1.log_next[s1];
        } else {
            double edge = kLogZero;
            for (const auto& e : net.edges)
                if (e.from == n1 && e.to == n2) {
                    edge = e.logp;
                    break;
                }
            total += m1.log_next[m1.state_count() - 1] + edge;
        }
    }
    return total;
}

}  // namespace

SpotHit score_line(const ModelSet& models, const SpotMachine& keyword,
                   const SpotMachine& filler, const EmissionTable& emissions,
                   const WindowSpec& spec) {
    Alignment al = viterbi_cached(keyword.flat, emissions);

    int a = -1, b = -1;
    for (const auto& seg : al.segments) {
        if (!keyword.net.nodes[seg.node].keyword) continue;
        if (a < 0) a = seg.start;
        b = seg.end;
    }
    if (a < 0) throw DataError("score_line: keyword network produced no tagged span");

    double numerator = span_path_loglik(models, keyword.net, al, emissions, a, b);
    double denominator = best_span_loglik(filler.flat, emissions, a, b);

    SpotHit hit;
    hit.a = a;
    hit.b = b;
    hit.L_s = a * spec.step;
    hit.L_f = b * spec.step + spec.win_width;
    hit.score = (numerator - denominator) / static_cast<double>(b - a);
    return hit;
}

std::vector<SpotHit> apply_threshold(const std::vector<SpotHit>& hits,
                                     const ThresholdPolicy& policy) {
    std::vector<SpotHit> kept;
    for (const auto& h : hits) {
        double theta = policy.global_theta;
        bool fallback = false;
        if (policy.kind == ThresholdPolicy::Kind::Local) {
            auto it = policy.local_theta.find(h.keyword.raw_text);
            if (it != policy.local_theta.end()) theta = it->second;
            else fallback = true;
        }
        if (h.score >= theta) {
            kept.push_back(h);
            kept.back().kept = true;
            kept.back().threshold_fallback = fallback;
        }
    }
    return kept;
}

int count_modifier_peaks(const RasterImage& zone_img, int line_height) {
    if (zone_img.ink_count() == 0) return 0;
    int t = static_cast<int>(std::lround(line_height / 4.0));
    RasterImage smoothed = rlsa_horizontal(zone_img, t);
    ProfileSet p = profiles(smoothed);
    int peaks = 0;
    bool in_run = false;
    for (int c = 0; c < smoothed.width; ++c) {
        bool nonzero = p.vertical_projection[c] > 0;
        if (nonzero && !in_run) ++peaks;
        in_run = nonzero;
    }
    return peaks;
}

namespace {

RasterImage clip_columns(const RasterImage& img, int x0, int x1) {
    x0 = std::clamp(x0, 0, img.width - 1);
    x1 = std::clamp(x1, x0, img.width - 1);
    RasterImage out(x1 - x0 + 1, img.height, PixelDepth::Binary);
    for (int r = 0; r < img.height; ++r)
        for (int c = x0; c <= x1; ++c) out.set(r, c - x0, img.at(r, c));
    return out;
}

}  // namespace

SpotHit rerank(const SpotHit& hit, const ZoneBoundaries& zb, const RasterImage& line_img,
               int line_height, const WindowSpec& spec) {
    SpotHit out = hit;
    try {
        // span columns back in original-image coordinates
        int norm_w = std::max(
            1, static_cast<int>(std::lround(static_cast<double>(line_img.width) *
                                            spec.win_height / line_img.height)));
        double scale = static_cast<double>(line_img.width) / norm_w;
        int x0 = static_cast<int>(std::lround(hit.L_s * scale));
        int x1 = static_cast<int>(std::lround(hit.L_f * scale));

        ZoneImages zones = extract_middle_zone(line_img, zb);
        RasterImage zu = clip_columns(zones.upper, x0, x1);
        RasterImage zl = clip_columns(zones.lower, x0, x1);
        out.upper_count = count_modifier_peaks(zu, line_height);
        out.lower_count = count_modifier_peaks(zl, line_height);
        if (out.upper_count != hit.keyword.upper_modifiers ||
            out.lower_count != hit.keyword.lower_modifiers)
            out.kept = false;  // a filter: kept never flips back on
    } catch (const Error&) {
        out.rerank_skipped = true;  // fail-open
    }
    return out;
}

void sort_hits(std::vector<SpotHit>& hits) {
    std::stable_sort(hits.begin(), hits.end(), [](const SpotHit& a, const SpotHit& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.line_id != b.line_id) return a.line_id < b.line_id;
        return a.keyword.raw_text < b.keyword.raw_text;
    });
}

std::string encode_hits(const std::vector<SpotHit>& hits) {
    std::string out;
    for (const auto& h : hits)
        out += h.keyword.raw_text + "\t" + h.line_id + "\t" + std::to_string(h.a) +
               "\t" + std::to_string(h.b) + "\t" + std::to_string(h.L_s) + "\t" +
               std::to_string(h.L_f) + "\t" + fmt_double(h.score) + "\t" +
               (h.kept ? "1" : "0") + "\n";
    return out;
}

std::vector<SpotHit> decode_hits(const std::string& text) {
    std::vector<SpotHit> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cols = split_tabs(line);
        if (cols.size() != 8)
            throw DataError("hits line " + std::to_string(line_no) +
                            ": expected 8 columns");
        SpotHit h;
        h.keyword.raw_text = cols[0];
        h.line_id = cols[1];
        h.a = std::stoi(cols[2]);
        h.b = std::stoi(cols[3]);
        h.L_s = std::stoi(cols[4]);
        h.L_f = std::stoi(cols[5]);
        h.score = std::stod(cols[6]);
        h.kept = cols[7] == "1";
        out.push_back(std::move(h));
    }
    return out;
}

}  // namespace zspot
