#include "zspot/zones.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace zspot {

namespace {
const char* kZoneLabels[4] = {"Upper", "Middle", "Lower", kSpaceLabel};
}

const char* zone_label_name(ZonePatchLabel label) {
    return kZoneLabels[static_cast<int>(label)];
}

LineHeight estimate_line_height(const RasterImage& img) {
    LineHeight out;
    auto reservoirs = bottom_reservoirs(img);
    if (!reservoirs.empty()) {
        std::map<int, int> counts;
        for (const auto& r : reservoirs) counts[r.height_rows]++;
        int best_h = 0, best_n = 0;
        for (auto [h, n] : counts)
            if (n > best_n || (n == best_n && h > best_h)) {
                best_h = h;
                best_n = n;
            }
        out.rows = best_h;
    } else {
        out.fallback = true;
        ProfileSet p = profiles(img);
        int run = 0, best = 0;
        for (int r = 0; r < img.height; ++r) {
            run = p.horizontal_projection[r] > 0 ? run + 1 : 0;
            best = std::max(best, run);
        }
        out.rows = best;
    }
    out.rows = std::clamp(out.rows, std::min(4, img.height), img.height);
    return out;
}

ZoneStrips zone_patch_sequence(const RasterImage& img, const ZoneParams& zp,
                               const PhogParams& phog_params) {
    if (img.height < zp.patch_height)
        throw DimensionError("zone_patch_sequence: image shorter than one patch");
    if (img.width < 1) throw EmptyImageError("zone_patch_sequence: empty image");

    const int strip_w = zp.strip_width();
    const int n_strips = (img.width + strip_w - 1) / strip_w;
    const int n_patches = (img.height - zp.patch_height) / zp.v_step + 1;

    ZoneStrips out;
    out.patches_per_strip = n_patches;
    for (int s = 0; s < n_strips; ++s) {
        int x0 = s * strip_w;
        int x1 = std::min(img.width, x0 + strip_w);  // exclusive
        out.x_range.emplace_back(x0, x1 - 1);

        FeatureSequence fs;
        fs.dim = phog_params.dim();
        for (int k = 0; k < n_patches; ++k) {
            int y0 = k * zp.v_step;
            RasterImage sub(strip_w, zp.patch_height, PixelDepth::Binary);
            for (int r = 0; r < zp.patch_height; ++r)
                for (int c = x0; c < x1; ++c)
                    sub.set(r, c - x0, img.at(y0 + r, c));
            RasterImage canon = rescale(sub, zp.patch_width, zp.patch_height);
            auto v = phog(canon, phog_params);
            fs.push_frame(v);
        }
        out.features.push_back(std::move(fs));
    }
    return out;
}

ModelSet train_zone_models(const std::vector<LabelledStrip>& strips, int states,
                           int gaussians, int iters_per_level, unsigned threads,
                           TrainStats* stats) {
    bool present[4] = {false, false, false, false};
    std::vector<TrainLine> lines;
    for (const auto& strip : strips) {
        if (strip.labels.size() != static_cast<std::size_t>(strip.features->frames()))
            throw DimensionError("train_zone_models: label count != patch count");
        TrainLine tl;
        tl.features = strip.features;
        ZonePatchLabel prev = ZonePatchLabel::Space;
        bool first = true;
        for (ZonePatchLabel l : strip.labels) {
            present[static_cast<int>(l)] = true;
            if (first || l != prev) tl.symbols.push_back(zone_label_name(l));
            prev = l;
            first = false;
        }
        lines.push_back(std::move(tl));
    }
    for (int i = 0; i < 4; ++i)
        if (!present[i])
            throw DataError(std::string("train_zone_models: no patches labelled '") +
                            kZoneLabels[i] + "'");

    ModelSet ms = flat_start(lines, {"Upper", "Middle", "Lower"}, states);
    int total = 0;
    MixupSchedule sched = make_mixup_schedule(iters_per_level, gaussians, &total);
    TrainStats st = embedded_baum_welch(ms, lines, total, sched, threads);
    if (stats) *stats = std::move(st);
    return ms;
}

int classify_patch(const ModelSet& zone_models, std::span<const double> patch) {
    int best = -1;
    double best_ll = kLogZero;
    for (std::size_t m = 0; m < zone_models.models.size(); ++m) {
        for (const auto& st : zone_models.models[m].states) {
            double ll = gmm_log_pdf(st, patch);
            if (ll > best_ll) {
                best_ll = ll;
                best = static_cast<int>(m);
            }
        }
    }
    return best;
}

ZonePatchLabel model_zone_label(const ModelSet& zone_models, int model_index) {
    const std::string& label = zone_models.models[model_index].label;
    for (int i = 0; i < 4; ++i)
        if (label == kZoneLabels[i]) return static_cast<ZonePatchLabel>(i);
    throw DataError("model is not a zone model: '" + label + "'");
}

SpottingNetwork build_zone_network(const ModelSet& zone_models) {
    int upper = zone_models.require("Upper");
    int middle = zone_models.require("Middle");
    int lower = zone_models.require("Lower");
    int space = zone_models.require(kSpaceLabel);

    SpottingNetwork net;
    net.role = SpottingNetwork::Role::ZoneFiller;
    int st = net.add_node(space);   // leading Space
    int u = net.add_node(upper);
    int m = net.add_node(middle, true);
    int l = net.add_node(lower);
    int sb = net.add_node(space);   // trailing Space
    net.add_entry(st, 0.0);
    net.add_entry(u, 0.0);
    net.add_entry(m, 0.0);
    net.add_edge(st, u, 0.0);
    net.add_edge(st, m, 0.0);
    net.add_edge(u, m, 0.0);
    net.add_edge(m, l, 0.0);
    net.add_edge(m, sb, 0.0);
    net.add_edge(l, sb, 0.0);
    net.add_exit(m, 0.0);
    net.add_exit(l, 0.0);
    net.add_exit(sb, 0.0);
    return net;
}

std::vector<StripRows> align_zones(const RasterImage& img, const ModelSet& zone_models,
                                   const ZoneParams& zp, const PhogParams& phog_params) {
    ZoneStrips strips = zone_patch_sequence(img, zp, phog_params);
    SpottingNetwork net = build_zone_network(zone_models);
    FlatNetwork flat = flatten(zone_models, net);
    const int half_patch = zp.patch_height / 2;

    std::vector<StripRows> out;
    for (std::size_t s = 0; s < strips.features.size(); ++s) {
        EmissionTable em = compute_emissions(zone_models, strips.features[s]);
        Alignment al = viterbi_cached(flat, em);

        bool has_upper = false, has_lower = false;
        int mid_first = -1, mid_last = -1;
        for (const auto& seg : al.segments) {
            switch (model_zone_label(zone_models, net.nodes[seg.node].model)) {
                case ZonePatchLabel::Upper: has_upper = true; break;
                case ZonePatchLabel::Lower: has_lower = true; break;
                case ZonePatchLabel::Middle:
                    mid_first = seg.start;
                    mid_last = seg.end - 1;
                    break;
                default: break;
            }
        }
        if (mid_first < 0) throw DataError("align_zones: parse without Middle");

        // strip ink extremes for the absent-zone fallback
        auto [x0, x1] = strips.x_range[s];
        int ink_top = -1, ink_bottom = -1;
        for (int r = 0; r < img.height && ink_top < 0; ++r)
            for (int c = x0; c <= x1; ++c)
                if (img.at(r, c)) { ink_top = r; break; }
        for (int r = img.height - 1; r >= 0 && ink_bottom < 0; --r)
            for (int c = x0; c <= x1; ++c)
                if (img.at(r, c)) { ink_bottom = r; break; }

        StripRows rows;
        rows.has_ink = ink_top >= 0;
        int mid_top = mid_first * zp.v_step + half_patch;
        int mid_bot = mid_last * zp.v_step + half_patch;
        rows.upper = has_upper ? mid_top : (ink_top >= 0 ? ink_top : mid_top);
        rows.lower = has_lower ? mid_bot : (ink_bottom >= 0 ? ink_bottom : mid_bot);
        rows.upper = std::clamp(rows.upper, 0, img.height - 1);
        rows.lower = std::clamp(rows.lower, rows.upper, img.height - 1);
        out.push_back(rows);
    }
    return out;
}

// ---------------------------------------------------------------- smoothing

namespace {

// Guarded context repair: a strip is replaced by its neighbor mean only if
// it deviates beyond the threshold while the neighbors agree with each
// other, so a single outlier cannot smear into correct strips.
std::vector<int> repair_outliers(const std::vector<int>& rows, double threshold) {
    const int n = static_cast<int>(rows.size());
    std::vector<int> out(rows);
    for (int i = 0; i < n; ++i) {
        if (n == 1) break;
        double mean;
        bool agree = true;
        if (i == 0) mean = rows[1];
        else if (i == n - 1) mean = rows[n - 2];
        else {
            mean = (rows[i - 1] + rows[i + 1]) / 2.0;
            agree = std::abs(rows[i - 1] - rows[i + 1]) <= threshold;
        }
        if (agree && std::abs(rows[i] - mean) > threshold)
            out[i] = static_cast<int>(std::lround(mean));
    }
    return out;
}

std::vector<int> interpolate_columns(const std::vector<int>& rows,
                                     const std::vector<std::pair<int, int>>& x_range,
                                     int width) {
    const int n = static_cast<int>(rows.size());
    std::vector<double> mid(n);
    for (int i = 0; i < n; ++i) mid[i] = (x_range[i].first + x_range[i].second) / 2.0;
    std::vector<int> out(width, rows.empty() ? 0 : rows[0]);
    for (int c = 0; c < width; ++c) {
        double x = c;
        if (x <= mid[0]) { out[c] = rows[0]; continue; }
        if (x >= mid[n - 1]) { out[c] = rows[n - 1]; continue; }
        for (int i = 0; i + 1 < n; ++i) {
            if (x >= mid[i] && x <= mid[i + 1]) {
                double t = (x - mid[i]) / (mid[i + 1] - mid[i]);
                out[c] = static_cast<int>(std::lround(rows[i] + t * (rows[i + 1] - rows[i])));
                break;
            }
        }
    }
    return out;
}

}  // namespace

namespace {

// Strips without ink have no boundary evidence; bridge them linearly from
// the nearest inked strips before the outlier pass.
void bridge_blank_strips(std::vector<int>& vals, const std::vector<StripRows>& rows) {
    const int n = static_cast<int>(vals.size());
    for (int i = 0; i < n; ++i) {
        if (rows[i].has_ink) continue;
        int prev = i - 1, next = i + 1;
        while (prev >= 0 && !rows[prev].has_ink) --prev;
        while (next < n && !rows[next].has_ink) ++next;
        if (prev >= 0 && next < n) {
            double t = static_cast<double>(i - prev) / (next - prev);
            vals[i] = static_cast<int>(std::lround(vals[prev] + t * (vals[next] - vals[prev])));
        } else if (prev >= 0) {
            vals[i] = vals[prev];
        } else if (next < n) {
            vals[i] = vals[next];
        }
    }
}

}  // namespace

ZoneBoundaries smooth_boundaries(const std::vector<StripRows>& rows,
                                 const std::vector<std::pair<int, int>>& x_range,
                                 int line_height, int width, int height) {
    if (rows.empty()) throw DataError("smooth_boundaries: no strips");
    double threshold = line_height / 4.0;
    std::vector<int> uppers, lowers;
    for (const auto& r : rows) {
        uppers.push_back(r.upper);
        lowers.push_back(r.lower);
    }
    bridge_blank_strips(uppers, rows);
    bridge_blank_strips(lowers, rows);
    uppers = repair_outliers(uppers, threshold);
    lowers = repair_outliers(lowers, threshold);

    ZoneBoundaries zb;
    for (std::size_t i = 0; i < rows.size(); ++i)
        zb.strips.push_back({x_range[i].first, x_range[i].second, uppers[i], lowers[i]});
    zb.upper = interpolate_columns(uppers, x_range, width);
    zb.lower = interpolate_columns(lowers, x_range, width);
    for (int c = 0; c < width; ++c) {
        zb.upper[c] = std::clamp(zb.upper[c], 0, height - 1);
        zb.lower[c] = std::clamp(zb.lower[c], 0, height - 1);
        zb.upper[c] = std::min(zb.upper[c], zb.lower[c]);
    }
    return zb;
}

ZoneBoundaries segment_line_zones(const RasterImage& img, const ModelSet& zone_models,
                                  double alpha, int v_step,
                                  const PhogParams& phog_params) {
    LineHeight hl = estimate_line_height(img);
    ZoneParams zp;
    zp.line_height = hl.rows;
    zp.alpha = alpha;
    zp.v_step = v_step;
    auto rows = align_zones(img, zone_models, zp, phog_params);

    std::vector<std::pair<int, int>> x_range;
    int strip_w = zp.strip_width();
    int n = (img.width + strip_w - 1) / strip_w;
    for (int s = 0; s < n; ++s)
        x_range.emplace_back(s * strip_w, std::min(img.width, (s + 1) * strip_w) - 1);
    return smooth_boundaries(rows, x_range, hl.rows, img.width, img.height);
}

// ---------------------------------------------------------------- io

std::string ZoneBoundaries::encode() const {
    std::string out;
    for (std::size_t i = 0; i < strips.size(); ++i)
        out += std::to_string(i) + "\t" + std::to_string(strips[i].x_start) + "\t" +
               std::to_string(strips[i].x_end) + "\t" +
               std::to_string(strips[i].upper_row) + "\t" +
               std::to_string(strips[i].lower_row) + "\n";
    return out;
}

ZoneBoundaries ZoneBoundaries::decode(const std::string& text) {
    ZoneBoundaries zb;
    std::istringstream in(text);
    std::string line;
    std::vector<StripRows> rows;
    std::vector<std::pair<int, int>> x_range;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cols = split_tabs(line);
        if (cols.size() != 5) throw DataError("zone boundaries: expected 5 columns");
        Strip s;
        s.x_start = std::stoi(cols[1]);
        s.x_end = std::stoi(cols[2]);
        s.upper_row = std::stoi(cols[3]);
        s.lower_row = std::stoi(cols[4]);
        zb.strips.push_back(s);
        rows.push_back({s.upper_row, s.lower_row});
        x_range.emplace_back(s.x_start, s.x_end);
    }
    if (zb.strips.empty()) throw DataError("zone boundaries: empty file");
    int width = zb.strips.back().x_end + 1;
    std::vector<int> uppers, lowers;
    for (const auto& r : rows) {
        uppers.push_back(r.upper);
        lowers.push_back(r.lower);
    }
    zb.upper = interpolate_columns(uppers, x_range, width);
    zb.lower = interpolate_columns(lowers, x_range, width);
    for (int c = 0; c < width; ++c) zb.upper[c] = std::min(zb.upper[c], zb.lower[c]);
    return zb;
}

void ZoneBoundaries::save(const std::string& path) const { write_file(path, encode()); }

ZoneBoundaries ZoneBoundaries::load(const std::string& path) {
    return decode(read_file(path));
}

// ---------------------------------------------------------------- baseline

namespace {

struct RegionCut {
    int upper = 0, lower = 0;
    bool ok = false;
};

RegionCut projection_cut(const RasterImage& img, int x0, int x1) {
    RegionCut cut;
    std::vector<long> hp(img.height, 0);
    long total = 0;
    for (int r = 0; r < img.height; ++r)
        for (int c = x0; c < x1; ++c)
            if (img.at(r, c)) {
                hp[r]++;
                total++;
            }
    if (total == 0) return cut;

    int matra = 0;
    for (int r = 1; r < img.height; ++r)
        if (hp[r] > hp[matra]) matra = r;
    cut.upper = std::min(matra + 1, img.height - 1);

    double centroid = 0;
    for (int r = 0; r < img.height; ++r) centroid += static_cast<double>(r) * hp[r];
    centroid /= static_cast<double>(total);
    int c_row = static_cast<int>(centroid);

    double mid_sum = 0;
    int mid_n = 0;
    for (int r = cut.upper; r <= std::max(cut.upper, c_row); ++r) {
        if (r >= img.height) break;
        mid_sum += static_cast<double>(hp[r]);
        ++mid_n;
    }
    double mid_mean = mid_n ? mid_sum / mid_n : static_cast<double>(hp[matra]);

    cut.lower = img.height - 1;
    for (int r = c_row + 1; r < img.height; ++r) {
        if (static_cast<double>(hp[r]) < 0.2 * mid_mean) {
            cut.lower = r;
            break;
        }
    }
    if (cut.lower < cut.upper) cut.lower = cut.upper;
    cut.ok = true;
    return cut;
}

}  // namespace

ZoneBoundaries projection_zone_baseline(const RasterImage& img, bool local) {
    if (img.ink_count() == 0)
        throw EmptyImageError("projection_zone_baseline: blank image");
    RegionCut global = projection_cut(img, 0, img.width);

    std::vector<StripRows> rows;
    std::vector<std::pair<int, int>> x_range;
    if (!local) {
        rows.push_back({global.upper, global.lower});
        x_range.emplace_back(0, img.width - 1);
    } else {
        int strip_w = std::max(1, img.width / 10);
        for (int x0 = 0; x0 < img.width; x0 += strip_w) {
            int x1 = std::min(img.width, x0 + strip_w);
            RegionCut cut = projection_cut(img, x0, x1);
            if (!cut.ok) cut = global;  // blank strip: fall back to the line cut
            rows.push_back({cut.upper, cut.lower});
            x_range.emplace_back(x0, x1 - 1);
        }
    }

    // join midpoints without outlier repair
    ZoneBoundaries zb;
    std::vector<int> uppers, lowers;
    for (const auto& r : rows) {
        uppers.push_back(r.upper);
        lowers.push_back(r.lower);
    }
    for (std::size_t i = 0; i < rows.size(); ++i)
        zb.strips.push_back({x_range[i].first, x_range[i].second, uppers[i], lowers[i]});
    zb.upper = interpolate_columns(uppers, x_range, img.width);
    zb.lower = interpolate_columns(lowers, x_range, img.width);
    for (int c = 0; c < img.width; ++c) {
        zb.upper[c] = std::clamp(zb.upper[c], 0, img.height - 1);
        zb.lower[c] = std::clamp(zb.lower[c], 0, img.height - 1);
        zb.upper[c] = std::min(zb.upper[c], zb.lower[c]);
    }
    return zb;
}

// ---------------------------------------------------------------- extraction

ZoneImages extract_middle_zone(const RasterImage& img, const ZoneBoundaries& zb) {
    if (static_cast<int>(zb.upper.size()) < img.width)
        throw DimensionError("extract_middle_zone: boundaries narrower than image");
    ZoneImages out;
    out.middle = RasterImage(img.width, img.height, PixelDepth::Binary);
    out.upper = RasterImage(img.width, img.height, PixelDepth::Binary);
    out.lower = RasterImage(img.width, img.height, PixelDepth::Binary);
    out.reservoir_mid = RasterImage(img.width, img.height, PixelDepth::Binary);

    RasterImage trapped = trapped_background_mask(img);
    for (int c = 0; c < img.width; ++c) {
        int u = zb.upper[c], l = zb.lower[c];
        for (int r = 0; r < img.height; ++r) {
            if (img.at(r, c)) {
                if (r < u) out.upper.set(r, c, 1);
                else if (r > l) out.lower.set(r, c, 1);
                else out.middle.set(r, c, 1);
            }
            if (trapped.at(r, c) && r >= u && r <= l) out.reservoir_mid.set(r, c, 1);
        }
    }
    return out;
}

}  // namespace zspot
