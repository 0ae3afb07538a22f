#include "zspot/features.hpp"

#include <algorithm>
#include <cmath>

namespace zspot {

// ---------------------------------------------------------------- zsft

namespace {
constexpr char kFeatureMagic[4] = {'Z', 'S', 'F', 'T'};
constexpr std::uint32_t kFeatureVersion = 1;
}  // namespace

std::string FeatureSequence::encode() const {
    std::string out;
    out.append(kFeatureMagic, 4);
    put_u32le(out, kFeatureVersion);
    put_u32le(out, static_cast<std::uint32_t>(frames()));
    put_u32le(out, static_cast<std::uint32_t>(dim));
    for (double v : data) put_f64le(out, v);
    return out;
}

FeatureSequence FeatureSequence::decode(const std::string& bytes) {
    ByteReader r(bytes);
    if (r.bytes(4) != std::string(kFeatureMagic, 4))
        throw DataError("feature file: bad magic");
    if (r.u32le() != kFeatureVersion) throw DataError("feature file: bad version");
    std::uint32_t frames = r.u32le();
    std::uint32_t dim = r.u32le();
    FeatureSequence fs;
    fs.dim = static_cast<int>(dim);
    fs.data.resize(static_cast<std::size_t>(frames) * dim);
    for (auto& v : fs.data) v = r.f64le();
    if (!r.at_end()) throw DataError("feature file: trailing bytes");
    return fs;
}

void FeatureSequence::save(const std::string& path) const {
    write_file(path, encode());
}

FeatureSequence FeatureSequence::load(const std::string& path) {
    return decode(read_file(path));
}

// ---------------------------------------------------------------- framing

std::vector<RasterImage> frame_windows(const RasterImage& img, const WindowSpec& spec) {
    if (img.width == 0 || img.height == 0)
        throw EmptyImageError("frame_windows: zero-area image");
    RasterImage line = rescale_to_height(img, spec.win_height);

    std::vector<RasterImage> out;
    if (line.width < spec.win_width) {
        RasterImage w(spec.win_width, spec.win_height, PixelDepth::Binary);
        for (int r = 0; r < line.height; ++r)
            for (int c = 0; c < line.width; ++c) w.set(r, c, line.at(r, c));
        out.push_back(std::move(w));
        return out;
    }
    for (int x = 0; x + spec.win_width <= line.width; x += spec.step) {
        RasterImage w(spec.win_width, spec.win_height, PixelDepth::Binary);
        for (int r = 0; r < spec.win_height; ++r)
            for (int c = 0; c < spec.win_width; ++c) w.set(r, c, line.at(r, x + c));
        out.push_back(std::move(w));
    }
    return out;
}

// ---------------------------------------------------------------- gradients

namespace {

// 3x3 Sobel with replicated borders on the {0,1} image.
struct Gradients {
    std::vector<double> mag;
    std::vector<double> angle_deg;  // [0,360)
};

Gradients sobel(const RasterImage& img) {
    Gradients g;
    g.mag.assign(img.size(), 0.0);
    g.angle_deg.assign(img.size(), 0.0);
    auto px = [&](int r, int c) -> double {
        r = std::clamp(r, 0, img.height - 1);
        c = std::clamp(c, 0, img.width - 1);
        return img.at(r, c) ? 1.0 : 0.0;
    };
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            double gx = -px(r - 1, c - 1) + px(r - 1, c + 1) - 2 * px(r, c - 1) +
                        2 * px(r, c + 1) - px(r + 1, c - 1) + px(r + 1, c + 1);
            double gy = -px(r - 1, c - 1) - 2 * px(r - 1, c) - px(r - 1, c + 1) +
                        px(r + 1, c - 1) + 2 * px(r + 1, c) + px(r + 1, c + 1);
            double m = std::sqrt(gx * gx + gy * gy);
            if (m == 0.0) continue;
            double a = std::atan2(gy, gx) * 180.0 / M_PI;
            if (a < 0) a += 360.0;
            if (a >= 360.0) a -= 360.0;
            std::size_t i = static_cast<std::size_t>(r) * img.width + c;
            g.mag[i] = m;
            g.angle_deg[i] = a;
        }
    }
    return g;
}

}  // namespace

std::vector<double> phog(const RasterImage& window, const PhogParams& p) {
    if (window.width == 0 || window.height == 0)
        throw EmptyImageError("phog: empty window");
    std::vector<double> out(p.dim(), 0.0);
    Gradients g = sobel(window);

    int offset = 0;
    int grid = 1;
    for (int level = 0; level <= p.levels; ++level) {
        for (int r = 0; r < window.height; ++r) {
            int cr = std::min(grid - 1, r * grid / window.height);
            for (int c = 0; c < window.width; ++c) {
                std::size_t i = static_cast<std::size_t>(r) * window.width + c;
                if (g.mag[i] == 0.0) continue;
                int cc = std::min(grid - 1, c * grid / window.width);
                int bin = std::min(p.bins - 1,
                                   static_cast<int>(g.angle_deg[i] / (360.0 / p.bins)));
                out[offset + (cr * grid + cc) * p.bins + bin] += g.mag[i];
            }
        }
        int block = grid * grid * p.bins;
        double sum = 0;
        for (int k = 0; k < block; ++k) sum += out[offset + k];
        if (sum > 0)
            for (int k = 0; k < block; ++k) out[offset + k] /= sum;
        offset += block;
        grid *= 2;
    }
    return out;
}

std::vector<double> lgh(const RasterImage& window) {
    if (window.width == 0 || window.height == 0)
        throw EmptyImageError("lgh: empty window");
    constexpr int kGrid = 4, kBins = 8;
    std::vector<double> out(kGrid * kGrid * kBins, 0.0);
    Gradients g = sobel(window);
    for (int r = 0; r < window.height; ++r) {
        int cr = std::min(kGrid - 1, r * kGrid / window.height);
        for (int c = 0; c < window.width; ++c) {
            std::size_t i = static_cast<std::size_t>(r) * window.width + c;
            if (g.mag[i] == 0.0) continue;
            int cc = std::min(kGrid - 1, c * kGrid / window.width);
            int bin = std::min(kBins - 1,
                               static_cast<int>(g.angle_deg[i] / (360.0 / kBins)));
            out[(cr * kGrid + cc) * kBins + bin] += g.mag[i];
        }
    }
    for (int cell = 0; cell < kGrid * kGrid; ++cell) {
        double sum = 0;
        for (int b = 0; b < kBins; ++b) sum += out[cell * kBins + b];
        if (sum > 0)
            for (int b = 0; b < kBins; ++b) out[cell * kBins + b] /= sum;
    }
    return out;
}

RasterImage background_mask(const RasterImage& img) {
    RasterImage mask(img.width, img.height, PixelDepth::Binary);
    for (const auto& res : bottom_reservoirs(img))
        for (auto [r, c] : res.pixel_set) mask.set(r, c, 1);
    return mask;
}

FeatureSequence extract_line_features(const RasterImage& img, const RasterImage& bg_mask,
                                      const WindowSpec& spec, const PhogParams& p,
                                      FeatureMode mode) {
    if (img.width == 0 || img.height == 0)
        throw EmptyImageError("extract_line_features: zero-area image");
    if (bg_mask.width != img.width || bg_mask.height != img.height)
        throw DimensionError("extract_line_features: mask dimensions differ");

    std::vector<RasterImage> fg_windows, bg_windows;
    if (mode != FeatureMode::Bg) fg_windows = frame_windows(img, spec);
    if (mode != FeatureMode::Fg) bg_windows = frame_windows(bg_mask, spec);

    int n = mode == FeatureMode::Bg ? static_cast<int>(bg_windows.size())
                                    : static_cast<int>(fg_windows.size());
    FeatureSequence fs;
    fs.dim = (mode == FeatureMode::FgBg) ? 2 * p.dim() : p.dim();
    fs.provenance = mode == FeatureMode::Fg   ? Provenance::Foreground
                    : mode == FeatureMode::Bg ? Provenance::Background
                                              : Provenance::Concatenated;
    fs.data.reserve(static_cast<std::size_t>(n) * fs.dim);
    for (int i = 0; i < n; ++i) {
        if (mode != FeatureMode::Bg) {
            auto v = phog(fg_windows[i], p);
            fs.data.insert(fs.data.end(), v.begin(), v.end());
        }
        if (mode != FeatureMode::Fg) {
            auto v = phog(bg_windows[i], p);
            fs.data.insert(fs.data.end(), v.begin(), v.end());
        }
    }
    return fs;
}

FeatureSequence extract_line_features(const RasterImage& img, const WindowSpec& spec,
                                      const PhogParams& p, FeatureMode mode) {
    if (mode == FeatureMode::Fg) {
        RasterImage empty(img.width, img.height, PixelDepth::Binary);
        return extract_line_features(img, empty, spec, p, mode);
    }
    return extract_line_features(img, background_mask(img), spec, p, mode);
}

// ---------------------------------------------------------------- profiles

namespace {

std::vector<double> minmax_normalize(const std::vector<double>& v,
                                     const std::vector<bool>& valid) {
    double lo = 0, hi = 0;
    bool any = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!valid[i]) continue;
        if (!any) { lo = hi = v[i]; any = true; }
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
    }
    std::vector<double> out(v.size(), 0.0);
    if (!any || hi == lo) return out;  // min=max convention: all zero
    for (std::size_t i = 0; i < v.size(); ++i)
        if (valid[i]) out[i] = (v[i] - lo) / (hi - lo);
    return out;
}

}  // namespace

ProfileSequence dtw_profile_features(const RasterImage& word_img) {
    if (word_img.ink_count() == 0)
        throw EmptyImageError("dtw_profile_features: blank image");
    ProfileSet p = profiles(word_img);
    int w = word_img.width;

    std::vector<double> vp(w), up(w), lp(w), cr(w);
    std::vector<bool> all(w, true), has_ink(w);
    for (int c = 0; c < w; ++c) {
        vp[c] = p.vertical_projection[c];
        cr[c] = p.crossings[c];
        has_ink[c] = p.upper_profile[c] >= 0;
        up[c] = has_ink[c] ? p.upper_profile[c] : 0.0;
        lp[c] = has_ink[c] ? p.lower_profile[c] : 0.0;
    }
    ProfileSequence out;
    out.vertical_projection = minmax_normalize(vp, all);
    out.crossings = minmax_normalize(cr, all);
    out.upper_profile = minmax_normalize(up, has_ink);
    out.lower_profile = minmax_normalize(lp, has_ink);
    return out;
}

}  // namespace zspot
