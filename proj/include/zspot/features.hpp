#ifndef ZSPOT_FEATURES_HPP
#define ZSPOT_FEATURES_HPP

#include <array>
#include <span>
#include <string>
#include <vector>

#include "zspot/raster.hpp"

namespace zspot {

struct WindowSpec {
    int win_height = 40;
    int win_width = 6;
    int step = 3;  // 50% overlap at the defaults
};

struct PhogParams {
    int levels = 2;  // max pyramid level N
    int bins = 8;    // orientation bins L

    int dim() const {
        int cells = 0, g = 1;
        for (int i = 0; i <= levels; ++i) {
            cells += g * g;
            g *= 2;
        }
        return bins * cells;
    }
};

enum class Provenance { Foreground, Background, Concatenated };

struct FeatureSequence {
    int dim = 0;
    Provenance provenance = Provenance::Foreground;
    std::vector<double> data;  // frames * dim, row-major

    int frames() const { return dim ? static_cast<int>(data.size()) / dim : 0; }
    std::span<const double> frame(int i) const {
        return {data.data() + static_cast<std::size_t>(i) * dim,
                static_cast<std::size_t>(dim)};
    }
    void push_frame(std::span<const double> f) {
        data.insert(data.end(), f.begin(), f.end());
    }

    std::string encode() const;                      // "ZSFT" format
    static FeatureSequence decode(const std::string& bytes);
    void save(const std::string& path) const;
    static FeatureSequence load(const std::string& path);
};

enum class FeatureMode { Fg, Bg, FgBg };

// Rescales the line to win_height (aspect-preserving) and cuts windows at
// x = 0, step, 2*step, ... A line narrower than the window yields one
// right-padded window. Throws EmptyImageError on a zero-area image.
std::vector<RasterImage> frame_windows(const RasterImage& img, const WindowSpec& spec);

// PHOG over Sobel orientations in [0,360), magnitude-weighted, per-level
// L1 normalization. All-background windows give exact zero vectors.
std::vector<double> phog(const RasterImage& window, const PhogParams& p);

// Local gradient histogram: fixed 4x4 grid, 8 bins, per-cell L1. Length 128.
std::vector<double> lgh(const RasterImage& window);

// Binary image whose ink is the union of bottom-reservoir pixel sets.
RasterImage background_mask(const RasterImage& img);

// Per-window PHOG of ink (fg), of the reservoir mask (bg), or both
// concatenated. An explicit mask overrides the internally computed one
// (used for middle-zone spotting where reservoirs come from the full line).
FeatureSequence extract_line_features(const RasterImage& img, const WindowSpec& spec,
                                      const PhogParams& p, FeatureMode mode);
FeatureSequence extract_line_features(const RasterImage& img, const RasterImage& bg_mask,
                                      const WindowSpec& spec, const PhogParams& p,
                                      FeatureMode mode);

// The four DTW word profiles, each min-max normalized to [0,1]; empty
// columns carry 0 after normalization.
struct ProfileSequence {
    std::vector<double> vertical_projection;
    std::vector<double> upper_profile;
    std::vector<double> lower_profile;
    std::vector<double> crossings;

    int length() const { return static_cast<int>(vertical_projection.size()); }
    std::array<double, 4> frame(int i) const {
        return {vertical_projection[i], upper_profile[i], lower_profile[i],
                crossings[i]};
    }
};

ProfileSequence dtw_profile_features(const RasterImage& word_img);

}  // namespace zspot

#endif
