#ifndef ZSPOT_ZONES_HPP
#define ZSPOT_ZONES_HPP

#include <string>
#include <vector>

#include "zspot/seqmodel.hpp"

namespace zspot {

struct ZoneParams {
    int line_height = 0;   // H_L
    double alpha = 1.5;    // strip width factor
    int patch_width = 40;  // canonical patch the sub-window is rescaled to
    int patch_height = 8;  // H_P
    int v_step = 4;        // 50% vertical overlap at the default

    int strip_width() const {
        int w = static_cast<int>(std::max(1.0, alpha * line_height + 0.5));
        return w;
    }
};

struct LineHeight {
    int rows = 0;
    bool fallback = false;  // set when no reservoirs were available
};

// Mode of bottom-reservoir heights (ties toward the larger height), clamped
// to [4, image height]. Falls back to the longest ink-row run.
LineHeight estimate_line_height(const RasterImage& img);

enum class ZonePatchLabel { Upper, Middle, Lower, Space };
const char* zone_label_name(ZonePatchLabel label);

// Vertical patch features per strip: strips of width alpha*H_L left to
// right (last one right-padded), sub-windows of patch_height sliding
// top-to-bottom by v_step, each rescaled to patch_width x patch_height and
// PHOG-encoded.
struct ZoneStrips {
    std::vector<FeatureSequence> features;       // one vertical sequence per strip
    std::vector<std::pair<int, int>> x_range;    // inclusive column range per strip
    int patches_per_strip = 0;
};

ZoneStrips zone_patch_sequence(const RasterImage& img, const ZoneParams& zp,
                               const PhogParams& phog = {});

// Four zone models (Upper, Middle, Lower, Space) trained by embedded
// Baum-Welch over run-length-collapsed vertical label sequences. The Space
// zone model carries the shared space label.
struct LabelledStrip {
    const FeatureSequence* features = nullptr;
    std::vector<ZonePatchLabel> labels;
};

ModelSet train_zone_models(const std::vector<LabelledStrip>& strips, int states = 8,
                           int gaussians = 32, int iters_per_level = 3,
                           unsigned threads = 0, TrainStats* stats = nullptr);

// Index into the zone ModelSet of the best single-patch label.
int classify_patch(const ModelSet& zone_models, std::span<const double> patch);
ZonePatchLabel model_zone_label(const ModelSet& zone_models, int model_index);

// Space? Upper? Middle Lower? Space? with Middle mandatory.
SpottingNetwork build_zone_network(const ModelSet& zone_models);

struct StripRows {
    int upper = 0, lower = 0;
    bool has_ink = true;  // blank strips carry no evidence and get interpolated
};

// Constrained per-strip alignment; Middle segment endpoints measured at
// patch centers, absent Upper/Lower falls back to the strip's ink extremes.
std::vector<StripRows> align_zones(const RasterImage& img, const ModelSet& zone_models,
                                   const ZoneParams& zp, const PhogParams& phog = {});

struct ZoneBoundaries {
    struct Strip {
        int x_start = 0, x_end = 0;  // inclusive
        int upper_row = 0, lower_row = 0;
    };
    std::vector<Strip> strips;
    std::vector<int> upper, lower;  // per-column polylines

    std::string encode() const;
    static ZoneBoundaries decode(const std::string& text);
    void save(const std::string& path) const;
    static ZoneBoundaries load(const std::string& path);
};

// Guarded context repair (neighbor-mean replacement beyond H_L/4), then
// strip midpoints joined by linear interpolation; upper <= lower enforced.
ZoneBoundaries smooth_boundaries(const std::vector<StripRows>& rows,
                                 const std::vector<std::pair<int, int>>& x_range,
                                 int line_height, int width, int height);

// Full per-line HMM segmentation: H_L estimate, strips, alignment, smoothing.
ZoneBoundaries segment_line_zones(const RasterImage& img, const ModelSet& zone_models,
                                  double alpha = 1.5, int v_step = 4,
                                  const PhogParams& phog = {});

// Matra = horizontal-projection argmax; lower cut where the projection
// falls below 20% of the middle-zone mean. Local mode repeats per strip of
// width line_width/10.
ZoneBoundaries projection_zone_baseline(const RasterImage& img, bool local);

struct ZoneImages {
    RasterImage middle;         // rows in [upper, lower]
    RasterImage reservoir_mid;  // full-line reservoirs clipped to the band
    RasterImage upper;          // Z_u: rows above upper
    RasterImage lower;          // Z_l: rows below lower
};

ZoneImages extract_middle_zone(const RasterImage& img, const ZoneBoundaries& zb);

}  // namespace zspot

#endif
