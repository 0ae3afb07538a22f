#ifndef ZSPOT_RASTER_HPP
#define ZSPOT_RASTER_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zspot/common.hpp"

namespace zspot {

enum class PixelDepth { Gray8, Binary };

// Row-major pixel grid. Binary images hold {0,1} with 1 = ink (foreground);
// gray images hold 0..255.
struct RasterImage {
    int width = 0;
    int height = 0;
    PixelDepth depth = PixelDepth::Binary;
    std::vector<std::uint8_t> pixels;

    RasterImage() = default;
    RasterImage(int w, int h, PixelDepth d, std::uint8_t fill = 0)
        : width(w), height(h), depth(d),
          pixels(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t at(int r, int c) const {
        return pixels[static_cast<std::size_t>(r) * width + c];
    }
    void set(int r, int c, std::uint8_t v) {
        pixels[static_cast<std::size_t>(r) * width + c] = v;
    }
    bool in_bounds(int r, int c) const {
        return r >= 0 && r < height && c >= 0 && c < width;
    }
    std::size_t size() const { return pixels.size(); }
    bool is_binary() const { return depth == PixelDepth::Binary; }

    long ink_count() const {
        long n = 0;
        for (std::uint8_t p : pixels) n += (p != 0);
        return n;
    }
};

struct SkewEstimate {
    double delta_deg = 0.0;  // slope of the fitted bottom-point baseline
    int support = 0;         // number of regression points
};

struct Reservoir {
    std::vector<std::pair<int, int>> pixel_set;  // (row,col), row-major order
    int height_rows = 0;
    int top = 0, left = 0, bottom = 0, right = 0;
};

struct ProfileSet {
    std::vector<int> vertical_projection;    // per column
    std::vector<int> horizontal_projection;  // per row
    std::vector<int> upper_profile;          // topmost ink row, -1 if empty
    std::vector<int> lower_profile;          // bottommost ink row, -1 if empty
    std::vector<int> crossings;              // background->ink transitions
};

// Otsu global threshold; ties toward the lowest threshold, dark pixels
// become ink. A constant image maps to all background.
RasterImage binarize(const RasterImage& gray);

// Least-squares fit of (column, bottommost ink row); delta in degrees.
// Throws InsufficientInkError with fewer than 2 ink columns.
SkewEstimate estimate_skew(const RasterImage& img);

// Rotation by angle_deg in (col,row) coordinates about the image center;
// nearest-neighbor, canvas grown to cover the rotated corners.
RasterImage rotate(const RasterImage& img, double angle_deg);

// Rotation by -delta. delta == 0 returns an exact copy.
RasterImage deskew(const RasterImage& img, double delta_deg);

// Horizontal shear about the center row; canvas grows to fit.
RasterImage shear(const RasterImage& img, double angle_deg);

// Shear-search slant correction over [-45,45] degrees in 1-degree steps,
// maximizing vertical-projection variance on a common canvas width.
RasterImage deslant(const RasterImage& img);
int deslant_angle(const RasterImage& img);

// Production core behind bottom_reservoirs: packed bit rows (64 px/word,
// bit c of word c/64; LSB = leftmost). Marks trapped background pixels.
// ink and trapped_out are height*words_per_row arrays.
void trapped_rows(const std::uint64_t* ink, int width, int height,
                  int words_per_row, std::uint64_t* trapped_out);

// Trapped-background mask of the whole image (same dimensions, 1 = trapped).
RasterImage trapped_background_mask(const RasterImage& img);

// 4-connected trapped regions, ordered by first pixel in row-major scan;
// regions shorter than 2 rows are dropped.
std::vector<Reservoir> bottom_reservoirs(const RasterImage& img);

// Fill horizontal background runs strictly shorter than t that are bounded
// by ink on both sides. Border-touching runs are untouched.
RasterImage rlsa_horizontal(const RasterImage& img, int t);

ProfileSet profiles(const RasterImage& img);

// Nearest-neighbor resize.
RasterImage rescale(const RasterImage& img, int new_width, int new_height);

// Aspect-preserving nearest-neighbor rescale to a target height.
RasterImage rescale_to_height(const RasterImage& img, int new_height);

// PGM (P5, maxval 255) for gray, PBM (P4, 1 = black = ink) for binary.
RasterImage load_pnm(const std::string& path);
void save_pnm(const RasterImage& img, const std::string& path);
std::string encode_pnm(const RasterImage& img);
RasterImage decode_pnm(const std::string& data);

}  // namespace zspot

#endif
