#include "zspot/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace zspot {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError("write failed: " + path);
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return out;
}

// ---------------------------------------------------------------- binarize

RasterImage binarize(const RasterImage& gray) {
    if (gray.depth != PixelDepth::Gray8)
        throw DimensionError("binarize expects a gray8 image");
    long hist[256] = {0};
    for (std::uint8_t p : gray.pixels) hist[p]++;
    const double total = static_cast<double>(gray.size());

    double sum_all = 0;
    for (int v = 0; v < 256; ++v) sum_all += static_cast<double>(v) * hist[v];

    // between-class variance sweep; class0 = {v <= t} becomes ink
    int best_t = 0;
    double best_var = -1.0;
    double w0 = 0, sum0 = 0;
    for (int t = 0; t < 256; ++t) {
        w0 += hist[t];
        sum0 += static_cast<double>(t) * hist[t];
        double w1 = total - w0;
        if (w0 == 0 || w1 == 0) {
            if (best_var < 0.0) { best_var = 0.0; best_t = t; }
            continue;
        }
        double mu0 = sum0 / w0;
        double mu1 = (sum_all - sum0) / w1;
        double var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
        if (var > best_var) {
            best_var = var;
            best_t = t;
        }
    }

    RasterImage out(gray.width, gray.height, PixelDepth::Binary);
    if (best_var <= 0.0) return out;  // constant image: all background
    for (std::size_t i = 0; i < gray.size(); ++i)
        out.pixels[i] = gray.pixels[i] <= best_t ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------- skew

SkewEstimate estimate_skew(const RasterImage& img) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int c = 0; c < img.width; ++c) {
        int bottom = -1;
        for (int r = img.height - 1; r >= 0; --r)
            if (img.at(r, c)) { bottom = r; break; }
        if (bottom < 0) continue;
        double x = c, y = bottom;
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++n;
    }
    if (n < 2) throw InsufficientInkError("estimate_skew: fewer than 2 ink columns");
    double denom = n * sxx - sx * sx;
    double slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    SkewEstimate est;
    est.delta_deg = std::atan(slope) * 180.0 / M_PI;
    est.delta_deg = std::clamp(est.delta_deg, -45.0, 45.0);
    est.support = n;
    return est;
}

RasterImage rotate(const RasterImage& img, double angle_deg) {
    if (angle_deg == 0.0) return img;
    const double a = angle_deg * M_PI / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;

    // forward-rotate corners to size the canvas
    double min_x = 1e30, max_x = -1e30, min_y = 1e30, max_y = -1e30;
    const double corners[4][2] = {
        {0, 0},
        {static_cast<double>(img.width - 1), 0},
        {0, static_cast<double>(img.height - 1)},
        {static_cast<double>(img.width - 1), static_cast<double>(img.height - 1)}};
    for (auto& p : corners) {
        double dx = p[0] - cx, dy = p[1] - cy;
        double x = ca * dx - sa * dy;
        double y = sa * dx + ca * dy;
        min_x = std::min(min_x, x); max_x = std::max(max_x, x);
        min_y = std::min(min_y, y); max_y = std::max(max_y, y);
    }
    int out_w = std::max(1, static_cast<int>(std::ceil(max_x - min_x)) + 1);
    int out_h = std::max(1, static_cast<int>(std::ceil(max_y - min_y)) + 1);
    double ocx = (out_w - 1) / 2.0, ocy = (out_h - 1) / 2.0;

    RasterImage out(out_w, out_h, img.depth);
    for (int r = 0; r < out_h; ++r) {
        for (int c = 0; c < out_w; ++c) {
            double dx = c - ocx, dy = r - ocy;
            // inverse map
            double sxf = ca * dx + sa * dy + cx;
            double syf = -sa * dx + ca * dy + cy;
            int sc = static_cast<int>(std::lround(sxf));
            int sr = static_cast<int>(std::lround(syf));
            if (img.in_bounds(sr, sc)) out.set(r, c, img.at(sr, sc));
        }
    }
    return out;
}

RasterImage deskew(const RasterImage& img, double delta_deg) {
    return rotate(img, -delta_deg);
}

// ---------------------------------------------------------------- deslant

RasterImage shear(const RasterImage& img, double angle_deg) {
    if (angle_deg == 0.0) return img;
    const double t = std::tan(angle_deg * M_PI / 180.0);
    const double cy = (img.height - 1) / 2.0;
    double min_off = 0, max_off = 0;
    for (int r = 0; r < img.height; ++r) {
        double off = t * (r - cy);
        min_off = std::min(min_off, off);
        max_off = std::max(max_off, off);
    }
    int pad_left = static_cast<int>(std::ceil(-min_off));
    int out_w = img.width + pad_left + static_cast<int>(std::ceil(max_off));
    RasterImage out(out_w, img.height, img.depth);
    for (int r = 0; r < img.height; ++r) {
        int off = static_cast<int>(std::lround(t * (r - cy))) + pad_left;
        for (int c = 0; c < img.width; ++c)
            if (img.at(r, c)) out.set(r, c + off, img.at(r, c));
    }
    return out;
}

int deslant_angle(const RasterImage& img) {
    if (img.ink_count() == 0) return 0;
    int best_theta = 0;
    double best_score = -1.0;
    for (int theta = -45; theta <= 45; ++theta) {
        RasterImage sh = shear(img, static_cast<double>(theta));
        // On a fixed canvas width the projection mean is constant, so the
        // variance ordering equals the ordering of sum of squared columns.
        double score = 0;
        std::vector<long> proj(sh.width, 0);
        for (int r = 0; r < sh.height; ++r)
            for (int c = 0; c < sh.width; ++c) proj[c] += sh.at(r, c);
        for (long p : proj) score += static_cast<double>(p) * p;
        bool better = score > best_score;
        if (score == best_score) {
            if (std::abs(theta) < std::abs(best_theta) ||
                (std::abs(theta) == std::abs(best_theta) && theta < best_theta))
                better = true;
        }
        if (better) {
            best_score = score;
            best_theta = theta;
        }
    }
    return best_theta;
}

RasterImage deslant(const RasterImage& img) {
    if (img.ink_count() == 0) return img;
    return shear(img, static_cast<double>(deslant_angle(img)));
}

// ---------------------------------------------------------------- reservoirs

// Escape seeded at border background and propagated in the original
// orientation: a pixel escapes when its above, left, or right neighbor has
// escaped (equivalent to down/left/right drainage in the flipped image).
// Rows depend only on the row above, so one top-to-bottom pass with in-row
// run saturation reaches the fixpoint.
void trapped_rows(const std::uint64_t* ink, int width, int height,
                  int words_per_row, std::uint64_t* trapped_out) {
    const int wpr = words_per_row;
    const int last_word = wpr - 1;
    const std::uint64_t tail_mask =
        (width % 64) ? ((std::uint64_t{1} << (width % 64)) - 1) : ~std::uint64_t{0};

    std::vector<std::uint64_t> esc_prev(wpr, 0), esc(wpr, 0), bg(wpr, 0), seed(wpr, 0);
    for (int r = 0; r < height; ++r) {
        const std::uint64_t* ink_row = ink + static_cast<std::size_t>(r) * wpr;
        for (int w = 0; w < wpr; ++w) {
            bg[w] = ~ink_row[w];
            if (w == last_word) bg[w] &= tail_mask;
        }
        if (r == 0 || r == height - 1) {
            for (int w = 0; w < wpr; ++w) esc[w] = bg[w];
        } else {
            for (int w = 0; w < wpr; ++w) seed[w] = esc_prev[w] & bg[w];
            seed[0] |= bg[0] & 1;  // left border column
            seed[last_word] |= bg[last_word] & (std::uint64_t{1} << ((width - 1) % 64));
            // saturate seeds along background runs of this row
            while (true) {
                bool changed = false;
                for (int w = 0; w < wpr; ++w) {
                    std::uint64_t s = seed[w];
                    std::uint64_t grown = s | (s << 1) | (s >> 1);
                    if (w > 0 && (seed[w - 1] >> 63)) grown |= 1;
                    if (w < last_word && (seed[w + 1] & 1)) grown |= std::uint64_t{1} << 63;
                    grown &= bg[w];
                    if (grown != s) {
                        seed[w] = grown;
                        changed = true;
                    }
                }
                if (!changed) break;
            }
            for (int w = 0; w < wpr; ++w) esc[w] = seed[w];
        }
        std::uint64_t* out_row = trapped_out + static_cast<std::size_t>(r) * wpr;
        for (int w = 0; w < wpr; ++w) out_row[w] = bg[w] & ~esc[w];
        std::swap(esc_prev, esc);
    }
}

RasterImage trapped_background_mask(const RasterImage& img) {
    RasterImage mask(img.width, img.height, PixelDepth::Binary);
    if (img.width == 0 || img.height == 0) return mask;
    const int wpr = (img.width + 63) / 64;
    std::vector<std::uint64_t> ink(static_cast<std::size_t>(wpr) * img.height, 0);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            if (img.at(r, c))
                ink[static_cast<std::size_t>(r) * wpr + c / 64] |=
                    std::uint64_t{1} << (c % 64);
    std::vector<std::uint64_t> trapped(ink.size(), 0);
    trapped_rows(ink.data(), img.width, img.height, wpr, trapped.data());
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            if (trapped[static_cast<std::size_t>(r) * wpr + c / 64] >> (c % 64) & 1)
                mask.set(r, c, 1);
    return mask;
}

std::vector<Reservoir> bottom_reservoirs(const RasterImage& img) {
    RasterImage mask = trapped_background_mask(img);
    std::vector<Reservoir> out;
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<std::pair<int, int>> stack;
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            std::size_t idx = static_cast<std::size_t>(r) * mask.width + c;
            if (!mask.pixels[idx] || seen[idx]) continue;
            Reservoir res;
            res.top = res.bottom = r;
            res.left = res.right = c;
            stack.clear();
            stack.emplace_back(r, c);
            seen[idx] = 1;
            while (!stack.empty()) {
                auto [pr, pc] = stack.back();
                stack.pop_back();
                res.pixel_set.emplace_back(pr, pc);
                res.top = std::min(res.top, pr);
                res.bottom = std::max(res.bottom, pr);
                res.left = std::min(res.left, pc);
                res.right = std::max(res.right, pc);
                const int dr[4] = {-1, 1, 0, 0};
                const int dc[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    int nr = pr + dr[k], nc = pc + dc[k];
                    if (!mask.in_bounds(nr, nc)) continue;
                    std::size_t nidx = static_cast<std::size_t>(nr) * mask.width + nc;
                    if (mask.pixels[nidx] && !seen[nidx]) {
                        seen[nidx] = 1;
                        stack.emplace_back(nr, nc);
                    }
                }
            }
            res.height_rows = res.bottom - res.top + 1;
            if (res.height_rows >= 2) {
                std::sort(res.pixel_set.begin(), res.pixel_set.end());
                out.push_back(std::move(res));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- rlsa

RasterImage rlsa_horizontal(const RasterImage& img, int t) {
    RasterImage out = img;
    if (t <= 0) return out;
    for (int r = 0; r < img.height; ++r) {
        int c = 0;
        while (c < img.width) {
            if (img.at(r, c)) { ++c; continue; }
            int run_start = c;
            while (c < img.width && !img.at(r, c)) ++c;
            int run_len = c - run_start;
            bool left_ink = run_start > 0;
            bool right_ink = c < img.width;
            if (left_ink && right_ink && run_len < t)
                for (int f = run_start; f < c; ++f) out.set(r, f, 1);
        }
    }
    return out;
}

// ---------------------------------------------------------------- profiles

ProfileSet profiles(const RasterImage& img) {
    ProfileSet p;
    p.vertical_projection.assign(img.width, 0);
    p.horizontal_projection.assign(img.height, 0);
    p.upper_profile.assign(img.width, -1);
    p.lower_profile.assign(img.width, -1);
    p.crossings.assign(img.width, 0);
    for (int c = 0; c < img.width; ++c) {
        int prev = 0;
        for (int r = 0; r < img.height; ++r) {
            int v = img.at(r, c) ? 1 : 0;
            if (v) {
                p.vertical_projection[c]++;
                p.horizontal_projection[r]++;
                if (p.upper_profile[c] < 0) p.upper_profile[c] = r;
                p.lower_profile[c] = r;
                if (!prev) p.crossings[c]++;
            }
            prev = v;
        }
    }
    return p;
}

// ---------------------------------------------------------------- rescale

RasterImage rescale(const RasterImage& img, int new_width, int new_height) {
    if (img.width == 0 || img.height == 0)
        throw EmptyImageError("rescale of zero-area image");
    if (img.width == new_width && img.height == new_height) return img;
    RasterImage out(new_width, new_height, img.depth);
    for (int r = 0; r < new_height; ++r) {
        int sr = std::min(img.height - 1,
                          static_cast<int>((r + 0.5) * img.height / new_height));
        for (int c = 0; c < new_width; ++c) {
            int sc = std::min(img.width - 1,
                              static_cast<int>((c + 0.5) * img.width / new_width));
            out.set(r, c, img.at(sr, sc));
        }
    }
    return out;
}

RasterImage rescale_to_height(const RasterImage& img, int new_height) {
    if (img.height == new_height) return img;
    if (img.width == 0 || img.height == 0)
        throw EmptyImageError("rescale of zero-area image");
    int new_width = std::max(
        1, static_cast<int>(std::lround(static_cast<double>(img.width) * new_height /
                                        img.height)));
    return rescale(img, new_width, new_height);
}

// ---------------------------------------------------------------- pnm io

std::string encode_pnm(const RasterImage& img) {
    std::string out;
    if (img.depth == PixelDepth::Gray8) {
        out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
              "\n255\n";
        out.append(reinterpret_cast<const char*>(img.pixels.data()), img.size());
    } else {
        out = "P4\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
              "\n";
        int row_bytes = (img.width + 7) / 8;
        std::string row(static_cast<std::size_t>(row_bytes), '\0');
        for (int r = 0; r < img.height; ++r) {
            std::fill(row.begin(), row.end(), '\0');
            for (int c = 0; c < img.width; ++c)
                if (img.at(r, c))
                    row[c / 8] = static_cast<char>(
                        static_cast<unsigned char>(row[c / 8]) | (0x80u >> (c % 8)));
            out.append(row);
        }
    }
    return out;
}

namespace {

int pnm_token(const std::string& d, std::size_t& pos) {
    while (pos < d.size()) {
        if (d[pos] == '#') {
            while (pos < d.size() && d[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(d[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= d.size()) throw DataError("pnm: truncated header");
    int v = 0;
    bool any = false;
    while (pos < d.size() && std::isdigit(static_cast<unsigned char>(d[pos]))) {
        v = v * 10 + (d[pos] - '0');
        ++pos;
        any = true;
    }
    if (!any) throw DataError("pnm: malformed header");
    return v;
}

}  // namespace

RasterImage decode_pnm(const std::string& data) {
    if (data.size() < 2 || data[0] != 'P') throw DataError("pnm: bad magic");
    char kind = data[1];
    std::size_t pos = 2;
    int w = pnm_token(data, pos);
    int h = pnm_token(data, pos);
    if (kind == '5') {
        int maxval = pnm_token(data, pos);
        if (maxval != 255) throw DataError("pnm: only maxval 255 supported");
        ++pos;  // single whitespace after header
        RasterImage img(w, h, PixelDepth::Gray8);
        if (pos + img.size() > data.size()) throw DataError("pnm: truncated pixels");
        std::memcpy(img.pixels.data(), data.data() + pos, img.size());
        return img;
    }
    if (kind == '4') {
        ++pos;
        RasterImage img(w, h, PixelDepth::Binary);
        int row_bytes = (w + 7) / 8;
        if (pos + static_cast<std::size_t>(row_bytes) * h > data.size())
            throw DataError("pnm: truncated pixels");
        for (int r = 0; r < h; ++r) {
            const unsigned char* row =
                reinterpret_cast<const unsigned char*>(data.data() + pos +
                                                       static_cast<std::size_t>(r) * row_bytes);
            for (int c = 0; c < w; ++c)
                if (row[c / 8] & (0x80u >> (c % 8))) img.set(r, c, 1);
        }
        return img;
    }
    throw DataError("pnm: unsupported format P" + std::string(1, kind));
}

RasterImage load_pnm(const std::string& path) { return decode_pnm(read_file(path)); }

void save_pnm(const RasterImage& img, const std::string& path) {
    write_file(path, encode_pnm(img));
}

}  // namespace zspot
