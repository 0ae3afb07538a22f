#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "support/testutil.hpp"
#include "zspot/features.hpp"

using namespace zspot;
using namespace ztest;

namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

TEST_CASE("frame_windows: counts and positions") {
    WindowSpec spec;  // 40x6 step 3
    RasterImage img(12, 40, PixelDepth::Binary);
    CHECK(frame_windows(img, spec).size() == 3);  // x = 0, 3, 6

    RasterImage exact(6, 40, PixelDepth::Binary);
    CHECK(frame_windows(exact, spec).size() == 1);

    RasterImage narrow(4, 40, PixelDepth::Binary);
    for (int r = 0; r < 40; ++r) narrow.set(r, 3, 1);
    auto w = frame_windows(narrow, spec);
    REQUIRE(w.size() == 1);
    CHECK(w[0].width == 6);
    for (int r = 0; r < 40; ++r) {
        CHECK(w[0].at(r, 3) == 1);
        CHECK(w[0].at(r, 4) == 0);  // right padding is background
        CHECK(w[0].at(r, 5) == 0);
    }
}

TEST_CASE("frame_windows: zero-area image throws") {
    RasterImage img;
    CHECK_THROWS_AS(frame_windows(img, WindowSpec{}), EmptyImageError);
}

TEST_CASE("frame_windows: rescales input height") {
    WindowSpec spec;
    RasterImage img(24, 80, PixelDepth::Binary);  // halves to 12x40
    CHECK(frame_windows(img, spec).size() == 3);
}

TEST_CASE("phog: default parameters give 168 dims") {
    PhogParams p;
    CHECK(p.dim() == 168);
    RasterImage win(6, 40, PixelDepth::Binary);
    win.set(20, 3, 1);
    CHECK(phog(win, p).size() == 168);
}

TEST_CASE("phog: all-background window is a zero vector") {
    RasterImage win(6, 40, PixelDepth::Binary);
    auto v = phog(win, PhogParams{});
    for (double x : v) CHECK(x == 0.0);
}

TEST_CASE("phog: horizontal step edge concentrates in the 90/270 bins") {
    PhogParams p;
    RasterImage win(8, 8, PixelDepth::Binary);
    for (int r = 4; r < 8; ++r)
        for (int c = 0; c < 8; ++c) win.set(r, c, 1);
    auto v = phog(win, p);
    auto ref = oracle_phog(win, p.levels, p.bins);
    REQUIRE(v.size() == ref.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(v[i] == doctest::Approx(ref[i]).epsilon(1e-9));
    // level 0: bins 2 (90 deg) and 6 (270 deg) hold all the mass
    double mass = v[2] + v[6];
    CHECK(mass == doctest::Approx(1.0));
}

TEST_CASE("phog: random windows match the per-pixel reference") {
    Rng rng(41);
    PhogParams p;
    for (int trial = 0; trial < 50; ++trial) {
        RasterImage win = random_binary(rng, rng.uniform_int(3, 12),
                                        rng.uniform_int(3, 40), 0.4);
        auto v = phog(win, p);
        auto ref = oracle_phog(win, p.levels, p.bins);
        REQUIRE(v.size() == ref.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            CHECK(std::abs(v[i] - ref[i]) <= 1e-9);
    }
}

TEST_CASE("phog: level blocks sum to 1 or are all zero") {
    Rng rng(43);
    PhogParams p;
    for (int trial = 0; trial < 50; ++trial) {
        RasterImage win = random_binary(rng, 6, 40, trial % 7 == 0 ? 0.0 : 0.3);
        auto v = phog(win, p);
        CHECK(all_finite(v));
        int offset = 0, grid = 1;
        for (int level = 0; level <= p.levels; ++level) {
            double sum = 0;
            bool nonneg = true;
            for (int k = 0; k < grid * grid * p.bins; ++k) {
                sum += v[offset + k];
                nonneg = nonneg && v[offset + k] >= 0.0;
            }
            CHECK(nonneg);
            CHECK((std::abs(sum - 1.0) <= 1e-9 || sum == 0.0));
            offset += grid * grid * p.bins;
            grid *= 2;
        }
    }
}

TEST_CASE("lgh: 128 dims, zero on blank, matches reference") {
    RasterImage blank(6, 40, PixelDepth::Binary);
    auto z = lgh(blank);
    REQUIRE(z.size() == 128);
    for (double x : z) CHECK(x == 0.0);

    Rng rng(47);
    for (int trial = 0; trial < 30; ++trial) {
        RasterImage win = random_binary(rng, 8, 16, 0.4);
        auto v = lgh(win);
        auto ref = oracle_lgh(win);
        REQUIRE(v.size() == 128);
        for (std::size_t i = 0; i < v.size(); ++i)
            CHECK(std::abs(v[i] - ref[i]) <= 1e-9);
    }
}

TEST_CASE("background_mask: empty when no reservoirs, cavity for the arch") {
    RasterImage noink(10, 6, PixelDepth::Binary);
    CHECK(background_mask(noink).ink_count() == 0);

    auto arch = img_from_rows({
        "........",
        ".XXXXXX.",
        ".X....X.",
        ".X....X.",
        "........",
    });
    RasterImage mask = background_mask(arch);
    CHECK(same_pixels(mask, oracle_trapped_mask(arch)));
    CHECK(mask.ink_count() == 8);
    for (int r = 0; r < arch.height; ++r)
        for (int c = 0; c < arch.width; ++c)
            CHECK(!(mask.at(r, c) && arch.at(r, c)));  // mask disjoint from ink
}

TEST_CASE("extract_line_features: dims per mode and frame bookkeeping") {
    Rng rng(53);
    RasterImage line = random_binary(rng, 60, 40, 0.3);
    WindowSpec spec;
    PhogParams p;
    auto fg = extract_line_features(line, spec, p, FeatureMode::Fg);
    auto bg = extract_line_features(line, spec, p, FeatureMode::Bg);
    auto both = extract_line_features(line, spec, p, FeatureMode::FgBg);
    CHECK(fg.dim == 168);
    CHECK(bg.dim == 168);
    CHECK(both.dim == 336);
    int expected = static_cast<int>(frame_windows(line, spec).size());
    CHECK(fg.frames() == expected);
    CHECK(both.frames() == expected);
    CHECK(all_finite(both.data));
}

TEST_CASE("extract_line_features: reservoir-free line zeroes the bg half") {
    RasterImage line(60, 40, PixelDepth::Binary);
    for (int c = 0; c < 60; ++c) line.set(20, c, 1);  // a bare rule, no cavities
    auto both = extract_line_features(line, WindowSpec{}, PhogParams{}, FeatureMode::FgBg);
    REQUIRE(both.frames() > 0);
    for (int f = 0; f < both.frames(); ++f) {
        auto fr = both.frame(f);
        for (int d = 168; d < 336; ++d) CHECK(fr[d] == 0.0);
    }
}

TEST_CASE("extract_line_features: padding by one step shifts frames exactly") {
    Rng rng(59);
    WindowSpec spec;
    PhogParams p;
    RasterImage line = random_binary(rng, 45, 40, 0.35);  // native height: no resample
    RasterImage padded(line.width + spec.step, 40, PixelDepth::Binary);
    for (int r = 0; r < 40; ++r)
        for (int c = 0; c < line.width; ++c) padded.set(r, c + spec.step, line.at(r, c));
    auto a = extract_line_features(line, spec, p, FeatureMode::FgBg);
    auto b = extract_line_features(padded, spec, p, FeatureMode::FgBg);
    REQUIRE(b.frames() == a.frames() + 1);
    for (int f = 0; f < a.frames(); ++f) {
        auto fa = a.frame(f);
        auto fb = b.frame(f + 1);
        for (int d = 0; d < a.dim; ++d) CHECK(fa[d] == fb[d]);
    }
}

TEST_CASE("extract_line_features: fuzzed inputs stay finite") {
    Rng rng(61);
    for (int trial = 0; trial < 25; ++trial) {
        RasterImage line = random_binary(rng, rng.uniform_int(3, 70),
                                         rng.uniform_int(5, 60),
                                         rng.uniform(0.0, 0.9));
        auto fs = extract_line_features(line, WindowSpec{}, PhogParams{},
                                        FeatureMode::FgBg);
        CHECK(all_finite(fs.data));
    }
}

TEST_CASE("dtw_profile_features: constant projection normalizes to zero") {
    RasterImage img(5, 6, PixelDepth::Binary);
    for (int c = 0; c < 5; ++c) img.set(2, c, 1);  // every column count 1
    auto prof = dtw_profile_features(img);
    for (double v : prof.vertical_projection) CHECK(v == 0.0);
    CHECK(prof.length() == 5);
}

TEST_CASE("dtw_profile_features: all sequences have length = width") {
    Rng rng(67);
    RasterImage img = random_binary(rng, 23, 9, 0.4);
    if (img.ink_count() == 0) img.set(4, 11, 1);
    auto prof = dtw_profile_features(img);
    CHECK(prof.length() == 23);
    CHECK(prof.upper_profile.size() == 23);
    CHECK(prof.lower_profile.size() == 23);
    CHECK(prof.crossings.size() == 23);
}

TEST_CASE("dtw_profile_features: hand-built 5-column glyph") {
    auto img = img_from_rows({
        "X...X",
        "X.X.X",
        "X.X..",
        "XXX..",
    });
    // per column: vp = 4,1,3,0,2 ; upper = 0,3,1,-,0 ; lower = 3,3,3,-,1
    // crossings = 1,1,1,0,1
    auto prof = dtw_profile_features(img);
    CHECK(prof.vertical_projection[0] == doctest::Approx(1.0));
    CHECK(prof.vertical_projection[1] == doctest::Approx(0.25));
    CHECK(prof.vertical_projection[2] == doctest::Approx(0.75));
    CHECK(prof.vertical_projection[3] == doctest::Approx(0.0));
    CHECK(prof.vertical_projection[4] == doctest::Approx(0.5));
    // upper normalized over ink columns (min 0, max 3)
    CHECK(prof.upper_profile[0] == doctest::Approx(0.0));
    CHECK(prof.upper_profile[1] == doctest::Approx(1.0));
    CHECK(prof.upper_profile[2] == doctest::Approx(1.0 / 3));
    CHECK(prof.upper_profile[3] == doctest::Approx(0.0));  // empty column
    // lower normalized over ink columns (min 1, max 3)
    CHECK(prof.lower_profile[4] == doctest::Approx(0.0));
    CHECK(prof.lower_profile[0] == doctest::Approx(1.0));
    // crossings: min 0 max 1
    CHECK(prof.crossings[0] == doctest::Approx(1.0));
    CHECK(prof.crossings[3] == doctest::Approx(0.0));
}

TEST_CASE("dtw_profile_features: blank image throws EmptyImage") {
    RasterImage img(5, 5, PixelDepth::Binary);
    CHECK_THROWS_AS(dtw_profile_features(img), EmptyImageError);
}

TEST_CASE("feature sequence: ZSFT round-trip is byte-identical") {
    Rng rng(71);
    FeatureSequence fs;
    fs.dim = 7;
    for (int f = 0; f < 5; ++f)
        for (int d = 0; d < 7; ++d) fs.data.push_back(rng.uniform(-3.0, 3.0));
    std::string enc = fs.encode();
    FeatureSequence back = FeatureSequence::decode(enc);
    CHECK(back.dim == fs.dim);
    CHECK(back.data == fs.data);
    CHECK(back.encode() == enc);
}
