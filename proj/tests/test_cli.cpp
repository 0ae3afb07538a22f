#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "support/oracles.hpp"
#include "support/testutil.hpp"
#include "zspot/pipeline.hpp"

using namespace zspot;
using namespace ztest;

namespace {

std::string scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "zspot_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

SynthConfig tiny_config() {
    SynthConfig cfg;
    cfg.train_lines = 8;
    cfg.test_lines = 6;
    cfg.keyword_count = 3;
    cfg.words_per_line_min = 2;
    cfg.words_per_line_max = 3;
    cfg.seed = 7;
    return cfg;
}

std::string read_dir_bytes(const std::string& root) {
    // stable concatenation of every file: path then contents
    std::vector<std::string> files;
    for (auto& entry : std::filesystem::recursive_directory_iterator(root))
        if (entry.is_regular_file()) files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) {
        all += f.substr(root.size());
        all += read_file(f);
    }
    return all;
}

}  // namespace

TEST_CASE("config: parse, comments, overrides, errors") {
    KeyValueConfig c = parse_config("# corpus\nseed = 9\n\nalphabet_size=12\nseed=10\n");
    CHECK(c.get_int("seed", 0) == 10);  // later keys win
    CHECK(c.get_int("alphabet_size", 0) == 12);
    CHECK(c.get_int("missing", 5) == 5);
    CHECK_THROWS_AS(parse_config("novalue\n"), DataError);
    CHECK_THROWS_AS(parse_config("x=y\n").get_int("x", 0), DataError);

    KeyValueConfig round = parse_config(encode_config(c));
    CHECK(round.get_int("seed", 0) == 10);
}

TEST_CASE("manifest: round-trip, duplicates, resolution") {
    std::string text = "l1\tlines/a.pbm\tab cd\tzones_gt/l1.txt\nl2\tlines/b.pbm\txy\n";
    Manifest m = parse_manifest(text, "/data/corpus");
    REQUIRE(m.records.size() == 2);
    CHECK(m.records[0].zones_path == "zones_gt/l1.txt");
    CHECK(m.records[1].zones_path.empty());
    CHECK(m.resolve(m.records[0].image_path) == "/data/corpus/lines/a.pbm");
    CHECK(encode_manifest(m) == text);
    CHECK(m.find("l2") != nullptr);
    CHECK(m.find("nope") == nullptr);

    CHECK_THROWS_AS(parse_manifest("l1\ta\tb\nl1\tc\td\n", "."), DataError);
    CHECK_THROWS_AS(parse_manifest("l1\tonly_two\n", "."), DataError);
}

TEST_CASE("synth: same seed twice gives byte-identical corpora") {
    SynthConfig cfg = tiny_config();
    std::string d1 = scratch_dir("synth_a");
    std::string d2 = scratch_dir("synth_b");
    generate_corpus(cfg, d1);
    generate_corpus(cfg, d2);
    CHECK(read_dir_bytes(d1) == read_dir_bytes(d2));

    SynthConfig other = cfg;
    other.seed = 8;
    std::string d3 = scratch_dir("synth_c");
    generate_corpus(other, d3);
    CHECK(read_dir_bytes(d1) != read_dir_bytes(d3));
}

TEST_CASE("synth: manifest sizes, zone truth, rules, queries") {
    SynthConfig cfg = tiny_config();
    std::string dir = scratch_dir("synth_shape");
    SynthPaths p = generate_corpus(cfg, dir);

    Manifest train = load_manifest(p.train_manifest);
    Manifest test = load_manifest(p.test_manifest);
    CHECK(train.records.size() == 8);
    CHECK(test.records.size() == 6);

    // every line parses, has zone truth, and contains at least one reservoir
    for (const auto& r : train.records) {
        RasterImage img = load_pnm(train.resolve(r.image_path));
        CHECK(img.ink_count() > 0);
        ZoneTruth gt = ZoneTruth::decode(read_file(train.resolve(r.zones_path)));
        CHECK(gt.lower > gt.upper);
        RasterImage trapped = oracle_trapped_mask(img);
        CHECK(trapped.ink_count() > 0);
    }

    // rule table covers the full alphabet against its middle charset
    ZoneRuleTable rules = load_rule_table(p.rules);
    CHECK(rules.size() == 10);
    auto keywords = load_keywords(p.keywords);
    CHECK(keywords.size() == 3);
    for (const auto& k : keywords) {
        KeywordQuery q = map_keyword(k, rules);
        CHECK_FALSE(q.middle_transcription.empty());
    }

    // word crops and queries exist with labels
    std::string words = read_file(p.words_manifest);
    CHECK(std::count(words.begin(), words.end(), '\n') >= 12);
    std::string queries = read_file(p.queries_manifest);
    CHECK(std::count(queries.begin(), queries.end(), '\n') == 3);
}

TEST_CASE("synth: ground truth marks match the rule table counts") {
    SynthConfig cfg = tiny_config();
    std::string dir = scratch_dir("synth_marks");
    SynthPaths p = generate_corpus(cfg, dir);
    ZoneRuleTable rules = load_rule_table(p.rules);
    int upper_rules = 0, lower_rules = 0;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        upper_rules += rules.rules[i].upper_marks;
        lower_rules += rules.rules[i].lower_marks;
    }
    CHECK(upper_rules == cfg.upper_marked);
    CHECK(lower_rules == cfg.lower_marked);
}

TEST_CASE("pipeline: transcription symbols and ground truth") {
    auto symbols = transcription_symbols("ab c");
    CHECK(symbols == std::vector<std::string>{"a", "b", " ", "c"});

    Manifest m = parse_manifest("l1\ta.pbm\tfoo bar\nl2\tb.pbm\tbaz\n", ".");
    GroundTruth gt = ground_truth_from(m, {"foo", "baz", "nope"});
    CHECK(gt.relevant("foo", "l1"));
    CHECK_FALSE(gt.relevant("foo", "l2"));
    CHECK(gt.relevant("baz", "l2"));
    CHECK(gt.relevant_count("nope") == 0);
}

TEST_CASE("pipeline: tiny end-to-end spot and evaluate") {
    SynthConfig cfg = tiny_config();
    cfg.train_lines = 20;
    cfg.test_lines = 8;
    cfg.salt_pepper = 0.0;
    cfg.skew_jitter_deg = 0.0;
    std::string dir = scratch_dir("pipeline_tiny");
    SynthPaths p = generate_corpus(cfg, dir);

    TrainCharsOptions tc;
    tc.manifest_path = p.train_manifest;
    tc.model_out = join_path(dir, "chars.zshm");
    tc.log_out = join_path(dir, "train_log.csv");
    tc.features = FeatureMode::Fg;
    tc.states = 6;
    tc.gaussians = 2;  // desk-scale for the unit suite
    tc.iters_per_level = 2;
    TrainStats stats = cmd_train_chars(tc);
    CHECK(stats.log.size() == 4);
    // monotone within fixed-G spans
    for (std::size_t i = 1; i < stats.log.size(); ++i)
        if (stats.log[i].gaussians == stats.log[i - 1].gaussians)
            CHECK(stats.log[i].loglik >= stats.log[i - 1].loglik - 1e-6);
    CHECK(std::filesystem::exists(tc.log_out));

    // model round-trips byte-identically
    ModelSet models = ModelSet::load(tc.model_out);
    CHECK(models.encode() == read_file(tc.model_out));

    SpotOptions sp;
    sp.manifest_path = p.test_manifest;
    sp.model_path = tc.model_out;
    sp.keywords_path = p.keywords;
    sp.out_path = join_path(dir, "hits.tsv");
    sp.features = FeatureMode::Fg;
    SpotResult res = cmd_spot(sp);
    CHECK(res.skipped_keywords.empty());
    CHECK_FALSE(res.hits.empty());

    EvaluateOptions eo;
    eo.hits_path = sp.out_path;
    eo.manifest_path = p.test_manifest;
    eo.report_out = join_path(dir, "report.tsv");
    eo.curve_out = join_path(dir, "curve.csv");
    eo.svg_out = join_path(dir, "curve.svg");
    EvalReport report = cmd_evaluate(eo);
    CHECK(report.map >= 0.0);
    CHECK(report.map <= 1.0);
    CHECK(report_map(read_file(eo.report_out)) == doctest::Approx(report.map));
    auto curve = decode_curve_csv(read_file(eo.curve_out));
    CHECK(curve.size() == report.curve.size());
    CHECK(read_file(eo.svg_out).find("viewBox") != std::string::npos);

    // determinism: spotting twice gives byte-identical hits
    SpotOptions sp2 = sp;
    sp2.out_path = join_path(dir, "hits2.tsv");
    cmd_spot(sp2);
    CHECK(read_file(sp.out_path) == read_file(sp2.out_path));

    // an out-of-vocabulary keyword is skipped, the run succeeds
    std::string kw2 = join_path(dir, "keywords_oov.txt");
    write_file(kw2, read_file(p.keywords) + "zzzz\n");
    SpotOptions sp3 = sp;
    sp3.keywords_path = kw2;
    sp3.out_path = join_path(dir, "hits3.tsv");
    SpotResult r3 = cmd_spot(sp3);
    REQUIRE(r3.skipped_keywords.size() == 1);
    CHECK(r3.skipped_keywords[0] == "zzzz");
}

TEST_CASE("pipeline: evaluate rejects mismatched line ids") {
    std::string dir = scratch_dir("eval_mismatch");
    write_file(join_path(dir, "hits.tsv"), "kw\tghost\t0\t2\t0\t6\t1.5\t1\n");
    RasterImage img(10, 10, PixelDepth::Binary);
    img.set(5, 5, 1);
    save_pnm(img, join_path(dir, "l1.pbm"));
    write_file(join_path(dir, "manifest.tsv"), "l1\tl1.pbm\tkw\n");
    EvaluateOptions eo;
    eo.hits_path = join_path(dir, "hits.tsv");
    eo.manifest_path = join_path(dir, "manifest.tsv");
    eo.report_out = join_path(dir, "report.tsv");
    CHECK_THROWS_AS(cmd_evaluate(eo), DataError);
}

TEST_CASE("pipeline: zone training and segmentation on the tiny corpus") {
    SynthConfig cfg = tiny_config();
    cfg.train_lines = 10;
    cfg.test_lines = 4;
    cfg.salt_pepper = 0.0;
    std::string dir = scratch_dir("pipeline_zones");
    SynthPaths p = generate_corpus(cfg, dir);

    TrainZonesOptions tz;
    tz.manifest_path = p.train_manifest;
    tz.model_out = join_path(dir, "zones.zshm");
    tz.states = 2;
    tz.gaussians = 2;
    tz.iters_per_level = 2;
    tz.v_step = 2;
    cmd_train_zones(tz);

    SegmentZonesOptions sz;
    sz.manifest_path = p.test_manifest;
    sz.model_path = tz.model_out;
    sz.out_dir = join_path(dir, "zones_pred");
    sz.v_step = 2;
    cmd_segment_zones(sz);

    Manifest test = load_manifest(p.test_manifest);
    for (const auto& r : test.records) {
        ZoneBoundaries zb =
            ZoneBoundaries::load(join_path(sz.out_dir, r.line_id + ".zones.tsv"));
        ZoneTruth gt = ZoneTruth::decode(read_file(test.resolve(r.zones_path)));
        RasterImage img = load_pnm(test.resolve(r.image_path));
        REQUIRE(static_cast<int>(zb.upper.size()) >= img.width);
        double err = 0;
        for (int c = 0; c < img.width; ++c) {
            CHECK(zb.upper[c] <= zb.lower[c]);
            err += std::abs(zb.upper[c] - gt.upper_at(c)) +
                   std::abs(zb.lower[c] - gt.lower_at(c));
        }
        CHECK(err / (2 * img.width) <= 4.0);  // desk-scale sanity; acceptance pins 2px
    }

    // projection baselines also produce valid boundary files
    SegmentZonesOptions szb = sz;
    szb.method = ZoneMethod::ProjectionGlobal;
    szb.out_dir = join_path(dir, "zones_global");
    cmd_segment_zones(szb);
    for (const auto& r : test.records) {
        ZoneBoundaries zb =
            ZoneBoundaries::load(join_path(szb.out_dir, r.line_id + ".zones.tsv"));
        for (std::size_t c = 0; c < zb.upper.size(); ++c)
            CHECK(zb.upper[c] <= zb.lower[c]);
    }
}

TEST_CASE("pipeline: dtw baseline runs and ranks its own words first") {
    SynthConfig cfg = tiny_config();
    cfg.test_lines = 6;
    cfg.salt_pepper = 0.0;
    std::string dir = scratch_dir("pipeline_dtw");
    SynthPaths p = generate_corpus(cfg, dir);

    DtwBaselineOptions d;
    d.words_manifest = p.words_manifest;
    d.queries_manifest = p.queries_manifest;
    d.report_out = join_path(dir, "dtw_report.tsv");
    d.rank_out = join_path(dir, "dtw_rank.tsv");
    EvalReport report = cmd_dtw_baseline(d);
    CHECK(report.map >= 0.0);
    CHECK(report.map <= 1.0);
    CHECK(std::filesystem::exists(d.report_out));
    CHECK(std::filesystem::exists(d.rank_out));
}
