// zspot: keyword spotting in handwritten text-line images.
//
// Verbs: synth, train-chars, train-zones, segment-zones, spot, evaluate,
// dtw-baseline. Exit codes: 0 success, 1 usage, 2 data error.

#include <CLI11.hpp>
#include <cstdio>

#include "zspot/pipeline.hpp"

using namespace zspot;

namespace {

FeatureMode parse_features(const std::string& s) {
    if (s == "fg") return FeatureMode::Fg;
    if (s == "bg") return FeatureMode::Bg;
    if (s == "fg+bg") return FeatureMode::FgBg;
    throw DataError("unknown feature mode: " + s + " (want fg, bg, or fg+bg)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zspot: HMM keyword spotting in handwritten text lines"};
    app.require_subcommand(1);

    // ---- synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    std::string synth_out, synth_config_path;
    SynthConfig synth_defaults;
    double salt = synth_defaults.salt_pepper, skew = synth_defaults.skew_jitter_deg;
    std::uint64_t seed = synth_defaults.seed;
    int train_lines = synth_defaults.train_lines, test_lines = synth_defaults.test_lines;
    int kw_count = synth_defaults.keyword_count;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--config", synth_config_path, "key=value config file");
    synth->add_option("--seed", seed, "rng seed");
    synth->add_option("--train-lines", train_lines, "training line count");
    synth->add_option("--test-lines", test_lines, "test line count");
    synth->add_option("--keywords", kw_count, "keyword count");
    synth->add_option("--salt-pepper", salt, "pixel flip rate");
    synth->add_option("--skew-jitter", skew, "per-line shear range, degrees");

    // ---- train-chars
    auto* train = app.add_subcommand("train-chars", "train character models");
    TrainCharsOptions tc;
    std::string tc_features = "fg+bg", tc_mode = "full";
    train->add_option("--manifest", tc.manifest_path, "training manifest")->required();
    train->add_option("--out", tc.model_out, "model file to write")->required();
    train->add_option("--log", tc.log_out, "training log CSV");
    train->add_option("--features", tc_features, "fg | bg | fg+bg");
    train->add_option("--mode", tc_mode, "full | middle");
    train->add_option("--zones", tc.zones_dir, "zone boundary dir (middle mode)");
    train->add_option("--rules", tc.rules_path, "zone rule table (middle mode)");
    train->add_option("--states", tc.states, "states per character");
    train->add_option("--gaussians", tc.gaussians, "mixture target");
    train->add_option("--iters-per-level", tc.iters_per_level, "EM iterations per level");
    train->add_option("--threads", tc.threads, "worker threads (0 = auto)");

    // ---- train-zones
    auto* tz_cmd = app.add_subcommand("train-zones", "train zone models");
    TrainZonesOptions tz;
    tz_cmd->add_option("--manifest", tz.manifest_path, "manifest with zone truth")
        ->required();
    tz_cmd->add_option("--out", tz.model_out, "model file to write")->required();
    tz_cmd->add_option("--log", tz.log_out, "training log CSV");
    tz_cmd->add_option("--states", tz.states, "states per zone model");
    tz_cmd->add_option("--gaussians", tz.gaussians, "mixture target");
    tz_cmd->add_option("--iters-per-level", tz.iters_per_level, "EM iterations per level");
    tz_cmd->add_option("--alpha", tz.alpha, "strip width factor");
    tz_cmd->add_option("--v-step", tz.v_step, "vertical patch step");
    tz_cmd->add_option("--threads", tz.threads, "worker threads");

    // ---- segment-zones
    auto* seg = app.add_subcommand("segment-zones", "write per-line zone boundaries");
    SegmentZonesOptions sz;
    std::string sz_baseline;
    seg->add_option("--manifest", sz.manifest_path, "manifest")->required();
    seg->add_option("--models", sz.model_path, "zone model file");
    seg->add_option("--out", sz.out_dir, "output directory")->required();
    seg->add_option("--baseline", sz_baseline, "global | local projection baseline");
    seg->add_option("--alpha", sz.alpha, "strip width factor");
    seg->add_option("--v-step", sz.v_step, "vertical patch step");
    seg->add_option("--threads", sz.threads, "worker threads");

    // ---- spot
    auto* spot = app.add_subcommand("spot", "score keywords against lines");
    SpotOptions sp;
    std::string sp_features = "fg+bg", sp_mode = "full";
    spot->add_option("--manifest", sp.manifest_path, "manifest")->required();
    spot->add_option("--models", sp.model_path, "character model file")->required();
    spot->add_option("--keywords", sp.keywords_path, "keywords file")->required();
    spot->add_option("--rules", sp.rules_path, "zone rule table");
    spot->add_option("--out", sp.out_path, "hit TSV to write")->required();
    spot->add_option("--mode", sp_mode, "full | middle");
    spot->add_option("--zones", sp.zones_dir, "zone boundary dir");
    spot->add_option("--features", sp_features, "fg | bg | fg+bg");
    spot->add_flag("--rerank", sp.rerank, "modifier-count re-ranking");
    spot->add_option("--theta", sp.theta, "global score threshold");
    spot->add_option("--local-thresholds", sp.local_thresholds_path,
                     "keyword<TAB>theta table");
    spot->add_option("--threads", sp.threads, "worker threads");

    // ---- evaluate
    auto* ev = app.add_subcommand("evaluate", "precision/recall and MAP");
    EvaluateOptions eo;
    ev->add_option("--hits", eo.hits_path, "hit TSV")->required();
    ev->add_option("--manifest", eo.manifest_path, "manifest with transcriptions")
        ->required();
    ev->add_option("--report", eo.report_out, "per-keyword AP TSV")->required();
    ev->add_option("--curve", eo.curve_out, "P-R curve CSV");
    ev->add_option("--svg", eo.svg_out, "P-R curve SVG");

    // ---- dtw-baseline
    auto* dtw = app.add_subcommand("dtw-baseline", "DTW word-matching baseline");
    DtwBaselineOptions dopt;
    dtw->add_option("--words", dopt.words_manifest, "word manifest")->required();
    dtw->add_option("--queries", dopt.queries_manifest, "query manifest")->required();
    dtw->add_option("--report", dopt.report_out, "per-keyword AP TSV")->required();
    dtw->add_option("--rank", dopt.rank_out, "ranked distance TSV");
    dtw->add_option("--band", dopt.band_radius, "Sakoe-Chiba radius (-1 = max len)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            SynthConfig cfg;
            if (!synth_config_path.empty())
                cfg = synth_config_from(load_config(synth_config_path));
            for (CLI::Option* o : {synth->get_option("--seed")})
                (void)o;  // command line overrides the config file
            if (synth->count("--seed")) cfg.seed = seed;
            if (synth->count("--train-lines")) cfg.train_lines = train_lines;
            if (synth->count("--test-lines")) cfg.test_lines = test_lines;
            if (synth->count("--keywords")) cfg.keyword_count = kw_count;
            if (synth->count("--salt-pepper")) cfg.salt_pepper = salt;
            if (synth->count("--skew-jitter")) cfg.skew_jitter_deg = skew;
            SynthPaths p = generate_corpus(cfg, synth_out);
            std::printf("corpus written to %s\n", p.dir.c_str());
        } else if (train->parsed()) {
            tc.features = parse_features(tc_features);
            if (tc_mode == "middle") tc.middle_mode = true;
            else if (tc_mode != "full") throw DataError("unknown mode: " + tc_mode);
            TrainStats stats = cmd_train_chars(tc);
            std::printf("trained %s; final loglik %.6g (%d skipped lines)\n",
                        tc.model_out.c_str(), stats.log.back().loglik,
                        stats.skipped_lines);
        } else if (tz_cmd->parsed()) {
            TrainStats stats = cmd_train_zones(tz);
            std::printf("trained %s; final loglik %.6g\n", tz.model_out.c_str(),
                        stats.log.back().loglik);
        } else if (seg->parsed()) {
            if (sz_baseline.empty()) {
                sz.method = ZoneMethod::Hmm;
                if (sz.model_path.empty())
                    throw DataError("segment-zones: --models required without --baseline");
            } else if (sz_baseline == "global") {
                sz.method = ZoneMethod::ProjectionGlobal;
            } else if (sz_baseline == "local") {
                sz.method = ZoneMethod::ProjectionLocal;
            } else {
                throw DataError("unknown baseline: " + sz_baseline);
            }
            cmd_segment_zones(sz);
            std::printf("boundaries written to %s\n", sz.out_dir.c_str());
        } else if (spot->parsed()) {
            sp.features = parse_features(sp_features);
            if (sp_mode == "middle") sp.middle_mode = true;
            else if (sp_mode != "full") throw DataError("unknown mode: " + sp_mode);
            SpotResult r = cmd_spot(sp);
            for (const auto& k : r.skipped_keywords)
                std::fprintf(stderr, "skipped out-of-vocabulary keyword: %s\n", k.c_str());
            std::printf("%zu hits written to %s\n", r.hits.size(), sp.out_path.c_str());
        } else if (ev->parsed()) {
            EvalReport report = cmd_evaluate(eo);
            std::printf("MAP %.6f over %zu keywords (%d excluded)\n", report.map,
                        report.per_keyword.size(), report.keywords_excluded);
        } else if (dtw->parsed()) {
            EvalReport report = cmd_dtw_baseline(dopt);
            std::printf("DTW baseline MAP %.6f\n", report.map);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
