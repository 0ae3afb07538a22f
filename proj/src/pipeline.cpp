#include "zspot/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace zspot {

namespace {

std::vector<RasterImage> load_line_images(const Manifest& m) {
    std::vector<RasterImage> out(m.records.size());
    parallel_chunks(m.records.size(), 0, [&](unsigned, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            out[i] = load_pnm(m.resolve(m.records[i].image_path));
    });
    return out;
}

// middle-zone image pair (ink, clipped reservoirs) cropped to the band rows
std::pair<RasterImage, RasterImage> middle_images(const RasterImage& line,
                                                  const ZoneBoundaries& zb) {
    ZoneImages z = extract_middle_zone(line, zb);
    int top = line.height, bottom = -1;
    for (int c = 0; c < line.width; ++c) {
        top = std::min(top, zb.upper[c]);
        bottom = std::max(bottom, zb.lower[c]);
    }
    top = std::clamp(top, 0, line.height - 1);
    bottom = std::clamp(bottom, top, line.height - 1);
    int h = bottom - top + 1;
    RasterImage ink(line.width, h, PixelDepth::Binary);
    RasterImage bg(line.width, h, PixelDepth::Binary);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < line.width; ++c) {
            ink.set(r, c, z.middle.at(top + r, c));
            bg.set(r, c, z.reservoir_mid.at(top + r, c));
        }
    return {std::move(ink), std::move(bg)};
}

ZoneBoundaries load_line_zones(const std::string& zones_dir, const std::string& line_id) {
    return ZoneBoundaries::load(join_path(zones_dir, line_id + ".zones.tsv"));
}

FeatureSequence line_features(const RasterImage& line, FeatureMode mode,
                              const ZoneBoundaries* zb, const WindowSpec& spec,
                              const PhogParams& phog) {
    if (!zb) return extract_line_features(line, spec, phog, mode);
    auto [ink, bg] = middle_images(line, *zb);
    return extract_line_features(ink, bg, spec, phog, mode);
}

void write_train_log(const std::string& path, const TrainStats& stats) {
    if (path.empty()) return;
    std::string csv = "iteration,gaussians,loglik,skipped\n";
    for (const auto& it : stats.log)
        csv += std::to_string(it.iteration) + "," + std::to_string(it.gaussians) + "," +
               fmt_double(it.loglik) + "," + std::to_string(it.skipped) + "\n";
    write_file(path, csv);
}

}  // namespace

std::vector<std::string> transcription_symbols(const std::string& transcription) {
    return split_graphemes(transcription);
}

std::vector<std::string> load_keywords(const std::string& path) {
    std::vector<std::string> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] != '#') out.push_back(line);
    }
    if (out.empty()) throw DataError("keywords file is empty: " + path);
    return out;
}

GroundTruth ground_truth_from(const Manifest& manifest,
                              const std::vector<std::string>& keywords) {
    std::set<std::string> kw(keywords.begin(), keywords.end());
    GroundTruth gt;
    for (const auto& r : manifest.records) {
        std::set<std::string> present;
        std::istringstream in(r.transcription);
        std::string word;
        while (in >> word)
            if (kw.count(word)) present.insert(word);
        gt.keywords_by_line[r.line_id] = std::move(present);
    }
    return gt;
}

// ---------------------------------------------------------------- training

TrainStats cmd_train_chars(const TrainCharsOptions& opt) {
    Manifest manifest = load_manifest(opt.manifest_path);
    if (manifest.records.empty()) throw DataError("train-chars: empty manifest");
    std::vector<RasterImage> images = load_line_images(manifest);

    ZoneRuleTable rules;
    if (opt.middle_mode) {
        if (opt.rules_path.empty() || opt.zones_dir.empty())
            throw DataError("train-chars: middle mode needs --rules and --zones");
        rules = load_rule_table(opt.rules_path);
    }

    // per-line symbols; middle mode maps each grapheme through the rules
    std::vector<std::vector<std::string>> symbols(manifest.records.size());
    std::vector<std::string> bad_lines;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        std::vector<std::string> out;
        out.push_back(kSpaceLabel);  // rendered lines always carry margins
        bool ok = true;
        for (const auto& g : transcription_symbols(manifest.records[i].transcription)) {
            if (g == " ") {
                if (out.back() != kSpaceLabel) out.push_back(kSpaceLabel);
                continue;
            }
            if (!opt.middle_mode) {
                out.push_back(g);
                continue;
            }
            const ZoneRule* rule = rules.find(g);
            if (!rule) {
                ok = false;
                break;
            }
            for (const auto& s : rule->middle_form) out.push_back(s);
        }
        if (!ok) {
            bad_lines.push_back(manifest.records[i].line_id);
            continue;
        }
        if (out.back() != kSpaceLabel) out.push_back(kSpaceLabel);
        symbols[i] = std::move(out);
    }
    if (!bad_lines.empty()) {
        std::string msg = "train-chars: transcription symbols outside the rule table:";
        for (const auto& id : bad_lines) msg += " " + id;
        throw DataError(msg);
    }

    std::vector<std::string> charset;
    {
        std::set<std::string> set;
        for (const auto& line : symbols)
            for (const auto& s : line)
                if (s != kSpaceLabel) set.insert(s);
        charset.assign(set.begin(), set.end());
    }

    WindowSpec spec;
    PhogParams phog;
    std::vector<FeatureSequence> features(manifest.records.size());
    parallel_chunks(manifest.records.size(), opt.threads,
                    [&](unsigned, std::size_t b, std::size_t e) {
                        for (std::size_t i = b; i < e; ++i) {
                            const ZoneBoundaries* zbp = nullptr;
                            ZoneBoundaries zb;
                            if (opt.middle_mode) {
                                zb = load_line_zones(opt.zones_dir,
                                                     manifest.records[i].line_id);
                                zbp = &zb;
                            }
                            features[i] =
                                line_features(images[i], opt.features, zbp, spec, phog);
                        }
                    });

    std::vector<TrainLine> lines;
    for (std::size_t i = 0; i < features.size(); ++i)
        lines.push_back({&features[i], symbols[i]});

    ModelSet models = flat_start(lines, charset, opt.states);
    int total = 0;
    MixupSchedule sched = make_mixup_schedule(opt.iters_per_level, opt.gaussians, &total);
    TrainStats stats = embedded_baum_welch(models, lines, total, sched, opt.threads);
    models.save(opt.model_out);
    write_train_log(opt.log_out, stats);
    return stats;
}

TrainStats cmd_train_zones(const TrainZonesOptions& opt) {
    Manifest manifest = load_manifest(opt.manifest_path);
    if (manifest.records.empty()) throw DataError("train-zones: empty manifest");
    std::vector<RasterImage> images = load_line_images(manifest);

    PhogParams phog;
    std::vector<std::vector<LabelledStrip>> per_line(manifest.records.size());
    std::vector<std::vector<FeatureSequence>> storage(manifest.records.size());
    parallel_chunks(
        manifest.records.size(), opt.threads,
        [&](unsigned, std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const auto& rec = manifest.records[i];
                if (rec.zones_path.empty())
                    throw DataError("train-zones: record without zone truth: " +
                                    rec.line_id);
                ZoneTruth gt = ZoneTruth::decode(read_file(manifest.resolve(rec.zones_path)));
                ZoneParams zp;
                zp.line_height = estimate_line_height(images[i]).rows;
                zp.alpha = opt.alpha;
                zp.v_step = opt.v_step;
                ZoneStrips strips = zone_patch_sequence(images[i], zp, phog);
                for (std::size_t s = 0; s < strips.features.size(); ++s) {
                    double cx = (strips.x_range[s].first + strips.x_range[s].second) / 2.0;
                    double u = gt.upper_at(static_cast<int>(cx));
                    double l = gt.lower_at(static_cast<int>(cx));
                    LabelledStrip ls;
                    storage[i].push_back(std::move(strips.features[s]));
                    ls.features = nullptr;  // fixed after the move below
                    for (int k = 0; k < strips.patches_per_strip; ++k) {
                        double center = k * zp.v_step + zp.patch_height / 2.0;
                        ZonePatchLabel label;
                        if (center < u - gt.band) label = ZonePatchLabel::Space;
                        else if (center < u) label = ZonePatchLabel::Upper;
                        else if (center <= l) label = ZonePatchLabel::Middle;
                        else if (center <= l + gt.band) label = ZonePatchLabel::Lower;
                        else label = ZonePatchLabel::Space;
                        ls.labels.push_back(label);
                    }
                    per_line[i].push_back(std::move(ls));
                }
            }
        });

    std::vector<LabelledStrip> all;
    for (std::size_t i = 0; i < per_line.size(); ++i)
        for (std::size_t s = 0; s < per_line[i].size(); ++s) {
            per_line[i][s].features = &storage[i][s];
            all.push_back(per_line[i][s]);
        }

    TrainStats stats;
    ModelSet models = train_zone_models(all, opt.states, opt.gaussians,
                                        opt.iters_per_level, opt.threads, &stats);
    models.save(opt.model_out);
    write_train_log(opt.log_out, stats);
    return stats;
}

// ---------------------------------------------------------------- zones

void cmd_segment_zones(const SegmentZonesOptions& opt) {
    Manifest manifest = load_manifest(opt.manifest_path);
    if (manifest.records.empty()) throw DataError("segment-zones: empty manifest");
    std::vector<RasterImage> images = load_line_images(manifest);
    ensure_dir(opt.out_dir);

    ModelSet models;
    if (opt.method == ZoneMethod::Hmm) models = ModelSet::load(opt.model_path);

    parallel_chunks(manifest.records.size(), opt.threads,
                    [&](unsigned, std::size_t b, std::size_t e) {
                        for (std::size_t i = b; i < e; ++i) {
                            ZoneBoundaries zb;
                            if (opt.method == ZoneMethod::Hmm)
                                zb = segment_line_zones(images[i], models, opt.alpha,
                                                        opt.v_step);
                            else
                                zb = projection_zone_baseline(
                                    images[i], opt.method == ZoneMethod::ProjectionLocal);
                            zb.save(join_path(opt.out_dir,
                                              manifest.records[i].line_id + ".zones.tsv"));
                        }
                    });
}

// ---------------------------------------------------------------- spotting

SpotResult cmd_spot(const SpotOptions& opt) {
    Manifest manifest = load_manifest(opt.manifest_path);
    if (manifest.records.empty()) throw DataError("spot: empty manifest");
    std::vector<RasterImage> images = load_line_images(manifest);
    ModelSet models = ModelSet::load(opt.model_path);
    std::vector<std::string> keywords = load_keywords(opt.keywords_path);

    ZoneRuleTable rules;
    bool have_rules = !opt.rules_path.empty();
    if (have_rules) rules = load_rule_table(opt.rules_path);
    if (opt.middle_mode && !have_rules)
        throw DataError("spot: middle mode needs --rules");
    if (opt.middle_mode && opt.zones_dir.empty())
        throw DataError("spot: middle mode needs --zones");
    if (opt.rerank && (!have_rules || opt.zones_dir.empty()))
        throw DataError("spot: --rerank needs --rules and --zones");

    SpotResult result;
    struct Query {
        KeywordQuery query;
        SpotMachine machine;
    };
    std::vector<Query> queries;
    for (const auto& raw : keywords) {
        try {
            KeywordQuery q;
            if (opt.middle_mode) {
                q = map_keyword(raw, rules);
            } else {
                q.raw_text = raw;
                q.middle_transcription = split_graphemes(raw);
                if (have_rules) {
                    KeywordQuery counts = map_keyword(raw, rules);
                    q.upper_modifiers = counts.upper_modifiers;
                    q.lower_modifiers = counts.lower_modifiers;
                }
            }
            Query query;
            query.machine = make_keyword_machine(models, q.middle_transcription);
            query.query = std::move(q);
            queries.push_back(std::move(query));
        } catch (const Error&) {
            result.skipped_keywords.push_back(raw);
        }
    }
    if (queries.empty()) throw DataError("spot: every keyword was out of vocabulary");

    SpotMachine filler = make_filler_machine(models);
    WindowSpec spec;
    PhogParams phog;

    std::vector<std::vector<SpotHit>> per_line(manifest.records.size());
    parallel_chunks(
        manifest.records.size(), opt.threads,
        [&](unsigned, std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                ZoneBoundaries zb;
                const ZoneBoundaries* zbp = nullptr;
                if (opt.middle_mode || opt.rerank) {
                    zb = load_line_zones(opt.zones_dir, manifest.records[i].line_id);
                    zbp = &zb;
                }
                FeatureSequence x = line_features(
                    images[i], opt.features, opt.middle_mode ? zbp : nullptr, spec, phog);
                EmissionTable em = compute_emissions(models, x);
                int line_height = estimate_line_height(images[i]).rows;
                for (const auto& q : queries) {
                    SpotHit hit;
                    try {
                        hit = score_line(models, q.machine, filler, em, spec);
                    } catch (const TooShortError&) {
                        continue;  // line cannot contain this keyword
                    }
                    hit.line_id = manifest.records[i].line_id;
                    hit.keyword = q.query;
                    if (opt.rerank && hit.kept)
                        hit = rerank(hit, zb, images[i], line_height, spec);
                    per_line[i].push_back(std::move(hit));
                }
            }
        });

    std::vector<SpotHit> hits;
    for (auto& v : per_line)
        for (auto& h : v) hits.push_back(std::move(h));

    ThresholdPolicy policy = ThresholdPolicy::global(opt.theta);
    if (!opt.local_thresholds_path.empty()) {
        policy.kind = ThresholdPolicy::Kind::Local;
        std::istringstream in(read_file(opt.local_thresholds_path));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto cols = split_tabs(line);
            if (cols.size() != 2) throw DataError("local thresholds: expected 2 columns");
            policy.local_theta[cols[0]] = std::stod(cols[1]);
        }
    }
    // thresholding flips kept, never drops rows: the TSV keeps every score
    for (auto& h : hits) {
        double theta = policy.global_theta;
        if (policy.kind == ThresholdPolicy::Kind::Local) {
            auto it = policy.local_theta.find(h.keyword.raw_text);
            if (it != policy.local_theta.end()) theta = it->second;
            else h.threshold_fallback = true;
        }
        if (h.score < theta) h.kept = false;
    }

    sort_hits(hits);
    if (!opt.out_path.empty()) write_file(opt.out_path, encode_hits(hits));
    result.hits = std::move(hits);
    return result;
}

// ---------------------------------------------------------------- evaluate

EvalReport cmd_evaluate(const EvaluateOptions& opt) {
    std::vector<SpotHit> all = decode_hits(read_file(opt.hits_path));
    Manifest manifest = load_manifest(opt.manifest_path);

    std::set<std::string> manifest_ids, hit_ids;
    for (const auto& r : manifest.records) manifest_ids.insert(r.line_id);
    for (const auto& h : all) hit_ids.insert(h.line_id);
    std::string missing;
    for (const auto& id : hit_ids)
        if (!manifest_ids.count(id)) missing += " " + id;
    for (const auto& id : manifest_ids)
        if (!hit_ids.count(id)) missing += " " + id;
    if (!missing.empty())
        throw DataError("evaluate: line ids not covered by both sides:" + missing);

    std::vector<std::string> keywords;
    {
        std::set<std::string> set;
        for (const auto& h : all) set.insert(h.keyword.raw_text);
        keywords.assign(set.begin(), set.end());
    }
    GroundTruth gt = ground_truth_from(manifest, keywords);

    std::vector<SpotHit> kept;
    for (const auto& h : all)
        if (h.kept) kept.push_back(h);

    EvalReport report = evaluate_hits(kept, gt);
    if (!opt.report_out.empty()) write_file(opt.report_out, encode_report_tsv(report));
    if (!opt.curve_out.empty()) write_file(opt.curve_out, encode_curve_csv(report.curve));
    if (!opt.svg_out.empty())
        write_file(opt.svg_out, render_curve_svg(report.curve, "precision-recall"));
    return report;
}

// ---------------------------------------------------------------- dtw

EvalReport cmd_dtw_baseline(const DtwBaselineOptions& opt) {
    struct Word {
        std::string id, path, label;
    };
    std::vector<Word> words;
    {
        std::istringstream in(read_file(opt.words_manifest));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto cols = split_tabs(line);
            if (cols.size() != 3)
                throw DataError("words manifest: expected 3 columns");
            words.push_back({cols[0], cols[1], cols[2]});
        }
    }
    if (words.empty()) throw DataError("dtw-baseline: no candidate words");
    std::string words_dir = dirname_of(opt.words_manifest);

    std::vector<ProfileSequence> profiles(words.size());
    parallel_chunks(words.size(), 0, [&](unsigned, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            profiles[i] =
                dtw_profile_features(load_pnm(join_path(words_dir, words[i].path)));
    });

    std::vector<std::pair<std::string, std::string>> queries;  // keyword, path
    {
        std::istringstream in(read_file(opt.queries_manifest));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto cols = split_tabs(line);
            if (cols.size() != 2)
                throw DataError("queries manifest: expected 2 columns");
            queries.emplace_back(cols[0], cols[1]);
        }
    }
    std::string queries_dir = dirname_of(opt.queries_manifest);

    DtwParams params;
    params.band_radius = opt.band_radius;

    GroundTruth gt;
    for (const auto& w : words) gt.keywords_by_line[w.id] = {w.label};

    std::vector<std::pair<std::string, const ProfileSequence*>> candidates;
    for (std::size_t i = 0; i < words.size(); ++i)
        candidates.emplace_back(words[i].id, &profiles[i]);

    std::vector<SpotHit> hits;
    std::string rank_tsv;
    for (const auto& [keyword, path] : queries) {
        ProfileSequence q = dtw_profile_features(load_pnm(join_path(queries_dir, path)));
        auto ranked = dtw_baseline_rank(q, candidates, params);
        for (const auto& r : ranked) {
            SpotHit h;
            h.keyword.raw_text = keyword;
            h.line_id = r.word_id;
            h.score = -r.distance;  // ascending distance = descending score
            h.a = 0;
            h.b = 1;
            h.L_s = 0;
            h.L_f = 1;
            hits.push_back(std::move(h));
            rank_tsv += keyword + "\t" + r.word_id + "\t" + fmt_double(r.distance) + "\n";
        }
    }

    EvalReport report = evaluate_hits(hits, gt);
    if (!opt.report_out.empty()) write_file(opt.report_out, encode_report_tsv(report));
    if (!opt.rank_out.empty()) write_file(opt.rank_out, rank_tsv);
    return report;
}

}  // namespace zspot
