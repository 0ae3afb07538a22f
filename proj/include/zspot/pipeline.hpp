#ifndef ZSPOT_PIPELINE_HPP
#define ZSPOT_PIPELINE_HPP

#include <string>
#include <vector>

#include "zspot/eval.hpp"
#include "zspot/manifest.hpp"
#include "zspot/synth.hpp"
#include "zspot/zones.hpp"

namespace zspot {

// Command implementations shared by the CLI and the acceptance suite.

struct TrainCharsOptions {
    std::string manifest_path;
    std::string model_out;
    std::string log_out;          // optional per-iteration CSV
    FeatureMode features = FeatureMode::FgBg;
    bool middle_mode = false;     // train on zone-masked middle images
    std::string zones_dir;        // required for middle_mode
    std::string rules_path;       // required for middle_mode
    int states = 6;
    int gaussians = 32;
    int iters_per_level = 3;
    unsigned threads = 0;
};

TrainStats cmd_train_chars(const TrainCharsOptions& opt);

struct TrainZonesOptions {
    std::string manifest_path;  // records must carry zone ground truth paths
    std::string model_out;
    std::string log_out;
    int states = 8;
    int gaussians = 32;
    int iters_per_level = 3;
    double alpha = 1.5;
    int v_step = 4;
    unsigned threads = 0;
};

TrainStats cmd_train_zones(const TrainZonesOptions& opt);

enum class ZoneMethod { Hmm, ProjectionGlobal, ProjectionLocal };

struct SegmentZonesOptions {
    std::string manifest_path;
    std::string model_path;  // unused for projection baselines
    std::string out_dir;
    ZoneMethod method = ZoneMethod::Hmm;
    double alpha = 1.5;
    int v_step = 4;
    unsigned threads = 0;
};

void cmd_segment_zones(const SegmentZonesOptions& opt);

struct SpotOptions {
    std::string manifest_path;
    std::string model_path;
    std::string keywords_path;
    std::string rules_path;  // needed for middle mode and for --rerank
    std::string out_path;
    bool middle_mode = false;
    std::string zones_dir;  // needed for middle mode and for --rerank
    FeatureMode features = FeatureMode::FgBg;
    bool rerank = false;
    double theta = -std::numeric_limits<double>::infinity();
    std::string local_thresholds_path;  // optional keyword<TAB>theta table
    unsigned threads = 0;
};

struct SpotResult {
    std::vector<SpotHit> hits;
    std::vector<std::string> skipped_keywords;  // out of vocabulary
};

SpotResult cmd_spot(const SpotOptions& opt);

struct EvaluateOptions {
    std::string hits_path;
    std::string manifest_path;
    std::string report_out;
    std::string curve_out;
    std::string svg_out;  // optional
};

EvalReport cmd_evaluate(const EvaluateOptions& opt);

struct DtwBaselineOptions {
    std::string words_manifest;    // word_id<TAB>image<TAB>label
    std::string queries_manifest;  // keyword<TAB>image
    std::string report_out;
    std::string rank_out;  // optional keyword<TAB>word_id<TAB>distance
    int band_radius = -1;
};

EvalReport cmd_dtw_baseline(const DtwBaselineOptions& opt);

// Ground truth from a manifest: a keyword is relevant to a line iff it
// matches one of the transcription's words exactly.
GroundTruth ground_truth_from(const Manifest& manifest,
                              const std::vector<std::string>& keywords);

std::vector<std::string> load_keywords(const std::string& path);

// Transcription -> model symbols (space-separated words over graphemes).
std::vector<std::string> transcription_symbols(const std::string& transcription);

}  // namespace zspot

#endif
