#ifndef ZSPOT_SEQMODEL_HPP
#define ZSPOT_SEQMODEL_HPP

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "zspot/features.hpp"

namespace zspot {

inline constexpr const char* kSpaceLabel = " ";
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_add(double a, double b);

// Diagonal-covariance Gaussian mixture tied to one HMM state.
struct GmmState {
    int dim = 0;
    std::vector<double> weights;  // G, sums to 1
    std::vector<double> means;    // G*dim
    std::vector<double> vars;     // G*dim, floored above 0

    // caches rebuilt by finalize()
    std::vector<double> log_norm;
    std::vector<double> half_inv_var;

    int gaussians() const { return static_cast<int>(weights.size()); }
    void finalize();
    void component_log_pdfs(std::span<const double> x, double* out) const;
    double log_pdf(std::span<const double> x) const;
};

double gmm_log_pdf(const GmmState& state, std::span<const double> x);

// Left-to-right character model; per state a self-loop and a forward
// probability that together sum to 1 (log domain).
struct CharHmm {
    std::string label;
    std::vector<GmmState> states;
    std::vector<double> log_self;
    std::vector<double> log_next;

    int state_count() const { return static_cast<int>(states.size()); }
};

struct ModelSet {
    int dim = 0;
    std::vector<CharHmm> models;

    int find(const std::string& label) const;
    int require(const std::string& label) const;  // OutOfVocabularyError if absent
    int total_states() const;
    int state_offset(int model) const;

    std::string encode() const;  // "ZSHM" format
    static ModelSet decode(const std::string& bytes);
    void save(const std::string& path) const;
    static ModelSet load(const std::string& path);
};

// ---------------------------------------------------------------- networks

struct SpottingNetwork {
    enum class Role { Filler, Keyword, ZoneFiller };

    struct Node {
        int model = -1;
        bool keyword = false;
    };

    struct Edge {
        int from = -1, to = -1;
        double logp = 0.0;
    };

    Role role = Role::Filler;
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::vector<std::pair<int, double>> entries;  // (node, logp)
    std::vector<std::pair<int, double>> exits;

    int add_node(int model, bool keyword = false) {
        nodes.push_back({model, keyword});
        return static_cast<int>(nodes.size()) - 1;
    }
    void add_edge(int u, int v, double logp) { edges.push_back({u, v, logp}); }
    void add_entry(int v, double logp) { entries.emplace_back(v, logp); }
    void add_exit(int u, double logp) { exits.emplace_back(u, logp); }
};

// Loop over every model (chars + Space) with a uniform -ln(n) prior per
// branch.
SpottingNetwork build_filler(const ModelSet& models);

// Filler* . Space . c1 ... cm . Space . Filler*; keyword char nodes tagged.
// The flanking fillers may be skipped entirely (zero-frame occupancy).
SpottingNetwork build_keyword_network(const ModelSet& models,
                                      const std::vector<std::string>& keyword_symbols);

// Every node reachable from entry and co-reachable to exit.
bool network_connected(const SpottingNetwork& net);

// ---------------------------------------------------------------- viterbi

// State-level expansion of a network; flat state order is node order with
// states 0..J-1 inside each node (the tie-break order).
struct FlatNetwork {
    struct Pred {
        int state;
        double logp;
    };
    int total = 0;
    std::vector<int> node_of, state_in_node, gsid;
    std::vector<double> entry_logp, exit_logp;
    std::vector<std::vector<Pred>> preds;  // sorted by predecessor index, self included
    std::vector<char> keyword_state;
    int min_frames = 0;
};

FlatNetwork flatten(const ModelSet& models, const SpottingNetwork& net);

struct EmissionTable {
    int frames = 0;
    int states = 0;
    std::vector<double> ll;  // frames * states
    double at(int t, int s) const {
        return ll[static_cast<std::size_t>(t) * states + s];
    }
};

EmissionTable compute_emissions(const ModelSet& models, const FeatureSequence& x);

struct Alignment {
    struct Segment {
        int node = -1;
        int start = 0, end = 0;  // frames [start, end)
    };
    std::vector<std::pair<int, int>> frame_states;  // (node, state) per frame
    std::vector<Segment> segments;
    double log_likelihood = kLogZero;
};

Alignment viterbi(const ModelSet& models, const SpottingNetwork& net,
                  const FeatureSequence& x);
Alignment viterbi_cached(const FlatNetwork& flat, const EmissionTable& em);

double forward_loglik(const ModelSet& models, const SpottingNetwork& net,
                      const FeatureSequence& x);

// Best path over frames [a,b) with free entry at entry-reachable states and
// free exit from exit-capable states (used as the span-restricted filler
// score, making a filler-shaped keyword span cancel exactly).
double best_span_loglik(const FlatNetwork& flat, const EmissionTable& em, int a, int b);

// ---------------------------------------------------------------- training

struct TrainLine {
    const FeatureSequence* features = nullptr;
    std::vector<std::string> symbols;  // kSpaceLabel marks word gaps
};

// HTK-style flat start: every state of every model gets the global
// frame mean/variance, uniform transitions, one Gaussian.
ModelSet flat_start(const std::vector<TrainLine>& lines,
                    const std::vector<std::string>& charset, int states_per_model);

struct MixupSchedule {
    std::vector<int> double_after;  // 1-based iteration indices
    int target_gaussians = 32;
};

// double_after = {k, 2k, ...} for 1 -> 2 -> 4 -> ... -> target.
MixupSchedule make_mixup_schedule(int iters_per_level, int target_gaussians,
                                  int* total_iterations);

struct TrainIteration {
    int iteration = 0;
    int gaussians = 1;
    double loglik = 0.0;
    int skipped = 0;
};

struct TrainStats {
    std::vector<TrainIteration> log;
    int skipped_lines = 0;
};

TrainStats embedded_baum_welch(ModelSet& models, const std::vector<TrainLine>& lines,
                               int iterations, const MixupSchedule& schedule,
                               unsigned threads = 0);

}  // namespace zspot

#endif
