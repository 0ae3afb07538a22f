#include "zspot/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace zspot {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr char kModelMagic[4] = {'Z', 'S', 'H', 'M'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

double log_add(double a, double b) {
    if (a == kLogZero) return b;
    if (b == kLogZero) return a;
    double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

// ---------------------------------------------------------------- gmm

void GmmState::finalize() {
    int g = gaussians();
    log_norm.assign(g, 0.0);
    half_inv_var.assign(vars.size(), 0.0);
    for (int k = 0; k < g; ++k) {
        double log_det = 0;
        for (int d = 0; d < dim; ++d) {
            double v = vars[static_cast<std::size_t>(k) * dim + d];
            log_det += std::log(v);
            half_inv_var[static_cast<std::size_t>(k) * dim + d] = 0.5 / v;
        }
        log_norm[k] = std::log(weights[k]) - 0.5 * (dim * kLog2Pi + log_det);
    }
}

void GmmState::component_log_pdfs(std::span<const double> x, double* out) const {
    for (int k = 0; k < gaussians(); ++k) {
        const double* mu = means.data() + static_cast<std::size_t>(k) * dim;
        const double* hv = half_inv_var.data() + static_cast<std::size_t>(k) * dim;
        double acc = 0;
        for (int d = 0; d < dim; ++d) {
            double diff = x[d] - mu[d];
            acc += diff * diff * hv[d];
        }
        out[k] = log_norm[k] - acc;
    }
}

double GmmState::log_pdf(std::span<const double> x) const {
    int g = gaussians();
    double tmp[64];
    std::vector<double> heap;
    double* buf = tmp;
    if (g > 64) {
        heap.resize(g);
        buf = heap.data();
    }
    component_log_pdfs(x, buf);
    double hi = buf[0];
    for (int k = 1; k < g; ++k) hi = std::max(hi, buf[k]);
    double sum = 0;
    for (int k = 0; k < g; ++k) sum += std::exp(buf[k] - hi);
    return hi + std::log(sum);
}

double gmm_log_pdf(const GmmState& state, std::span<const double> x) {
    if (static_cast<int>(x.size()) != state.dim)
        throw DimensionError("gmm_log_pdf: dimension mismatch");
    return state.log_pdf(x);
}

// ---------------------------------------------------------------- model set

int ModelSet::find(const std::string& label) const {
    for (std::size_t i = 0; i < models.size(); ++i)
        if (models[i].label == label) return static_cast<int>(i);
    return -1;
}

int ModelSet::require(const std::string& label) const {
    int i = find(label);
    if (i < 0) throw OutOfVocabularyError("unknown model symbol: '" + label + "'");
    return i;
}

int ModelSet::total_states() const {
    int n = 0;
    for (const auto& m : models) n += m.state_count();
    return n;
}

int ModelSet::state_offset(int model) const {
    int n = 0;
    for (int i = 0; i < model; ++i) n += models[i].state_count();
    return n;
}

std::string ModelSet::encode() const {
    std::string out;
    out.append(kModelMagic, 4);
    put_u32le(out, kModelVersion);
    put_u32le(out, static_cast<std::uint32_t>(models.size()));
    for (const auto& m : models) {
        put_u32le(out, static_cast<std::uint32_t>(m.label.size()));
        out += m.label;
    }
    for (const auto& m : models) {
        int g = m.states.empty() ? 0 : m.states[0].gaussians();
        for (const auto& s : m.states)
            if (s.gaussians() != g) throw DataError("encode: ragged mixture counts");
        put_u32le(out, static_cast<std::uint32_t>(m.state_count()));
        put_u32le(out, static_cast<std::uint32_t>(g));
        put_u32le(out, static_cast<std::uint32_t>(dim));
        for (const auto& s : m.states) {
            for (double v : s.weights) put_f64le(out, v);
            for (double v : s.means) put_f64le(out, v);
            for (double v : s.vars) put_f64le(out, v);
        }
        for (int j = 0; j < m.state_count(); ++j) {
            put_f64le(out, m.log_self[j]);
            put_f64le(out, m.log_next[j]);
        }
    }
    return out;
}

ModelSet ModelSet::decode(const std::string& bytes) {
    ByteReader r(bytes);
    if (r.bytes(4) != std::string(kModelMagic, 4))
        throw DataError("model file: bad magic");
    if (r.u32le() != kModelVersion) throw DataError("model file: bad version");
    std::uint32_t count = r.u32le();
    ModelSet ms;
    ms.models.resize(count);
    for (auto& m : ms.models) m.label = r.bytes(r.u32le());
    for (auto& m : ms.models) {
        std::uint32_t j = r.u32le(), g = r.u32le(), d = r.u32le();
        ms.dim = static_cast<int>(d);
        m.states.resize(j);
        for (auto& s : m.states) {
            s.dim = static_cast<int>(d);
            s.weights.resize(g);
            s.means.resize(static_cast<std::size_t>(g) * d);
            s.vars.resize(static_cast<std::size_t>(g) * d);
            for (auto& v : s.weights) v = r.f64le();
            for (auto& v : s.means) v = r.f64le();
            for (auto& v : s.vars) v = r.f64le();
            s.finalize();
        }
        m.log_self.resize(j);
        m.log_next.resize(j);
        for (std::uint32_t k = 0; k < j; ++k) {
            m.log_self[k] = r.f64le();
            m.log_next[k] = r.f64le();
        }
    }
    if (!r.at_end()) throw DataError("model file: trailing bytes");
    return ms;
}

void ModelSet::save(const std::string& path) const { write_file(path, encode()); }

ModelSet ModelSet::load(const std::string& path) { return decode(read_file(path)); }

// ---------------------------------------------------------------- networks

SpottingNetwork build_filler(const ModelSet& models) {
    if (models.models.empty()) throw DataError("build_filler: empty model set");
    SpottingNetwork net;
    net.role = SpottingNetwork::Role::Filler;
    int n = static_cast<int>(models.models.size());
    double prior = -std::log(static_cast<double>(n));
    for (int i = 0; i < n; ++i) net.add_node(i);
    for (int i = 0; i < n; ++i) {
        net.add_entry(i, prior);
        net.add_exit(i, 0.0);
        for (int j = 0; j < n; ++j) net.add_edge(i, j, prior);
    }
    return net;
}

SpottingNetwork build_keyword_network(const ModelSet& models,
                                      const std::vector<std::string>& keyword_symbols) {
    if (keyword_symbols.empty()) throw OutOfVocabularyError("keyword has no symbols");
    int space = models.find(kSpaceLabel);
    if (space < 0) throw OutOfVocabularyError("model set lacks a Space model");
    std::vector<int> kw;
    for (const auto& s : keyword_symbols) {
        int m = models.find(s);
        if (m < 0 || m == space)
            throw OutOfVocabularyError("keyword symbol out of vocabulary: '" + s + "'");
        kw.push_back(m);
    }

    SpottingNetwork net;
    net.role = SpottingNetwork::Role::Keyword;
    int n = static_cast<int>(models.models.size());
    double prior = -std::log(static_cast<double>(n));

    std::vector<int> left, right;
    for (int i = 0; i < n; ++i) left.push_back(net.add_node(i));
    int space_pre = net.add_node(space);
    std::vector<int> chars;
    for (int m : kw) chars.push_back(net.add_node(m, true));
    int space_post = net.add_node(space);
    for (int i = 0; i < n; ++i) right.push_back(net.add_node(i));

    for (int u : left) {
        net.add_entry(u, prior);
        for (int v : left) net.add_edge(u, v, prior);
        net.add_edge(u, space_pre, 0.0);
    }
    net.add_entry(space_pre, 0.0);  // leading filler may consume zero frames
    net.add_edge(space_pre, chars[0], 0.0);
    for (std::size_t i = 0; i + 1 < chars.size(); ++i)
        net.add_edge(chars[i], chars[i + 1], 0.0);
    net.add_edge(chars.back(), space_post, 0.0);
    net.add_exit(space_post, 0.0);  // trailing filler may consume zero frames
    for (int u : right) {
        net.add_edge(space_post, u, prior);
        for (int v : right) net.add_edge(u, v, prior);
        net.add_exit(u, 0.0);
    }
    return net;
}

bool network_connected(const SpottingNetwork& net) {
    int n = static_cast<int>(net.nodes.size());
    if (n == 0) return false;
    std::vector<std::vector<int>> fwd(n), bwd(n);
    for (const auto& e : net.edges) {
        fwd[e.from].push_back(e.to);
        bwd[e.to].push_back(e.from);
    }
    auto reach = [&](const std::vector<int>& seeds,
                     const std::vector<std::vector<int>>& adj) {
        std::vector<char> seen(n, 0);
        std::vector<int> stack(seeds);
        for (int s : stack) seen[s] = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v : adj[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
        }
        return seen;
    };
    std::vector<int> entry_nodes, exit_nodes;
    for (auto& [v, lp] : net.entries) entry_nodes.push_back(v);
    for (auto& [u, lp] : net.exits) exit_nodes.push_back(u);
    auto from_entry = reach(entry_nodes, fwd);
    auto to_exit = reach(exit_nodes, bwd);
    for (int i = 0; i < n; ++i)
        if (!from_entry[i] || !to_exit[i]) return false;
    return true;
}

// ---------------------------------------------------------------- flatten

FlatNetwork flatten(const ModelSet& models, const SpottingNetwork& net) {
    FlatNetwork flat;
    int n = static_cast<int>(net.nodes.size());
    std::vector<int> first_state(n, 0);
    for (int i = 0; i < n; ++i) {
        first_state[i] = flat.total;
        const CharHmm& m = models.models[net.nodes[i].model];
        for (int j = 0; j < m.state_count(); ++j) {
            flat.node_of.push_back(i);
            flat.state_in_node.push_back(j);
            flat.gsid.push_back(models.state_offset(net.nodes[i].model) + j);
            flat.keyword_state.push_back(net.nodes[i].keyword ? 1 : 0);
            ++flat.total;
        }
    }
    flat.entry_logp.assign(flat.total, kLogZero);
    flat.exit_logp.assign(flat.total, kLogZero);
    flat.preds.assign(flat.total, {});

    auto last_state = [&](int node) {
        return first_state[node] + models.models[net.nodes[node].model].state_count() - 1;
    };

    for (auto& [v, lp] : net.entries)
        flat.entry_logp[first_state[v]] = log_add(flat.entry_logp[first_state[v]], lp);
    for (auto& [u, lp] : net.exits) {
        const CharHmm& m = models.models[net.nodes[u].model];
        int s = last_state(u);
        flat.exit_logp[s] =
            log_add(flat.exit_logp[s], m.log_next[m.state_count() - 1] + lp);
    }

    for (int i = 0; i < n; ++i) {
        const CharHmm& m = models.models[net.nodes[i].model];
        for (int j = 0; j < m.state_count(); ++j) {
            int s = first_state[i] + j;
            flat.preds[s].push_back({s, m.log_self[j]});
            if (j + 1 < m.state_count()) flat.preds[s + 1].push_back({s, m.log_next[j]});
        }
    }
    for (const auto& e : net.edges) {
        const CharHmm& mu = models.models[net.nodes[e.from].model];
        int u_last = last_state(e.from);
        int v_first = first_state[e.to];
        flat.preds[v_first].push_back({u_last, mu.log_next[mu.state_count() - 1] + e.logp});
    }
    for (auto& p : flat.preds)
        std::sort(p.begin(), p.end(),
                  [](const FlatNetwork::Pred& a, const FlatNetwork::Pred& b) {
                      return a.state < b.state;
                  });

    // minimum frames: node-weighted shortest path from entry to exit
    const int kInf = 1 << 28;
    std::vector<int> best(n, kInf);
    for (int pass = 0; pass < n + 1; ++pass) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int in_cost = kInf;
            for (auto& [v, lp] : net.entries)
                if (v == i) in_cost = 0;
            for (const auto& e : net.edges)
                if (e.to == i && best[e.from] < in_cost) in_cost = best[e.from];
            if (in_cost == kInf) continue;
            int total = in_cost + models.models[net.nodes[i].model].state_count();
            if (total < best[i]) {
                best[i] = total;
                changed = true;
            }
        }
        if (!changed) break;
    }
    int mf = kInf;
    for (auto& [u, lp] : net.exits) mf = std::min(mf, best[u]);
    flat.min_frames = mf == kInf ? 0 : mf;
    return flat;
}

// ---------------------------------------------------------------- emissions

EmissionTable compute_emissions(const ModelSet& models, const FeatureSequence& x) {
    if (x.dim != models.dim)
        throw DimensionError("compute_emissions: feature dim != model dim");
    EmissionTable em;
    em.frames = x.frames();
    em.states = models.total_states();
    em.ll.resize(static_cast<std::size_t>(em.frames) * em.states);
    for (int t = 0; t < em.frames; ++t) {
        auto frame = x.frame(t);
        int sid = 0;
        for (const auto& m : models.models)
            for (const auto& st : m.states)
                em.ll[static_cast<std::size_t>(t) * em.states + sid++] = st.log_pdf(frame);
    }
    return em;
}

// ---------------------------------------------------------------- viterbi

Alignment viterbi_cached(const FlatNetwork& flat, const EmissionTable& em) {
    const int T = em.frames, S = flat.total;
    if (T < std::max(flat.min_frames, 1))
        throw TooShortError("viterbi: sequence shorter than the network's minimum path");

    std::vector<double> prev(S), cur(S);
    std::vector<int> bp(static_cast<std::size_t>(T) * S, -1);
    for (int s = 0; s < S; ++s)
        prev[s] = flat.entry_logp[s] == kLogZero
                      ? kLogZero
                      : flat.entry_logp[s] + em.at(0, flat.gsid[s]);
    for (int t = 1; t < T; ++t) {
        for (int s = 0; s < S; ++s) {
            double best = kLogZero;
            int arg = -1;
            for (const auto& p : flat.preds[s]) {
                if (prev[p.state] == kLogZero) continue;
                double cand = prev[p.state] + p.logp;
                if (cand > best) {
                    best = cand;
                    arg = p.state;
                }
            }
            cur[s] = arg < 0 ? kLogZero : best + em.at(t, flat.gsid[s]);
            bp[static_cast<std::size_t>(t) * S + s] = arg;
        }
        std::swap(prev, cur);
    }

    double best = kLogZero;
    int arg = -1;
    for (int s = 0; s < S; ++s) {
        if (prev[s] == kLogZero || flat.exit_logp[s] == kLogZero) continue;
        double cand = prev[s] + flat.exit_logp[s];
        if (cand > best) {
            best = cand;
            arg = s;
        }
    }
    if (arg < 0) throw TooShortError("viterbi: no feasible path");

    Alignment out;
    out.log_likelihood = best;
    std::vector<int> path(T);
    path[T - 1] = arg;
    for (int t = T - 1; t > 0; --t)
        path[t - 1] = bp[static_cast<std::size_t>(t) * S + path[t]];
    out.frame_states.reserve(T);
    for (int t = 0; t < T; ++t)
        out.frame_states.emplace_back(flat.node_of[path[t]], flat.state_in_node[path[t]]);
    int seg_start = 0;
    for (int t = 1; t <= T; ++t) {
        if (t == T || out.frame_states[t].first != out.frame_states[t - 1].first) {
            out.segments.push_back({out.frame_states[seg_start].first, seg_start, t});
            seg_start = t;
        }
    }
    return out;
}

Alignment viterbi(const ModelSet& models, const SpottingNetwork& net,
                  const FeatureSequence& x) {
    FlatNetwork flat = flatten(models, net);
    EmissionTable em = compute_emissions(models, x);
    return viterbi_cached(flat, em);
}

double forward_loglik(const ModelSet& models, const SpottingNetwork& net,
                      const FeatureSequence& x) {
    FlatNetwork flat = flatten(models, net);
    EmissionTable em = compute_emissions(models, x);
    const int T = em.frames, S = flat.total;
    if (T < std::max(flat.min_frames, 1))
        throw TooShortError("forward: sequence shorter than the network's minimum path");
    std::vector<double> prev(S), cur(S);
    for (int s = 0; s < S; ++s)
        prev[s] = flat.entry_logp[s] == kLogZero
                      ? kLogZero
                      : flat.entry_logp[s] + em.at(0, flat.gsid[s]);
    for (int t = 1; t < T; ++t) {
        for (int s = 0; s < S; ++s) {
            double acc = kLogZero;
            for (const auto& p : flat.preds[s])
                if (prev[p.state] != kLogZero) acc = log_add(acc, prev[p.state] + p.logp);
            cur[s] = acc == kLogZero ? kLogZero : acc + em.at(t, flat.gsid[s]);
        }
        std::swap(prev, cur);
    }
    double total = kLogZero;
    for (int s = 0; s < S; ++s)
        if (prev[s] != kLogZero && flat.exit_logp[s] != kLogZero)
            total = log_add(total, prev[s] + flat.exit_logp[s]);
    return total;
}

double best_span_loglik(const FlatNetwork& flat, const EmissionTable& em, int a, int b) {
    const int S = flat.total;
    if (a < 0 || b > em.frames || a >= b)
        throw DimensionError("best_span_loglik: bad span");
    std::vector<double> prev(S), cur(S);
    for (int s = 0; s < S; ++s)
        prev[s] = flat.entry_logp[s] == kLogZero ? kLogZero : em.at(a, flat.gsid[s]);
    for (int t = a + 1; t < b; ++t) {
        for (int s = 0; s < S; ++s) {
            double best = kLogZero;
            for (const auto& p : flat.preds[s]) {
                if (prev[p.state] == kLogZero) continue;
                double cand = prev[p.state] + p.logp;
                if (cand > best) best = cand;
            }
            cur[s] = best == kLogZero ? kLogZero : best + em.at(t, flat.gsid[s]);
        }
        std::swap(prev, cur);
    }
    double best = kLogZero;
    for (int s = 0; s < S; ++s)
        if (flat.exit_logp[s] != kLogZero) best = std::max(best, prev[s]);
    return best;
}

// ---------------------------------------------------------------- training

namespace {

std::vector<int> chain_models(const ModelSet& ms, const std::vector<std::string>& symbols) {
    std::vector<int> out;
    for (const auto& s : symbols) out.push_back(ms.require(s));
    return out;
}

struct StateAcc {
    std::vector<double> c0, c1, c2;
    double t_self = 0, t_next = 0;
};

struct Accumulator {
    std::vector<StateAcc> state;
    double loglik = 0;
    int skipped = 0;

    void init(const ModelSet& ms) {
        state.resize(ms.total_states());
        int sid = 0;
        for (const auto& m : ms.models)
            for (const auto& st : m.states) {
                state[sid].c0.assign(st.gaussians(), 0.0);
                state[sid].c1.assign(st.means.size(), 0.0);
                state[sid].c2.assign(st.means.size(), 0.0);
                ++sid;
            }
    }

    void merge(const Accumulator& o) {
        loglik += o.loglik;
        skipped += o.skipped;
        for (std::size_t s = 0; s < state.size(); ++s) {
            state[s].t_self += o.state[s].t_self;
            state[s].t_next += o.state[s].t_next;
            for (std::size_t k = 0; k < state[s].c0.size(); ++k)
                state[s].c0[k] += o.state[s].c0[k];
            for (std::size_t k = 0; k < state[s].c1.size(); ++k) {
                state[s].c1[k] += o.state[s].c1[k];
                state[s].c2[k] += o.state[s].c2[k];
            }
        }
    }
};

// E-step for one line over the linear chain of its transcription's models.
void accumulate_line(const ModelSet& ms, const TrainLine& line,
                     const std::vector<int>& models_seq, Accumulator& acc) {
    const FeatureSequence& x = *line.features;
    const int T = x.frames();

    struct ChainPos {
        int gsid;
        const GmmState* st;
        double lself, lnext;
    };
    std::vector<ChainPos> chain;
    for (int m : models_seq) {
        const CharHmm& hm = ms.models[m];
        for (int j = 0; j < hm.state_count(); ++j)
            chain.push_back(
                {ms.state_offset(m) + j, &hm.states[j], hm.log_self[j], hm.log_next[j]});
    }
    const int S = static_cast<int>(chain.size());
    if (S == 0 || T < S) {
        acc.skipped++;
        return;
    }

    // distinct states of this chain -> local emission cache index
    std::map<int, int> local;
    std::vector<const GmmState*> local_state;
    std::vector<int> pos_local(S);
    for (int s = 0; s < S; ++s) {
        auto it = local.find(chain[s].gsid);
        if (it == local.end()) {
            it = local.emplace(chain[s].gsid, static_cast<int>(local_state.size())).first;
            local_state.push_back(chain[s].st);
        }
        pos_local[s] = it->second;
    }
    const int L = static_cast<int>(local_state.size());
    const int G = local_state[0]->gaussians();

    std::vector<double> comp_ll(static_cast<std::size_t>(T) * L * G);
    std::vector<double> em(static_cast<std::size_t>(T) * L);
    for (int t = 0; t < T; ++t) {
        auto fr = x.frame(t);
        for (int l = 0; l < L; ++l) {
            double* c = comp_ll.data() + (static_cast<std::size_t>(t) * L + l) * G;
            local_state[l]->component_log_pdfs(fr, c);
            double hi = c[0];
            for (int k = 1; k < G; ++k) hi = std::max(hi, c[k]);
            double sum = 0;
            for (int k = 0; k < G; ++k) sum += std::exp(c[k] - hi);
            em[static_cast<std::size_t>(t) * L + l] = hi + std::log(sum);
        }
    }
    auto E = [&](int t, int s) {
        return em[static_cast<std::size_t>(t) * L + pos_local[s]];
    };

    std::vector<double> alpha(static_cast<std::size_t>(T) * S, kLogZero);
    std::vector<double> beta(static_cast<std::size_t>(T) * S, kLogZero);
    alpha[0] = E(0, 0);
    for (int t = 1; t < T; ++t) {
        // strictly left-to-right, no skips: s is reachable iff s <= t and
        // the remaining frames can still cover the remaining states
        int lo = std::max(0, S - (T - t));
        int hi = std::min(S - 1, t);
        for (int s = lo; s <= hi; ++s) {
            double stay = alpha[static_cast<std::size_t>(t - 1) * S + s];
            double v = stay == kLogZero ? kLogZero : stay + chain[s].lself;
            if (s > 0) {
                double enter = alpha[static_cast<std::size_t>(t - 1) * S + s - 1];
                if (enter != kLogZero) v = log_add(v, enter + chain[s - 1].lnext);
            }
            alpha[static_cast<std::size_t>(t) * S + s] =
                v == kLogZero ? kLogZero : v + E(t, s);
        }
    }
    double ll = alpha[static_cast<std::size_t>(T - 1) * S + S - 1] + chain[S - 1].lnext;
    if (!std::isfinite(ll)) {
        acc.skipped++;
        return;
    }

    beta[static_cast<std::size_t>(T - 1) * S + S - 1] = chain[S - 1].lnext;
    for (int t = T - 2; t >= 0; --t) {
        int lo = std::max(0, S - (T - t));
        int hi = std::min(S - 1, t);
        for (int s = lo; s <= hi; ++s) {
            double stay = beta[static_cast<std::size_t>(t + 1) * S + s];
            double v = kLogZero;
            if (stay != kLogZero) v = chain[s].lself + E(t + 1, s) + stay;
            if (s + 1 < S) {
                double go = beta[static_cast<std::size_t>(t + 1) * S + s + 1];
                if (go != kLogZero)
                    v = log_add(v, chain[s].lnext + E(t + 1, s + 1) + go);
            }
            beta[static_cast<std::size_t>(t) * S + s] = v;
        }
    }

    acc.loglik += ll;
    for (int t = 0; t < T; ++t) {
        auto fr = x.frame(t);
        for (int s = 0; s < S; ++s) {
            double a = alpha[static_cast<std::size_t>(t) * S + s];
            if (a == kLogZero) continue;
            double b = beta[static_cast<std::size_t>(t) * S + s];
            if (b == kLogZero) continue;
            double g = a + b - ll;
            if (g < -34.0) continue;  // below exp() relevance
            double gamma = std::exp(g);
            const double* c =
                comp_ll.data() + (static_cast<std::size_t>(t) * L + pos_local[s]) * G;
            double e = E(t, s);
            StateAcc& sa = acc.state[chain[s].gsid];
            const int dim = static_cast<int>(fr.size());
            for (int k = 0; k < G; ++k) {
                double rk = gamma * std::exp(c[k] - e);
                if (rk == 0.0) continue;
                sa.c0[k] += rk;
                double* c1 = sa.c1.data() + static_cast<std::size_t>(k) * dim;
                double* c2 = sa.c2.data() + static_cast<std::size_t>(k) * dim;
                for (int d = 0; d < dim; ++d) {
                    double xv = fr[d];
                    c1[d] += rk * xv;
                    c2[d] += rk * xv * xv;
                }
            }
            if (t + 1 < T) {
                double bs = beta[static_cast<std::size_t>(t + 1) * S + s];
                if (bs != kLogZero)
                    sa.t_self += std::exp(a + chain[s].lself + E(t + 1, s) + bs - ll);
                if (s + 1 < S) {
                    double bn = beta[static_cast<std::size_t>(t + 1) * S + s + 1];
                    if (bn != kLogZero)
                        sa.t_next +=
                            std::exp(a + chain[s].lnext + E(t + 1, s + 1) + bn - ll);
                }
            }
        }
    }
    acc.state[chain[S - 1].gsid].t_next += 1.0;  // exit mass
}

void split_heaviest(GmmState& st) {
    int k = 0;
    for (int i = 1; i < st.gaussians(); ++i)
        if (st.weights[i] > st.weights[k]) k = i;
    int d = st.dim;
    double w = st.weights[k] / 2.0;
    std::vector<double> mu_hi(d), var(d);
    for (int i = 0; i < d; ++i) {
        double m = st.means[static_cast<std::size_t>(k) * d + i];
        double v = st.vars[static_cast<std::size_t>(k) * d + i];
        double off = 0.2 * std::sqrt(v);
        mu_hi[i] = m + off;
        st.means[static_cast<std::size_t>(k) * d + i] = m - off;
        var[i] = v;
    }
    st.weights[k] = w;
    st.weights.push_back(w);
    st.means.insert(st.means.end(), mu_hi.begin(), mu_hi.end());
    st.vars.insert(st.vars.end(), var.begin(), var.end());
}

}  // namespace

ModelSet flat_start(const std::vector<TrainLine>& lines,
                    const std::vector<std::string>& charset, int states_per_model) {
    if (lines.empty()) throw DataError("flat_start: empty training set");
    std::set<std::string> known(charset.begin(), charset.end());
    known.insert(kSpaceLabel);
    long total_frames = 0;
    int dim = -1;
    for (const auto& line : lines) {
        for (const auto& s : line.symbols)
            if (!known.count(s))
                throw DataError("flat_start: symbol not in charset: '" + s + "'");
        if (dim < 0) dim = line.features->dim;
        if (line.features->dim != dim)
            throw DimensionError("flat_start: inconsistent feature dims");
        total_frames += line.features->frames();
    }
    if (total_frames == 0) throw DataError("flat_start: no frames in training set");

    std::vector<double> mean(dim, 0.0), sq(dim, 0.0);
    for (const auto& line : lines)
        for (int t = 0; t < line.features->frames(); ++t) {
            auto fr = line.features->frame(t);
            for (int d = 0; d < dim; ++d) {
                mean[d] += fr[d];
                sq[d] += fr[d] * fr[d];
            }
        }
    std::vector<double> var(dim);
    for (int d = 0; d < dim; ++d) {
        mean[d] /= static_cast<double>(total_frames);
        var[d] = sq[d] / static_cast<double>(total_frames) - mean[d] * mean[d];
        var[d] = std::max(var[d], std::max(1e-4 * var[d], 1e-6));
    }

    GmmState proto;
    proto.dim = dim;
    proto.weights = {1.0};
    proto.means = mean;
    proto.vars = var;
    proto.finalize();

    ModelSet ms;
    ms.dim = dim;
    std::vector<std::string> labels(charset);
    labels.push_back(kSpaceLabel);
    for (const auto& label : labels) {
        CharHmm m;
        m.label = label;
        m.states.assign(states_per_model, proto);
        m.log_self.assign(states_per_model, std::log(0.5));
        m.log_next.assign(states_per_model, std::log(0.5));
        ms.models.push_back(std::move(m));
    }
    return ms;
}

MixupSchedule make_mixup_schedule(int iters_per_level, int target_gaussians,
                                  int* total_iterations) {
    MixupSchedule s;
    s.target_gaussians = target_gaussians;
    int levels = 0;
    for (int g = 1; g < target_gaussians; g *= 2) ++levels;
    for (int l = 1; l <= levels; ++l) s.double_after.push_back(l * iters_per_level);
    if (total_iterations) *total_iterations = (levels + 1) * iters_per_level;
    return s;
}

TrainStats embedded_baum_welch(ModelSet& models, const std::vector<TrainLine>& lines,
                               int iterations, const MixupSchedule& schedule,
                               unsigned threads) {
    TrainStats stats;
    if (lines.empty()) throw DataError("embedded_baum_welch: empty training set");

    // global per-dimension variance floor from the training data
    long total_frames = 0;
    std::vector<double> mean(models.dim, 0.0), sq(models.dim, 0.0);
    for (const auto& line : lines) {
        total_frames += line.features->frames();
        for (int t = 0; t < line.features->frames(); ++t) {
            auto fr = line.features->frame(t);
            for (int d = 0; d < models.dim; ++d) {
                mean[d] += fr[d];
                sq[d] += fr[d] * fr[d];
            }
        }
    }
    if (total_frames == 0) throw DataError("embedded_baum_welch: no frames");
    std::vector<double> var_floor(models.dim);
    for (int d = 0; d < models.dim; ++d) {
        double mu = mean[d] / static_cast<double>(total_frames);
        double v = sq[d] / static_cast<double>(total_frames) - mu * mu;
        var_floor[d] = std::max(1e-4 * v, 1e-6);
    }

    std::vector<std::vector<int>> chains;
    chains.reserve(lines.size());
    for (const auto& line : lines) chains.push_back(chain_models(models, line.symbols));

    for (int iter = 1; iter <= iterations; ++iter) {
        unsigned hw = std::thread::hardware_concurrency();
        unsigned nthreads = threads ? threads : (hw ? hw : 1);
        nthreads = std::min<unsigned>(nthreads, static_cast<unsigned>(lines.size()));
        nthreads = std::max(1u, nthreads);
        std::vector<Accumulator> accs(nthreads);
        for (auto& a : accs) a.init(models);
        parallel_chunks(lines.size(), nthreads,
                        [&](unsigned chunk, std::size_t b, std::size_t e) {
                            for (std::size_t i = b; i < e; ++i)
                                accumulate_line(models, lines[i], chains[i], accs[chunk]);
                        });
        Accumulator total = std::move(accs[0]);
        for (std::size_t i = 1; i < accs.size(); ++i) total.merge(accs[i]);

        int g_now = models.models[0].states[0].gaussians();
        stats.log.push_back({iter, g_now, total.loglik, total.skipped});
        stats.skipped_lines = total.skipped;

        // M-step
        int sid = 0;
        for (auto& m : models.models) {
            for (int j = 0; j < m.state_count(); ++j, ++sid) {
                GmmState& st = m.states[j];
                StateAcc& sa = total.state[sid];
                double occ = 0;
                for (double c : sa.c0) occ += c;
                if (occ > 1e-8) {
                    int g = st.gaussians();
                    for (int k = 0; k < g; ++k) {
                        if (sa.c0[k] < 1e-8) continue;  // starved component: keep
                        double inv = 1.0 / sa.c0[k];
                        for (int d = 0; d < st.dim; ++d) {
                            std::size_t idx = static_cast<std::size_t>(k) * st.dim + d;
                            double mu = sa.c1[idx] * inv;
                            double v = sa.c2[idx] * inv - mu * mu;
                            st.means[idx] = mu;
                            st.vars[idx] = std::max(v, var_floor[d]);
                        }
                    }
                    double wsum = 0;
                    for (int k = 0; k < g; ++k) {
                        st.weights[k] = std::max(sa.c0[k] / occ, 1e-8);
                        wsum += st.weights[k];
                    }
                    for (int k = 0; k < g; ++k) st.weights[k] /= wsum;
                    st.finalize();
                }
                double n = sa.t_self + sa.t_next;
                if (n > 1e-8) {
                    double self = std::clamp(sa.t_self / n, 1e-6, 1.0 - 1e-6);
                    m.log_self[j] = std::log(self);
                    m.log_next[j] = std::log(1.0 - self);
                }
            }
        }

        bool due = false;
        for (int at : schedule.double_after)
            if (at == iter) due = true;
        if (due && g_now < schedule.target_gaussians) {
            int target = std::min(2 * g_now, schedule.target_gaussians);
            for (auto& m : models.models)
                for (auto& st : m.states) {
                    while (st.gaussians() < target) split_heaviest(st);
                    st.finalize();
                }
        }
    }
    return stats;
}

}  // namespace zspot
