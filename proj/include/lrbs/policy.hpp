#pragma once

// Reference improvement policy.
//
// Every node gets a small feature vector describing where it sits in the current
// and best solutions. Two linear maps turn those features into query/key
// embeddings, and each candidate action is scored by the query-key product of
// the two nodes it reconnects plus a linear head over hand-built pairwise
// features (move gain, edges shared with the best solution, ...). Scores go
// through a temperature softmax. Pickup-and-delivery moves are factorized into
// three such stages: request, pickup slot, delivery slot.
//
// The adaptation weights (phi) form one residual affine layer on the score
// stage of every head: s' = (1 + phi_s) s + phi_g . g + phi_e . (q_u * k_v).
// Zero phi leaves the scores bit-identical.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "instance.hpp"
#include "mdp.hpp"
#include "rng.hpp"

namespace lrbs {

enum class ProblemKind { tsp, pdp };

inline const char* to_string(ProblemKind k) noexcept { return k == ProblemKind::pdp ? "pdp" : "tsp"; }

/// Shapes and flat offsets of the policy tensors.
struct PolicyLayout {
    int features = 0;       ///< per-node feature count
    int embed = 0;          ///< query/key width
    std::vector<int> heads; ///< pairwise feature count per scoring stage

    [[nodiscard]] std::size_t wq_offset() const noexcept { return 0; }
    [[nodiscard]] std::size_t wk_offset() const noexcept { return static_cast<std::size_t>(embed * features); }
    [[nodiscard]] std::size_t head_offset(std::size_t stage) const noexcept
    {
        std::size_t off = 2 * static_cast<std::size_t>(embed * features);
        for (std::size_t s = 0; s < stage; ++s) off += static_cast<std::size_t>(heads[s]);
        return off;
    }
    [[nodiscard]] std::size_t theta_size() const noexcept { return head_offset(heads.size()); }

    [[nodiscard]] std::size_t phi_stage_size(std::size_t stage) const noexcept
    {
        return 1 + static_cast<std::size_t>(heads[stage] + embed);
    }
    [[nodiscard]] std::size_t phi_offset(std::size_t stage) const noexcept
    {
        std::size_t off = 0;
        for (std::size_t s = 0; s < stage; ++s) off += phi_stage_size(s);
        return off;
    }
    [[nodiscard]] std::size_t phi_size() const noexcept { return phi_offset(heads.size()); }
};

inline const PolicyLayout& layout_for(ProblemKind kind)
{
    static const PolicyLayout tsp{8, 4, {4}};
    static const PolicyLayout pdp{10, 4, {2, 2, 2}};
    return kind == ProblemKind::pdp ? pdp : tsp;
}

/// Base policy weights (theta).
struct PolicyParams {
    ProblemKind kind = ProblemKind::tsp;
    std::vector<double> theta;
    double temperature = 1.0;

    [[nodiscard]] const PolicyLayout& layout() const { return layout_for(kind); }

    /// All-zero weights: the uniform policy over the masked action space.
    static PolicyParams zeros(ProblemKind kind, double temperature = 1.0)
    {
        return {kind, std::vector<double>(layout_for(kind).theta_size(), 0.0), temperature};
    }

    /// Small random embeddings, zero heads.
    static PolicyParams random(ProblemKind kind, std::uint64_t seed, double scale = 0.1)
    {
        auto p = zeros(kind);
        const auto& lay = p.layout();
        Rng rng(derive_seed(seed, {0x1417ULL}));
        for (std::size_t i = 0; i < lay.head_offset(0); ++i) p.theta[i] = scale * (2.0 * rng.uniform() - 1.0);
        return p;
    }

    void validate() const
    {
        if (!(temperature > 0.0) || !std::isfinite(temperature)) throw invalid_argument("policy temperature must be positive");
        if (theta.size() != layout().theta_size()) throw invalid_argument("policy weights have the wrong size");
        for (double v : theta)
            if (!std::isfinite(v)) throw numeric_error("non-finite policy weight");
    }

    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

/// Adaptation weights (phi). `version` is bumped on every update so recorded
/// log-probabilities can be checked for staleness.
struct EasParams {
    ProblemKind kind = ProblemKind::tsp;
    std::vector<double> phi;
    bool enabled = true;
    std::uint64_t version = 0;

    [[nodiscard]] bool active() const noexcept { return enabled; }

    friend bool operator==(const EasParams&, const EasParams&) = default;
};

inline EasParams eas_wrap(const PolicyParams& base)
{
    return {base.kind, std::vector<double>(base.layout().phi_size(), 0.0), true, 0};
}

/// Flat gradient buffers matching PolicyParams::theta and EasParams::phi.
struct Gradient {
    std::vector<double> theta;
    std::vector<double> phi;

    static Gradient zeros(ProblemKind kind)
    {
        const auto& lay = layout_for(kind);
        return {std::vector<double>(lay.theta_size(), 0.0), std::vector<double>(lay.phi_size(), 0.0)};
    }

    Gradient& add(const Gradient& o, double scale = 1.0)
    {
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += scale * o.theta[i];
        for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += scale * o.phi[i];
        return *this;
    }
};

struct GradRequest {
    bool theta = true;
    bool phi = true;
};

template <typename Action>
struct ActionDistribution {
    std::vector<Action> support;
    std::vector<double> probabilities;

    [[nodiscard]] std::size_t size() const noexcept { return support.size(); }
};

namespace detail {

/// Lengths are measured in units of the typical edge of a uniform instance,
/// about 1/sqrt(nodes), so features keep their range across instance sizes.
inline double length_scale(int nodes) { return std::sqrt(static_cast<double>(nodes)); }

/// Per-node features and their query/key embeddings.
struct NodeEmbedding {
    int nodes = 0;
    int features = 0;
    int embed = 0;
    std::vector<double> feat;
    std::vector<double> q;
    std::vector<double> k;

    [[nodiscard]] const double* f(int v) const { return feat.data() + static_cast<std::size_t>(v * features); }
    [[nodiscard]] const double* qv(int v) const { return q.data() + static_cast<std::size_t>(v * embed); }
    [[nodiscard]] const double* kv(int v) const { return k.data() + static_cast<std::size_t>(v * embed); }

    void project(const PolicyParams& params)
    {
        const auto& lay = params.layout();
        const double* wq = params.theta.data() + lay.wq_offset();
        const double* wk = params.theta.data() + lay.wk_offset();
        q.assign(static_cast<std::size_t>(nodes * embed), 0.0);
        k.assign(static_cast<std::size_t>(nodes * embed), 0.0);
        for (int v = 0; v < nodes; ++v) {
            const double* fv = f(v);
            for (int d = 0; d < embed; ++d) {
                double sq = 0.0, sk = 0.0;
                for (int i = 0; i < features; ++i) {
                    sq += wq[d * features + i] * fv[i];
                    sk += wk[d * features + i] * fv[i];
                }
                q[static_cast<std::size_t>(v * embed + d)] = sq;
                k[static_cast<std::size_t>(v * embed + d)] = sk;
            }
        }
    }
};

/// Candidates of one scoring stage: the node pair each one reconnects and its
/// pairwise feature row.
struct StageCandidates {
    int width = 0;
    std::vector<int> u;
    std::vector<int> v;
    std::vector<double> g;

    [[nodiscard]] std::size_t size() const noexcept { return u.size(); }
    void clear(int w)
    {
        width = w;
        u.clear();
        v.clear();
        g.clear();
    }
    void push(int a, int b, std::initializer_list<double> row)
    {
        u.push_back(a);
        v.push_back(b);
        g.insert(g.end(), row);
    }
    [[nodiscard]] const double* row(std::size_t c) const { return g.data() + c * static_cast<std::size_t>(width); }
};

struct StageScores {
    std::vector<double> base;   ///< head score before the adaptation layer
    std::vector<double> probs;
    std::vector<double> logp;
};

inline const double* phi_block(const EasParams* eas, const PolicyLayout& lay, std::size_t stage)
{
    if (!eas || !eas->active()) return nullptr;
    return eas->phi.data() + lay.phi_offset(stage);
}

/// Score loop with compile-time widths (0 = runtime) so the common shapes unroll.
template <int W, int D>
double score_candidates(const double* w, const double* phi, int width, int embed, const NodeEmbedding& emb,
                        const StageCandidates& cands, double inv_t, StageScores& out)
{
    if constexpr (W > 0) width = W;
    if constexpr (D > 0) embed = D;
    const std::size_t m = cands.size();
    double max_logit = -std::numeric_limits<double>::infinity();
    double poison = 0.0; // becomes NaN if any logit is inf or NaN
    for (std::size_t c = 0; c < m; ++c) {
        const double* qu = emb.qv(cands.u[c]);
        const double* kv = emb.kv(cands.v[c]);
        const double* g = cands.row(c);
        double s = 0.0;
        for (int d = 0; d < embed; ++d) s += qu[d] * kv[d];
        for (int i = 0; i < width; ++i) s += w[i] * g[i];
        out.base[c] = s;
        if (phi) {
            double r = (1.0 + phi[0]) * s;
            for (int i = 0; i < width; ++i) r += phi[1 + i] * g[i];
            for (int d = 0; d < embed; ++d) r += phi[1 + width + d] * qu[d] * kv[d];
            s = r;
        }
        const double logit = s * inv_t;
        poison += logit * 0.0;
        out.logp[c] = logit;
        max_logit = logit > max_logit ? logit : max_logit;
    }
    if (poison != 0.0 || (m > 0 && !std::isfinite(max_logit))) throw numeric_error("non-finite action score");
    return max_logit;
}

inline void evaluate_stage(const PolicyParams& params, const EasParams* eas, std::size_t stage, const NodeEmbedding& emb,
                           const StageCandidates& cands, StageScores& out)
{
    const auto& lay = params.layout();
    const int width = lay.heads[stage];
    const int embed = emb.embed;
    const double* w = params.theta.data() + lay.head_offset(stage);
    const double* phi = phi_block(eas, lay, stage);
    const std::size_t m = cands.size();
    out.base.resize(m);
    out.probs.resize(m);
    out.logp.resize(m);

    const double inv_t = 1.0 / params.temperature;
    double max_logit;
    if (width == 4 && embed == 4) max_logit = score_candidates<4, 4>(w, phi, width, embed, emb, cands, inv_t, out);
    else if (width == 2 && embed == 4) max_logit = score_candidates<2, 4>(w, phi, width, embed, emb, cands, inv_t, out);
    else max_logit = score_candidates<0, 0>(w, phi, width, embed, emb, cands, inv_t, out);

    double z = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        out.probs[c] = std::exp(out.logp[c] - max_logit);
        z += out.probs[c];
    }
    const double log_z = max_logit + std::log(z);
    const double inv_z = 1.0 / z;
    for (std::size_t c = 0; c < m; ++c) {
        out.probs[c] *= inv_z;
        out.logp[c] -= log_z;
    }
}

/// Adds scale * d log p(chosen) / d(theta, phi) for one stage.
inline void accumulate_stage_grad(const PolicyParams& params, const EasParams* eas, std::size_t stage,
                                  const NodeEmbedding& emb, const StageCandidates& cands, const StageScores& scores,
                                  std::size_t chosen, double scale, GradRequest want, Gradient& grad)
{
    const auto& lay = params.layout();
    const int width = lay.heads[stage];
    const int embed = emb.embed;
    const int features = emb.features;
    const double* phi = phi_block(eas, lay, stage);
    const double amp = phi ? 1.0 + phi[0] : 1.0;
    const double inv_t = 1.0 / params.temperature;
    const std::size_t m = cands.size();

    std::vector<double> dq, dk;
    if (want.theta) {
        dq.assign(static_cast<std::size_t>(emb.nodes * embed), 0.0);
        dk.assign(static_cast<std::size_t>(emb.nodes * embed), 0.0);
    }
    double* gw = want.theta ? grad.theta.data() + lay.head_offset(stage) : nullptr;
    double* gphi = (want.phi && phi) ? grad.phi.data() + lay.phi_offset(stage) : nullptr;
    std::vector<double> coef(static_cast<std::size_t>(embed));
    for (int d = 0; d < embed; ++d) coef[static_cast<std::size_t>(d)] = amp + (phi ? phi[1 + width + d] : 0.0);

    for (std::size_t c = 0; c < m; ++c) {
        const double gamma = scale * inv_t * ((c == chosen ? 1.0 : 0.0) - scores.probs[c]);
        if (gamma == 0.0) continue;
        const double* g = cands.row(c);
        const int u = cands.u[c];
        const int v = cands.v[c];
        const double* qu = emb.qv(u);
        const double* kv = emb.kv(v);
        if (gw) {
            for (int i = 0; i < width; ++i) gw[i] += gamma * amp * g[i];
            double* dqu = dq.data() + static_cast<std::size_t>(u * embed);
            double* dkv = dk.data() + static_cast<std::size_t>(v * embed);
            for (int d = 0; d < embed; ++d) {
                dqu[d] += gamma * coef[static_cast<std::size_t>(d)] * kv[d];
                dkv[d] += gamma * coef[static_cast<std::size_t>(d)] * qu[d];
            }
        }
        if (gphi) {
            gphi[0] += gamma * scores.base[c];
            for (int i = 0; i < width; ++i) gphi[1 + i] += gamma * g[i];
            for (int d = 0; d < embed; ++d) gphi[1 + width + d] += gamma * qu[d] * kv[d];
        }
    }
    if (want.theta) {
        double* gq = grad.theta.data() + lay.wq_offset();
        double* gk = grad.theta.data() + lay.wk_offset();
        for (int v = 0; v < emb.nodes; ++v) {
            const double* fv = emb.f(v);
            for (int d = 0; d < embed; ++d) {
                const double a = dq[static_cast<std::size_t>(v * embed + d)];
                const double b = dk[static_cast<std::size_t>(v * embed + d)];
                if (a == 0.0 && b == 0.0) continue;
                for (int i = 0; i < features; ++i) {
                    gq[d * features + i] += a * fv[i];
                    gk[d * features + i] += b * fv[i];
                }
            }
        }
    }
}

/// Inverse-CDF draw; consumes exactly one uniform.
inline std::size_t draw_index(std::span<const double> probs, Rng& rng)
{
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        if (probs[c] <= 0.0) continue;
        acc += probs[c];
        last = c;
        if (u < acc) return c;
    }
    return last;
}

/// Sequential draws without replacement, renormalizing over the remaining mass.
/// The first draw is identical to draw_index.
inline std::vector<std::size_t> draw_distinct(std::span<const double> probs, std::size_t count, Rng& rng)
{
    std::size_t positive = 0;
    for (double p : probs) positive += p > 0.0 ? 1 : 0;
    if (count > probs.size()) throw invalid_argument("sample_distinct: count exceeds the support size");
    std::vector<std::size_t> out;
    out.reserve(count);
    std::vector<char> taken(probs.size(), 0);
    double remaining = 1.0;
    for (std::size_t n = 0; n < count; ++n) {
        if (out.size() >= positive) {
            // Only zero-probability actions are left; take them in index order.
            for (std::size_t c = 0; c < probs.size() && out.size() < count; ++c)
                if (!taken[c]) {
                    taken[c] = 1;
                    out.push_back(c);
                }
            break;
        }
        const double u = rng.uniform() * remaining;
        double acc = 0.0;
        std::size_t pick = probs.size();
        for (std::size_t c = 0; c < probs.size(); ++c) {
            if (taken[c] || probs[c] <= 0.0) continue;
            acc += probs[c];
            pick = c;
            if (u < acc) break;
        }
        taken[pick] = 1;
        out.push_back(pick);
        remaining = 0.0;
        for (std::size_t c = 0; c < probs.size(); ++c)
            if (!taken[c]) remaining += probs[c];
    }
    return out;
}

inline std::vector<int> positions_of(std::span<const int> tour)
{
    std::vector<int> pos(tour.size());
    for (std::size_t p = 0; p < tour.size(); ++p) pos[static_cast<std::size_t>(tour[p])] = static_cast<int>(p);
    return pos;
}

} // namespace detail

// ---------------------------------------------------------------------------
// TSP: one categorical over 2-opt moves.

class TspPolicyDist {
public:
    using action_type = TwoOptMove;

    TspPolicyDist(const PolicyParams& params, const EasParams* eas, const TspEnv& env, const SearchState& state)
        : params_(&params), eas_(eas), env_(&env), n_(env.node_count()), len_scale_(detail::length_scale(n_))
    {
        if (params.kind != ProblemKind::tsp) throw invalid_argument("TSP environment needs TSP policy weights");
        params.validate();
        moves_ = tsp_action_space(n_);
        const std::size_t m = moves_.size();
        cands_.width = 4;
        cands_.u.resize(m);
        cands_.v.resize(m);
        cands_.g.resize(4 * m);
        emb_ = {n_, 8, params.layout().embed, std::vector<double>(static_cast<std::size_t>(n_ * 8)), {}, {}};
        rebind(state);
    }

    /// Re-evaluates the distribution at another state, reusing buffers.
    void rebind(const SearchState& state)
    {
        const auto& inst = env_->instance();
        const int n = n_;
        const auto un = static_cast<std::size_t>(n);
        const auto& cur = state.current;
        const auto& best = state.best;

        // Cyclic neighbours in the best tour and the current tour padded on both ends.
        bsucc_.resize(un);
        bpred_.resize(un);
        for (std::size_t p = 0; p < un; ++p) {
            bsucc_[static_cast<std::size_t>(best[p])] = best[(p + 1) % un];
            bpred_[static_cast<std::size_t>(best[p])] = best[(p + un - 1) % un];
        }
        ext_.resize(un + 2);
        ext_[0] = cur[un - 1];
        std::copy(cur.begin(), cur.end(), ext_.begin() + 1);
        ext_[un + 1] = cur[0];

        for (std::size_t p = 0; p < un; ++p) {
            const int v = cur[p];
            double* f = emb_.feat.data() + static_cast<std::size_t>(v) * 8;
            const Point c = inst.coord(v);
            f[0] = c.x;
            f[1] = c.y;
            f[2] = inst.distance(v, ext_[p]) * len_scale_;
            f[3] = inst.distance(v, ext_[p + 2]) * len_scale_;
            f[4] = inst.distance(v, bpred_[static_cast<std::size_t>(v)]) * len_scale_;
            f[5] = inst.distance(v, bsucc_[static_cast<std::size_t>(v)]) * len_scale_;
            f[6] = static_cast<double>(p) / n;
            f[7] = 1.0;
        }
        emb_.project(*params_);

        auto in_best = [this](int a, int b) {
            return bsucc_[static_cast<std::size_t>(a)] == b || bpred_[static_cast<std::size_t>(a)] == b;
        };
        const double slack = state.best_length - state.current_length;
        std::size_t c = 0;
        double* g = cands_.g.data();
        for (int i = 0; i < n; ++i) {
            const int a = ext_[static_cast<std::size_t>(i)];
            const int b = ext_[static_cast<std::size_t>(i) + 1];
            const double dab = inst.distance(a, b);
            const double ab_best = in_best(a, b) ? 1.0 : 0.0;
            for (int j = i + 1; j < n; ++j) {
                if (two_opt_degenerate(n, i, j)) continue;
                const int cc = ext_[static_cast<std::size_t>(j) + 1];
                const int e = ext_[static_cast<std::size_t>(j) + 2];
                const double gain = dab + inst.distance(cc, e) - inst.distance(a, cc) - inst.distance(b, e);
                cands_.u[c] = a;
                cands_.v[c] = cc;
                g[0] = gain * len_scale_;
                g[1] = -gain < slack ? 1.0 : 0.0;
                g[2] = 0.5 * (ab_best + (in_best(cc, e) ? 1.0 : 0.0));
                g[3] = 0.5 * ((in_best(a, cc) ? 1.0 : 0.0) + (in_best(b, e) ? 1.0 : 0.0));
                g += 4;
                ++c;
            }
        }
        detail::evaluate_stage(*params_, eas_, 0, emb_, cands_, scores_);
    }

    [[nodiscard]] std::size_t support_size() const noexcept { return moves_.size(); }

    [[nodiscard]] TwoOptMove sample(Rng& rng) const
    {
        if (moves_.empty()) throw invalid_argument("no 2-opt moves available");
        return moves_[detail::draw_index(scores_.probs, rng)];
    }

    [[nodiscard]] std::vector<TwoOptMove> sample_distinct(std::size_t count, Rng& rng) const
    {
        std::vector<TwoOptMove> out;
        for (auto idx : detail::draw_distinct(scores_.probs, count, rng)) out.push_back(moves_[idx]);
        return out;
    }

    [[nodiscard]] double log_prob(const TwoOptMove& a) const { return scores_.logp[index_of(a)]; }

    [[nodiscard]] ActionDistribution<TwoOptMove> materialize() const { return {moves_, scores_.probs}; }

    void accumulate_grad(const TwoOptMove& a, double scale, GradRequest want, Gradient& grad) const
    {
        detail::accumulate_stage_grad(*params_, eas_, 0, emb_, cands_, scores_, index_of(a), scale, want, grad);
    }

private:
    [[nodiscard]] std::size_t index_of(const TwoOptMove& a) const
    {
        const int n = n_;
        if (a.i < 0 || a.j >= n || two_opt_degenerate(n, a.i, a.j))
            throw invalid_argument("action is not in the support of the policy");
        auto raw = [n](int i, int j) {
            return static_cast<std::size_t>(i) * static_cast<std::size_t>(2 * n - i - 1) / 2 + static_cast<std::size_t>(j - i - 1);
        };
        std::size_t idx = raw(a.i, a.j);
        // Masked pairs that precede (i, j) in lexicographic order.
        for (auto [mi, mj] : {std::pair{0, n - 2}, std::pair{0, n - 1}, std::pair{1, n - 1}})
            if (std::pair{mi, mj} < std::pair{a.i, a.j}) --idx;
        return idx;
    }

    const PolicyParams* params_;
    const EasParams* eas_;
    const TspEnv* env_;
    int n_;
    double len_scale_;
    std::vector<int> bsucc_, bpred_, ext_;
    detail::NodeEmbedding emb_;
    detail::StageCandidates cands_;
    detail::StageScores scores_;
    std::vector<TwoOptMove> moves_;
};

// ---------------------------------------------------------------------------
// PDP: request -> pickup slot -> delivery slot.

class PdpPolicyDist {
public:
    using action_type = ReinsertMove;

    PdpPolicyDist(const PolicyParams& params, const EasParams* eas, const PdpEnv& env, const SearchState& state)
        : params_(&params), eas_(eas), env_(&env), len_scale_(detail::length_scale(env.instance().size())),
          current_(state.current)
    {
        if (params.kind != ProblemKind::pdp) throw invalid_argument("PDP environment needs PDP policy weights");
        params.validate();
        const auto& inst = env.instance();
        const auto& best = state.best;
        const int size = inst.size();
        auto bpos = detail::positions_of(best);
        auto at = [size](std::span<const int> t, int p) { return t[static_cast<std::size_t>((p + size) % size)]; };

        emb_ = {size, 10, params.layout().embed, std::vector<double>(static_cast<std::size_t>(size * 10)), {}, {}};
        for (int p = 0; p < size; ++p) {
            const int v = current_[static_cast<std::size_t>(p)];
            const int bp = bpos[static_cast<std::size_t>(v)];
            double* f = emb_.feat.data() + static_cast<std::size_t>(v * 10);
            const Point c = inst.coord(v);
            f[0] = c.x;
            f[1] = c.y;
            f[2] = inst.distance(v, at(current_, p - 1)) * len_scale_;
            f[3] = inst.distance(v, at(current_, p + 1)) * len_scale_;
            f[4] = inst.distance(v, at(best, bp - 1)) * len_scale_;
            f[5] = inst.distance(v, at(best, bp + 1)) * len_scale_;
            f[6] = static_cast<double>(p) / size;
            f[7] = inst.is_pickup(v) ? 1.0 : 0.0;
            f[8] = inst.is_delivery(v) ? 1.0 : 0.0;
            f[9] = 1.0;
        }
        emb_.project(params);

        const int n = inst.requests();
        request_cands_.clear(2);
        for (int r = 0; r < n; ++r) {
            const int p = inst.pickup_node(r);
            const int d = inst.delivery_node(r);
            const double removal = env.length(current_) - env.length(detail::remove_request(inst, current_, r));
            request_cands_.push(p, d, {removal * len_scale_, inst.distance(p, d) * len_scale_});
        }
        detail::evaluate_stage(params, eas, 0, emb_, request_cands_, request_scores_);
        slot_cache_.resize(static_cast<std::size_t>(n));
    }

    void rebind(const SearchState& state) { *this = PdpPolicyDist(*params_, eas_, *env_, state); }

    [[nodiscard]] std::size_t support_size() const
    {
        std::size_t total = 0;
        const int n = env_->instance().requests();
        std::vector<int> slots;
        for (int r = 0; r < n; ++r) {
            const auto& pick = pickup_stage(r);
            for (int j = 0; j < static_cast<int>(pick.reduced.size()); ++j) {
                env_->delivery_slots(pick.reduced, j, slots);
                total += slots.size();
            }
        }
        return total;
    }

    [[nodiscard]] ReinsertMove sample(Rng& rng) const
    {
        const int r = static_cast<int>(detail::draw_index(request_scores_.probs, rng));
        const auto& pick = pickup_stage(r);
        const int j = static_cast<int>(detail::draw_index(pick.scores.probs, rng));
        DeliveryStage del;
        delivery_stage(r, j, del);
        const int k = del.slots[detail::draw_index(del.scores.probs, rng)];
        return {r, j, k};
    }

    /// Rejection against already-drawn moves is exactly sequential sampling
    /// without replacement. Falls back to the materialized joint when the
    /// remaining mass gets small.
    [[nodiscard]] std::vector<ReinsertMove> sample_distinct(std::size_t count, Rng& rng) const
    {
        if (count > static_cast<std::size_t>(env_->instance().requests()) && count > support_size())
            throw invalid_argument("sample_distinct: count exceeds the support size");
        std::vector<ReinsertMove> out;
        std::size_t rejected = 0;
        while (out.size() < count) {
            auto a = sample(rng);
            if (std::find(out.begin(), out.end(), a) == out.end()) {
                out.push_back(a);
                continue;
            }
            if (++rejected > 64 * count) {
                auto joint = materialize();
                for (const auto& taken : out) {
                    auto it = std::find(joint.support.begin(), joint.support.end(), taken);
                    joint.probabilities[static_cast<std::size_t>(it - joint.support.begin())] = 0.0;
                }
                double rest = std::accumulate(joint.probabilities.begin(), joint.probabilities.end(), 0.0);
                if (rest > 0.0)
                    for (auto& p : joint.probabilities) p /= rest;
                for (auto idx : detail::draw_distinct(joint.probabilities, count - out.size(), rng))
                    out.push_back(joint.support[idx]);
            }
        }
        return out;
    }

    [[nodiscard]] double log_prob(const ReinsertMove& a) const
    {
        check_support(a);
        const auto& pick = pickup_stage(a.request);
        DeliveryStage del;
        delivery_stage(a.request, a.j, del);
        return request_scores_.logp[static_cast<std::size_t>(a.request)] + pick.scores.logp[static_cast<std::size_t>(a.j)] +
               del.scores.logp[del.index_of(a.k)];
    }

    [[nodiscard]] ActionDistribution<ReinsertMove> materialize() const
    {
        ActionDistribution<ReinsertMove> out;
        const int n = env_->instance().requests();
        DeliveryStage del;
        for (int r = 0; r < n; ++r) {
            const auto& pick = pickup_stage(r);
            for (int j = 0; j < static_cast<int>(pick.reduced.size()); ++j) {
                delivery_stage(r, j, del);
                for (std::size_t s = 0; s < del.slots.size(); ++s) {
                    out.support.push_back({r, j, del.slots[s]});
                    out.probabilities.push_back(request_scores_.probs[static_cast<std::size_t>(r)] *
                                                pick.scores.probs[static_cast<std::size_t>(j)] * del.scores.probs[s]);
                }
            }
        }
        return out;
    }

    void accumulate_grad(const ReinsertMove& a, double scale, GradRequest want, Gradient& grad) const
    {
        check_support(a);
        detail::accumulate_stage_grad(*params_, eas_, 0, emb_, request_cands_, request_scores_,
                                      static_cast<std::size_t>(a.request), scale, want, grad);
        const auto& pick = pickup_stage(a.request);
        detail::accumulate_stage_grad(*params_, eas_, 1, emb_, pick.cands, pick.scores, static_cast<std::size_t>(a.j),
                                      scale, want, grad);
        DeliveryStage del;
        delivery_stage(a.request, a.j, del);
        detail::accumulate_stage_grad(*params_, eas_, 2, emb_, del.cands, del.scores, del.index_of(a.k), scale, want, grad);
    }

private:
    struct PickupStage {
        bool ready = false;
        Tour reduced;
        detail::StageCandidates cands;
        detail::StageScores scores;
    };

    struct DeliveryStage {
        std::vector<int> slots;
        detail::StageCandidates cands;
        detail::StageScores scores;

        [[nodiscard]] std::size_t index_of(int k) const
        {
            auto it = std::find(slots.begin(), slots.end(), k);
            if (it == slots.end()) throw invalid_argument("action is not in the support of the policy");
            return static_cast<std::size_t>(it - slots.begin());
        }
    };

    void check_support(const ReinsertMove& a) const
    {
        const int n = env_->instance().requests();
        if (a.request < 0 || a.request >= n || a.j < 0 || a.j >= 2 * n - 1)
            throw invalid_argument("action is not in the support of the policy");
    }

    const PickupStage& pickup_stage(int r) const
    {
        auto& st = slot_cache_[static_cast<std::size_t>(r)];
        if (st.ready) return st;
        const auto& inst = env_->instance();
        const int p = inst.pickup_node(r);
        st.reduced = detail::remove_request(inst, current_, r);
        const int m = static_cast<int>(st.reduced.size());
        st.cands.clear(2);
        for (int j = 0; j < m; ++j) {
            const int a = st.reduced[static_cast<std::size_t>(j)];
            const int b = st.reduced[static_cast<std::size_t>((j + 1) % m)];
            const double cost = inst.distance(a, p) + inst.distance(p, b) - inst.distance(a, b);
            st.cands.push(p, a, {cost * len_scale_, inst.distance(a, p) * len_scale_});
        }
        detail::evaluate_stage(*params_, eas_, 1, emb_, st.cands, st.scores);
        st.ready = true;
        return st;
    }

    void delivery_stage(int r, int j, DeliveryStage& out) const
    {
        const auto& inst = env_->instance();
        const auto& pick = pickup_stage(r);
        const auto& red = pick.reduced;
        const int m = static_cast<int>(red.size());
        const int p = inst.pickup_node(r);
        const int d = inst.delivery_node(r);
        env_->delivery_slots(red, j, out.slots);
        out.cands.clear(2);
        for (int k : out.slots) {
            const int pred = k == j ? p : red[static_cast<std::size_t>(k)];
            const int succ = red[static_cast<std::size_t>((k + 1) % m)];
            const double cost = inst.distance(pred, d) + inst.distance(d, succ) - inst.distance(pred, succ);
            out.cands.push(d, pred, {cost * len_scale_, k == j ? 1.0 : 0.0});
        }
        detail::evaluate_stage(*params_, eas_, 2, emb_, out.cands, out.scores);
    }

    const PolicyParams* params_;
    const EasParams* eas_;
    const PdpEnv* env_;
    double len_scale_;
    Tour current_;
    detail::NodeEmbedding emb_;
    detail::StageCandidates request_cands_;
    detail::StageScores request_scores_;
    mutable std::vector<PickupStage> slot_cache_;
};

inline TspPolicyDist make_dist(const PolicyParams& params, const EasParams* eas, const TspEnv& env, const SearchState& s)
{
    return {params, eas, env, s};
}

inline PdpPolicyDist make_dist(const PolicyParams& params, const EasParams* eas, const PdpEnv& env, const SearchState& s)
{
    return {params, eas, env, s};
}

/// Materialized action distribution of the policy at `state`.
template <typename Env>
auto action_dist(const PolicyParams& params, const EasParams* eas, const Env& env, const SearchState& state)
{
    return make_dist(params, eas, env, state).materialize();
}

template <typename Env>
double log_prob(const PolicyParams& params, const EasParams* eas, const Env& env, const SearchState& state,
                const typename Env::action_type& action)
{
    return make_dist(params, eas, env, state).log_prob(action);
}

/// Gradient of log pi(action | state) with respect to theta and phi.
template <typename Env>
Gradient grad_log_prob(const PolicyParams& params, const EasParams* eas, const Env& env, const SearchState& state,
                       const typename Env::action_type& action, GradRequest want = {})
{
    auto grad = Gradient::zeros(params.kind);
    make_dist(params, eas, env, state).accumulate_grad(action, 1.0, want, grad);
    return grad;
}

/// Draws `count` pairwise-distinct actions by sequential sampling without
/// replacement.
template <typename Action>
std::vector<Action> sample_distinct(const ActionDistribution<Action>& dist, std::size_t count, Rng& rng)
{
    if (count > dist.size()) throw invalid_argument("sample_distinct: count exceeds the support size");
    std::vector<Action> out;
    for (auto idx : detail::draw_distinct(dist.probabilities, count, rng)) out.push_back(dist.support[idx]);
    return out;
}

} // namespace lrbs
