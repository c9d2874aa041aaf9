#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"
#include "mdp.hpp"
#include "parallel.hpp"
#include "policy.hpp"
#include "rng.hpp"

namespace lrbs {

/// Parameters of the beam searches. The search budget is alpha * beta.
struct SearchConfig {
    int alpha = 1;          ///< children sampled per beam node
    int beta = 1;           ///< beam width
    int n_s = 20;           ///< steps per rollout block, the expansion step included
    int t_max = 5000;       ///< depth budget
    std::uint64_t seed = 0;
    std::size_t workers = 1; ///< 0 = all hardware threads; never changes results
    bool dedup = true;      ///< collapse candidates whose current solutions coincide

    [[nodiscard]] int budget() const noexcept { return alpha * beta; }

    void validate() const
    {
        if (alpha < 1 || beta < 1) throw invalid_argument("search config: alpha and beta must be at least 1");
        if (n_s < 1) throw invalid_argument("search config: n_s must be at least 1");
        if (t_max < n_s) throw invalid_argument("search config: t_max must be at least n_s");
    }

    friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

/// Beam contents after one selection.
struct TraceEntry {
    int depth = 0;
    double best_length = 0.0;
    std::vector<double> beam_best;
    std::vector<double> beam_current;

    friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct SearchResult {
    Tour best_solution;
    double best_length = std::numeric_limits<double>::infinity();
    long long steps_consumed = 0;
    double wall_seconds = 0.0;
    std::vector<TraceEntry> trace;
    std::vector<SearchState> final_beam;
    bool adaptation_aborted = false;
};

/// Search presets, keyed by dataset tag.
inline SearchConfig default_config(const std::string& dataset)
{
    SearchConfig c;
    c.n_s = 20;
    c.t_max = 5000;
    if (dataset == "tsp100" || dataset == "tsp150") {
        c.beta = 60;
        c.alpha = 1;
    }
    else if (dataset == "tsp200") {
        c.beta = 30;
        c.alpha = 2;
    }
    else if (dataset == "tsp500") {
        c.beta = 15;
        c.alpha = 4;
    }
    else if (dataset == "tsp1000") {
        c.beta = 5;
        c.alpha = 12;
    }
    else if (dataset == "pdp") {
        // Budget 40 for pickup-and-delivery.
        c.beta = 40;
        c.alpha = 1;
    }
    else {
        throw invalid_argument("unknown dataset preset '" + dataset + "'");
    }
    return c;
}

namespace detail {

/// Stream-key tag that keeps child-evaluation rollouts of sgbs_c apart from the
/// expansion streams of the same depth.
inline constexpr std::uint64_t sgbs_rollout_tag = std::uint64_t{1} << 40;

/// One recorded decision of a rollout block.
template <typename Action>
struct Decision {
    SearchState state;
    Action action;
    double log_prob = 0.0;
};

/// Optional per-candidate recording used by adaptation.
template <typename Action>
struct Trajectory {
    std::vector<Decision<Action>> decisions;
};

inline auto now() { return std::chrono::steady_clock::now(); }

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(now() - t0).count();
}

/// Advances `s` by `steps` policy samples. Step from depth t uses the stream (seed, t, slot).
template <typename Env>
void rollout(const Env& env, const PolicyParams& params, const EasParams* eas, SearchState& s, int steps,
             std::uint64_t seed, std::uint64_t slot, Trajectory<typename Env::action_type>* record)
{
    if (steps <= 0) return;
    auto dist = make_dist(params, eas, env, s);
    for (int n = 0; n < steps; ++n) {
        if (n > 0) dist.rebind(s);
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(s.step), slot}));
        auto a = dist.sample(rng);
        if (record) record->decisions.push_back({s, a, dist.log_prob(a)});
        env.advance(s, a);
    }
}

/// Expansion: `count` distinct children of beam node `slot`, each advanced one step.
template <typename Env>
std::vector<std::pair<typename Env::action_type, double>> expand(const Env& env, const PolicyParams& params,
                                                                 const EasParams* eas, const SearchState& s,
                                                                 std::size_t count, std::uint64_t seed,
                                                                 std::uint64_t slot, bool cap_to_support)
{
    auto dist = make_dist(params, eas, env, s);
    if (cap_to_support) count = std::min(count, dist.support_size());
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(s.step), slot}));
    std::vector<std::pair<typename Env::action_type, double>> out;
    for (const auto& a : dist.sample_distinct(count, rng)) out.emplace_back(a, dist.log_prob(a));
    return out;
}

struct Candidate {
    SearchState state;     ///< state handed to the next beam
    double best = 0.0;     ///< objective: best length seen along its path
    double current = 0.0;  ///< tie-breaker
    std::size_t order = 0; ///< insertion order, final tie-breaker
    Tour best_tour;        ///< solution achieving `best`
};

/// Ranks candidates by (best, current, order), drops duplicate solutions if asked
/// and keeps at most `beta`. The beam shrinks rather than padding.
template <typename Env>
std::vector<std::size_t> select(const Env& env, const std::vector<Candidate>& cands, int beta, bool dedup)
{
    std::vector<std::size_t> idx(cands.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = cands[a];
        const auto& y = cands[b];
        if (x.best != y.best) return x.best < y.best;
        if (x.current != y.current) return x.current < y.current;
        return x.order < y.order;
    });
    std::vector<std::size_t> chosen;
    std::set<Tour> seen;
    for (auto i : idx) {
        if (static_cast<int>(chosen.size()) >= beta) break;
        if (dedup && !seen.insert(env.canonical(cands[i].state.current)).second) continue;
        chosen.push_back(i);
    }
    return chosen;
}

} // namespace detail

/// Called after every expansion block with each candidate's recorded decisions
/// and its best length before and after the block. Online adaptation updates
/// the adaptation weights here, between blocks.
template <typename Action>
struct BlockObserver {
    virtual ~BlockObserver() = default;
    virtual void on_block(const std::vector<detail::Trajectory<Action>>& trajectories,
                          const std::vector<double>& start_best, const std::vector<double>& end_best) = 0;
};

namespace detail {

/// Shared driver of lrbs / beam_search (n_s = 1) and, with `child_select`,
/// sgbs_c. `eas` may be updated by the observer between blocks.
template <typename Env>
SearchResult beam_driver(const Env& env, const PolicyParams& params, const EasParams* eas, const SearchConfig& cfg,
                         bool child_select, BlockObserver<typename Env::action_type>* observer)
{
    using Action = typename Env::action_type;
    cfg.validate();
    params.validate();
    const auto t0 = now();

    SearchResult result;
    const SearchState root = env.reset(cfg.seed);
    result.best_solution = root.best;
    result.best_length = root.best_length;

    std::vector<SearchState> beam{root};
    int depth = 0;
    bool first = true;
    const auto seed = cfg.seed;

    while (depth < cfg.t_max) {
        // Expansion. The first expansion draws alpha*beta children of the root,
        // capped at the number of available moves.
        const std::size_t per_node = first ? static_cast<std::size_t>(cfg.budget()) : static_cast<std::size_t>(cfg.alpha);
        std::vector<std::vector<std::pair<Action, double>>> children(beam.size());
        parallel_for(beam.size(), cfg.workers, [&](std::size_t b) {
            children[b] = expand(env, params, eas, beam[b], per_node, seed, b, first);
        });

        // Flatten in (beam node, child) order; candidate index = slot of its rollout streams.
        std::vector<std::pair<std::size_t, std::size_t>> slots;
        for (std::size_t b = 0; b < beam.size(); ++b)
            for (std::size_t a = 0; a < children[b].size(); ++a) slots.emplace_back(b, a);

        const int block = child_select ? 1 : std::min(cfg.n_s, cfg.t_max - depth);
        const int extra = child_select ? std::min(cfg.n_s - 1, cfg.t_max - depth - 1) : block - 1;
        const bool recording = observer != nullptr;

        std::vector<Candidate> cands(slots.size());
        std::vector<Trajectory<Action>> traj(recording ? slots.size() : 0);
        std::vector<long long> steps(slots.size(), 0);
        parallel_for(slots.size(), cfg.workers, [&](std::size_t c) {
            const auto [b, a] = slots[c];
            SearchState s = beam[b];
            const auto& [action, logp] = children[b][a];
            if (recording) traj[c].decisions.push_back({s, action, logp});
            env.advance(s, action);
            auto& cand = cands[c];
            cand.order = c;
            if (child_select) {
                SearchState probe = s;
                rollout(env, params, eas, probe, extra, seed, sgbs_rollout_tag + c, recording ? &traj[c] : nullptr);
                cand.best = probe.best_length;
                cand.current = probe.current_length;
                cand.best_tour = std::move(probe.best);
                cand.state = std::move(s);
            }
            else {
                rollout(env, params, eas, s, extra, seed, c, recording ? &traj[c] : nullptr);
                cand.best = s.best_length;
                cand.current = s.current_length;
                cand.best_tour = s.best;
                cand.state = std::move(s);
            }
            steps[c] = 1 + extra;
        });

        for (std::size_t c = 0; c < cands.size(); ++c) {
            result.steps_consumed += steps[c];
            if (cands[c].best < result.best_length) {
                result.best_length = cands[c].best;
                result.best_solution = cands[c].best_tour;
            }
        }

        if (observer) {
            std::vector<double> start_best(slots.size()), end_best(slots.size());
            for (std::size_t c = 0; c < slots.size(); ++c) {
                start_best[c] = beam[slots[c].first].best_length;
                end_best[c] = cands[c].best;
            }
            observer->on_block(traj, start_best, end_best);
        }

        const auto chosen = select(env, cands, cfg.beta, cfg.dedup);
        std::vector<SearchState> next;
        next.reserve(chosen.size());
        TraceEntry entry;
        for (auto i : chosen) {
            entry.beam_best.push_back(cands[i].state.best_length);
            entry.beam_current.push_back(cands[i].state.current_length);
            next.push_back(std::move(cands[i].state));
        }
        beam = std::move(next);
        depth += block;
        first = false;
        entry.depth = depth;
        entry.best_length = result.best_length;
        result.trace.push_back(std::move(entry));
    }

    result.final_beam = std::move(beam);
    result.wall_seconds = seconds_since(t0);
    return result;
}

} // namespace detail

/// Limited Rollout Beam Search.
template <typename Env>
SearchResult lrbs(const Env& env, const PolicyParams& params, const EasParams* eas, const SearchConfig& cfg)
{
    return detail::beam_driver(env, params, eas, cfg, false, nullptr);
}

/// Plain beam search: expansion followed immediately by selection.
template <typename Env>
SearchResult beam_search(const Env& env, const PolicyParams& params, const EasParams* eas, SearchConfig cfg)
{
    cfg.n_s = 1;
    return detail::beam_driver(env, params, eas, cfg, false, nullptr);
}

/// Beam search whose children are scored by limited rollouts but whose beam
/// advances one level per iteration.
template <typename Env>
SearchResult sgbs_c(const Env& env, const PolicyParams& params, const EasParams* eas, const SearchConfig& cfg)
{
    return detail::beam_driver(env, params, eas, cfg, true, nullptr);
}

/// Independent policy trajectories from a shared initial solution; best over all.
template <typename Env>
SearchResult sample_rollout(const Env& env, const PolicyParams& params, const EasParams* eas, int t_max,
                            int num_parallel, std::uint64_t seed, std::size_t workers = 1)
{
    if (num_parallel < 1) throw invalid_argument("sample_rollout: num_parallel must be at least 1");
    if (t_max < 0) throw invalid_argument("sample_rollout: t_max must be non-negative");
    params.validate();
    const auto t0 = detail::now();
    const SearchState root = env.reset(seed);
    std::vector<SearchState> ends(static_cast<std::size_t>(num_parallel), root);
    parallel_for(ends.size(), workers, [&](std::size_t p) {
        detail::rollout(env, params, eas, ends[p], t_max, seed, p, nullptr);
    });

    SearchResult result;
    result.best_solution = root.best;
    result.best_length = root.best_length;
    for (const auto& s : ends) {
        result.steps_consumed += s.step;
        if (s.best_length < result.best_length) {
            result.best_length = s.best_length;
            result.best_solution = s.best;
        }
    }
    result.final_beam = std::move(ends);
    result.wall_seconds = detail::seconds_since(t0);
    return result;
}

} // namespace lrbs
