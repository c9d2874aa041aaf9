#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "adapt.hpp"
#include "errors.hpp"
#include "instance.hpp"
#include "mdp.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "policy.hpp"
#include "rng.hpp"
#include "search.hpp"

namespace lrbs {

struct TrainConfig {
    ProblemKind kind = ProblemKind::tsp;
    PdpVariant variant = PdpVariant::precedence;
    int instance_size = 20; ///< nodes for TSP, requests for PDP
    int episodes_per_epoch = 64;
    int epochs = 200;
    int episode_length = 200;
    int rollouts_per_instance = 8;
    double learning_rate = 0.05;
    double init_scale = 0.1;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    void validate() const
    {
        if (instance_size < (kind == ProblemKind::tsp ? 5 : 1) || episodes_per_epoch < 1 || epochs < 0 ||
            episode_length < 1 || rollouts_per_instance < 1)
            throw invalid_argument("train config: counts must be positive");
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw invalid_argument("train config: learning rate must be finite and non-negative");
    }
};

struct TrainingCurveRow {
    int epoch = 0;
    double mean_return = 0.0;
    std::optional<double> mean_gap; ///< percent; only when the exact oracle is cheap
};

struct TrainResult {
    PolicyParams params;
    std::vector<TrainingCurveRow> curve;
    bool diverged = false;
};

namespace detail {

/// Adam on a flat vector.
class Adam {
public:
    explicit Adam(std::size_t size, double lr) : lr_(lr), m_(size, 0.0), v_(size, 0.0) {}

    /// Ascent step on `x` along `grad`.
    void ascend(std::vector<double>& x, const std::vector<double>& grad)
    {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, t_);
        const double c2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t i = 0; i < x.size(); ++i) {
            m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
            v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
            x[i] += lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + 1e-8);
        }
    }

private:
    double lr_;
    double b1_ = 0.9;
    double b2_ = 0.999;
    int t_ = 0;
    std::vector<double> m_, v_;
};

inline constexpr int training_gap_max_nodes = 14;

struct Episode {
    double ret = 0.0;
    double best = 0.0;
    std::vector<double> best_before;        ///< best length before each step
    std::vector<std::vector<double>> score; ///< d log pi(a_t | s_t) / d theta per step
};

template <typename Env>
Episode run_episode(const Env& env, const PolicyParams& params, int length, std::uint64_t seed)
{
    Episode ep;
    SearchState s = env.reset(seed);
    const double start = s.best_length;
    auto dist = make_dist(params, nullptr, env, s);
    for (int t = 0; t < length; ++t) {
        if (t > 0) dist.rebind(s);
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
        const auto a = dist.sample(rng);
        auto g = Gradient{std::vector<double>(params.theta.size(), 0.0), {}};
        dist.accumulate_grad(a, 1.0, {true, false}, g);
        ep.score.push_back(std::move(g.theta));
        ep.best_before.push_back(s.best_length);
        env.advance(s, a);
    }
    // Undiscounted sum of improvement rewards telescopes to this.
    ep.ret = start - s.best_length;
    ep.best = s.best_length;
    return ep;
}

template <typename Env, typename MakeEnv>
TrainResult train_impl(const TrainConfig& cfg, MakeEnv&& make_env)
{
    cfg.validate();
    TrainResult out;
    out.params = PolicyParams::random(cfg.kind, cfg.seed, cfg.init_scale);
    Adam adam(out.params.theta.size(), cfg.learning_rate);

    const auto per_epoch = static_cast<std::size_t>(cfg.episodes_per_epoch);
    const auto k = static_cast<std::size_t>(cfg.rollouts_per_instance);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<Env> envs;
        envs.reserve(per_epoch);
        for (std::size_t i = 0; i < per_epoch; ++i)
            envs.push_back(make_env(derive_seed(cfg.seed, {0xda7aULL, static_cast<std::uint64_t>(epoch), i})));

        std::vector<Episode> episodes(per_epoch * k);
        parallel_for(episodes.size(), cfg.workers, [&](std::size_t e) {
            const auto seed = derive_seed(cfg.seed, {0xe915ULL, static_cast<std::uint64_t>(epoch), e});
            episodes[e] = run_episode(envs[e / k], out.params, cfg.episode_length, seed);
        });

        // Fixed-order reduction. Step t of a rollout is credited with the reward still
        // to come, best_t - best_T, less the mean of that quantity over the rollouts
        // of the same instance.
        auto grad = Gradient::zeros(cfg.kind);
        double mean_return = 0.0;
        const double scale = 1.0 / static_cast<double>(episodes.size());
        const auto steps = static_cast<std::size_t>(cfg.episode_length);
        std::vector<double> togo(k);
        for (std::size_t i = 0; i < per_epoch; ++i) {
            for (std::size_t t = 0; t < steps; ++t) {
                for (std::size_t r = 0; r < k; ++r) {
                    const auto& ep = episodes[i * k + r];
                    togo[r] = ep.best_before[t] - ep.best;
                }
                const double b = pomo_baseline(togo);
                for (std::size_t r = 0; r < k; ++r) {
                    const double adv = (togo[r] - b) * scale;
                    if (adv == 0.0) continue;
                    const auto& sc = episodes[i * k + r].score[t];
                    for (std::size_t p = 0; p < sc.size(); ++p) grad.theta[p] += adv * sc[p];
                }
            }
            for (std::size_t r = 0; r < k; ++r) mean_return += episodes[i * k + r].ret * scale;
        }

        TrainingCurveRow row{epoch, mean_return, std::nullopt};
        if constexpr (std::is_same_v<Env, TspEnv>) {
            if (envs.front().node_count() <= training_gap_max_nodes) {
                std::vector<double> gaps(per_epoch);
                parallel_for(per_epoch, cfg.workers, [&](std::size_t i) {
                    double best = std::numeric_limits<double>::infinity();
                    for (std::size_t r = 0; r < k; ++r) best = std::min(best, episodes[i * k + r].best);
                    const double opt = held_karp_optimal(envs[i].instance()).optimal_length;
                    gaps[i] = (best - opt) / opt * 100.0;
                });
                double g = 0.0;
                for (double v : gaps) g += v / static_cast<double>(per_epoch);
                row.mean_gap = g;
            }
        }
        out.curve.push_back(row);

        auto next = out.params.theta;
        adam.ascend(next, grad.theta);
        bool finite = std::isfinite(mean_return);
        for (double v : next) finite = finite && std::isfinite(v);
        if (!finite) {
            out.diverged = true;
            std::cerr << "lrbs: training diverged at epoch " << epoch << "; keeping the last finite weights\n";
            break;
        }
        out.params.theta = std::move(next);
    }
    return out;
}

} // namespace detail

/// REINFORCE on the improvement MDP with reward-to-go and a shared per-instance mean baseline.
inline TrainResult train_base_policy(const TrainConfig& cfg)
{
    if (cfg.kind == ProblemKind::tsp)
        return detail::train_impl<TspEnv>(cfg, [&](std::uint64_t s) { return TspEnv(gen_uniform_tsp(cfg.instance_size, s)); });
    return detail::train_impl<PdpEnv>(
        cfg, [&](std::uint64_t s) { return PdpEnv(gen_uniform_pdp(cfg.instance_size, s), cfg.variant); });
}

// ---------------------------------------------------------------------------
// Evaluation

enum class Method { sample, lrbs, bs, sgbs_c, lrbs_oa, lrbs_ft };

inline const char* to_string(Method m) noexcept
{
    switch (m) {
    case Method::sample: return "sample";
    case Method::lrbs: return "lrbs";
    case Method::bs: return "bs";
    case Method::sgbs_c: return "sgbs_c";
    case Method::lrbs_oa: return "lrbs_oa";
    case Method::lrbs_ft: return "lrbs_ft";
    }
    return "?";
}

inline Method parse_method(const std::string& name)
{
    if (name == "sample" || name == "greedy_sample") return Method::sample;
    if (name == "lrbs") return Method::lrbs;
    if (name == "bs" || name == "beam_search") return Method::bs;
    if (name == "sgbs_c" || name == "sgbs+c") return Method::sgbs_c;
    if (name == "lrbs_oa" || name == "oa") return Method::lrbs_oa;
    if (name == "lrbs_ft" || name == "ft") return Method::lrbs_ft;
    throw invalid_argument("unknown method '" + name + "'");
}

/// Runs one method on one environment. `eas` is used frozen by the non-adapting
/// methods (e.g. phi returned by fine_tune); lrbs_oa starts from zero phi.
template <typename Env>
SearchResult run_method(const Env& env, const PolicyParams& params, const EasParams* eas, Method method,
                        const SearchConfig& cfg, const AdaptConfig& acfg = {})
{
    switch (method) {
    case Method::sample:
        return sample_rollout(env, params, eas, cfg.t_max, cfg.budget(), cfg.seed, cfg.workers);
    case Method::lrbs:
    case Method::lrbs_ft:
        return lrbs::lrbs(env, params, eas, cfg);
    case Method::bs:
        return beam_search(env, params, eas, cfg);
    case Method::sgbs_c:
        return sgbs_c(env, params, eas, cfg);
    case Method::lrbs_oa:
        return lrbs_oa(env, params, cfg, acfg);
    }
    throw invalid_argument("unknown method");
}

struct GapStats {
    double mean_gap = 0.0; ///< percent
    double mean_obj = 0.0;
    double total_seconds = 0.0;
    std::vector<double> objs;
    std::vector<double> gaps;
};

inline double optimality_gap(double obj, double opt) { return (obj - opt) / opt * 100.0; }

/// Reference optimum for one instance, or nullopt when no exact oracle applies.
inline std::optional<double> exact_reference(const Instance& inst)
{
    if (inst.size() > held_karp_max_nodes) return std::nullopt;
    return held_karp_optimal(inst).optimal_length;
}

inline std::optional<double> exact_reference(const PdInstance& inst, PdpVariant variant)
{
    if (inst.requests() > pdp_brute_force_max_requests) return std::nullopt;
    return brute_force_pdp_optimal(inst, variant).optimal_length;
}

/// Mean optimality gap of `method` over a dataset. Instance i is searched with
/// seed derive_seed(cfg.seed, {i}). Missing references are filled from the
/// exact oracle when the size allows; otherwise this throws.
inline GapStats evaluate_policy(const PolicyParams& params, const std::vector<Instance>& dataset, Method method,
                                const SearchConfig& cfg, std::vector<std::optional<double>> references = {},
                                const EasParams* eas = nullptr, const AdaptConfig& acfg = {})
{
    if (dataset.empty()) throw invalid_argument("evaluate_policy: empty dataset");
    references.resize(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (!references[i]) references[i] = exact_reference(dataset[i]);
        if (!references[i])
            throw invalid_argument("evaluate_policy: no reference cost for instance " + std::to_string(i) +
                                   " and it is too large for the exact oracle");
    }
    GapStats stats;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        SearchConfig run = cfg;
        run.seed = derive_seed(cfg.seed, {i});
        const TspEnv env(dataset[i]);
        const auto res = run_method(env, params, eas, method, run, acfg);
        const double obj = canonical_length(env, res.best_solution);
        stats.objs.push_back(obj);
        stats.gaps.push_back(optimality_gap(obj, *references[i]));
        stats.total_seconds += res.wall_seconds;
    }
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        stats.mean_obj += stats.objs[i] / static_cast<double>(dataset.size());
        stats.mean_gap += stats.gaps[i] / static_cast<double>(dataset.size());
    }
    return stats;
}

} // namespace lrbs
