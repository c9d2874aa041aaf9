#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "policy.hpp"
#include "rng.hpp"
#include "search.hpp"

namespace lrbs {

struct AdaptConfig {
    double learning_rate = 1e-3;
    int n_s_adapt = 0;              ///< rollout length while adapting; 0 keeps the search config's n_s
    bool reset_per_instance = true; ///< online mode: fresh phi for every instance
    int reset_batch = 1;            ///< online mode with reset_per_instance off: instances sharing one phi
    int ft_dataset_size = 0;
    bool ft_carry_phi = true;       ///< fine-tuning: keep phi across instances (false resets, keeping the last instance's phi)

    void validate() const
    {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw invalid_argument("adapt config: learning rate must be finite and non-negative");
        if (n_s_adapt < 0 || reset_batch < 1 || ft_dataset_size < 0) throw invalid_argument("adapt config: bad count");
    }
};

/// Rollouts of one expansion block with their recorded decisions.
template <typename Action>
struct RolloutBatch {
    std::vector<detail::Trajectory<Action>> rollouts;
    std::vector<double> rewards;   ///< best-length improvement over each rollout block
    std::uint64_t phi_version = 0; ///< EasParams::version the log-probabilities were recorded under
};

/// Shared mean baseline over a group of rollouts.
inline double pomo_baseline(std::span<const double> rewards)
{
    if (rewards.empty()) throw invalid_argument("pomo_baseline: empty reward list");
    return std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
}

/// Advantage-weighted log-likelihood of a batch:
/// (1/B) sum_r (R_r - b) sum_t log pi_phi(a_t | s_t).
template <typename Env>
double eas_surrogate(const Env& env, const PolicyParams& params, const EasParams& eas,
                     const RolloutBatch<typename Env::action_type>& batch, double baseline)
{
    double total = 0.0;
    for (std::size_t r = 0; r < batch.rollouts.size(); ++r) {
        double lp = 0.0;
        for (const auto& d : batch.rollouts[r].decisions) lp += log_prob(params, &eas, env, d.state, d.action);
        total += (batch.rewards[r] - baseline) * lp;
    }
    return batch.rollouts.empty() ? 0.0 : total / static_cast<double>(batch.rollouts.size());
}

/// Gradient of eas_surrogate with respect to phi only.
template <typename Env>
std::vector<double> eas_gradient(const Env& env, const PolicyParams& params, const EasParams& eas,
                                 const RolloutBatch<typename Env::action_type>& batch, double baseline,
                                 std::size_t workers = 1)
{
    if (batch.phi_version != eas.version)
        throw staleness_error("eas_gradient: log-probabilities were recorded under an older phi");
    if (batch.rewards.size() != batch.rollouts.size()) throw invalid_argument("eas_gradient: reward count mismatch");
    const std::size_t count = batch.rollouts.size();
    std::vector<Gradient> parts(count, Gradient{{}, std::vector<double>(eas.phi.size(), 0.0)});
    parallel_for(count, workers, [&](std::size_t r) {
        const double adv = batch.rewards[r] - baseline;
        if (adv == 0.0) return;
        for (const auto& d : batch.rollouts[r].decisions)
            make_dist(params, &eas, env, d.state).accumulate_grad(d.action, adv, {false, true}, parts[r]);
    });
    std::vector<double> grad(eas.phi.size(), 0.0);
    if (count == 0) return grad;
    for (const auto& part : parts)
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += part.phi[i];
    for (auto& g : grad) g /= static_cast<double>(count);
    return grad;
}

/// One plain gradient-ascent step. Returns false, leaving phi untouched, if the
/// step would produce non-finite weights.
inline bool apply_eas_update(EasParams& eas, std::span<const double> grad, double learning_rate)
{
    std::vector<double> next(eas.phi);
    for (std::size_t i = 0; i < next.size(); ++i) {
        next[i] += learning_rate * grad[i];
        if (!std::isfinite(next[i])) return false;
    }
    eas.phi = std::move(next);
    ++eas.version;
    return true;
}

namespace detail {

/// Block observer that turns every expansion block into one phi update.
template <typename Env>
class EasUpdater final : public BlockObserver<typename Env::action_type> {
public:
    using Action = typename Env::action_type;

    EasUpdater(const Env& env, const PolicyParams& params, EasParams& eas, double lr, std::size_t workers)
        : env_(env), params_(params), eas_(eas), lr_(lr), workers_(workers) {}

    void on_block(const std::vector<Trajectory<Action>>& trajectories, const std::vector<double>& start_best,
                  const std::vector<double>& end_best) override
    {
        if (aborted_ || trajectories.empty()) return;
        RolloutBatch<Action> batch{trajectories, {}, eas_.version};
        for (std::size_t c = 0; c < trajectories.size(); ++c) batch.rewards.push_back(start_best[c] - end_best[c]);
        const double baseline = pomo_baseline(batch.rewards);
        bool any = false;
        for (double r : batch.rewards) any = any || r != baseline;
        if (!any || lr_ == 0.0) return;
        auto grad = eas_gradient(env_, params_, eas_, batch, baseline, workers_);
        if (!apply_eas_update(eas_, grad, lr_)) {
            aborted_ = true;
            std::cerr << "lrbs: adaptation weights overflowed; continuing with frozen weights\n";
        }
    }

    [[nodiscard]] bool aborted() const noexcept { return aborted_; }

private:
    const Env& env_;
    const PolicyParams& params_;
    EasParams& eas_;
    double lr_;
    std::size_t workers_;
    bool aborted_ = false;
};

} // namespace detail

/// LRBS with one phi update after every expansion block, starting from the given phi.
template <typename Env>
SearchResult lrbs_adapting(const Env& env, const PolicyParams& params, EasParams& eas, SearchConfig cfg,
                           const AdaptConfig& acfg)
{
    acfg.validate();
    if (eas.kind != params.kind || eas.phi.size() != params.layout().phi_size())
        throw invalid_argument("adaptation weights do not match the policy");
    if (acfg.n_s_adapt > 0) cfg.n_s = acfg.n_s_adapt;
    const std::vector<double> theta_before = params.theta;
    detail::EasUpdater<Env> updater(env, params, eas, acfg.learning_rate, cfg.workers);
    auto result = detail::beam_driver(env, params, &eas, cfg, false, &updater);
    result.adaptation_aborted = updater.aborted();
    if (params.theta != theta_before) throw std::logic_error("base policy weights changed during adaptation");
    return result;
}

/// Online adaptation: fresh zero phi, adapted while solving this one instance.
template <typename Env>
SearchResult lrbs_oa(const Env& env, const PolicyParams& params, const SearchConfig& cfg, const AdaptConfig& acfg,
                     EasParams* final_phi = nullptr)
{
    auto eas = eas_wrap(params);
    auto result = lrbs_adapting(env, params, eas, cfg, acfg);
    if (final_phi) *final_phi = std::move(eas);
    return result;
}

/// Offline fine-tuning: solves each instance once with adapting LRBS, carrying
/// phi across instances. Returns phi for frozen use at test time.
template <typename Env>
EasParams fine_tune(const PolicyParams& params, const std::vector<Env>& ft_envs, const SearchConfig& cfg,
                    const AdaptConfig& acfg)
{
    auto eas = eas_wrap(params);
    for (std::size_t i = 0; i < ft_envs.size(); ++i) {
        if (!acfg.ft_carry_phi) eas = eas_wrap(params);
        SearchConfig run = cfg;
        run.seed = derive_seed(cfg.seed, {0xf1e7ULL, i});
        const auto result = lrbs_adapting(ft_envs[i], params, eas, run, acfg);
        if (result.adaptation_aborted) break;
    }
    return eas;
}

/// Adaptation preset for a dataset tag: PDP adapts with 10-step rollouts.
inline AdaptConfig default_adapt_config(const std::string& dataset)
{
    (void)default_config(dataset); // rejects unknown tags
    AdaptConfig a;
    if (dataset == "pdp") a.n_s_adapt = 10;
    return a;
}

} // namespace lrbs
