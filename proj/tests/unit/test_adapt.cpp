#include <gtest/gtest.h>

#include <lrbs/adapt.hpp>

using namespace lrbs;

namespace {

template <typename Env>
RolloutBatch<typename Env::action_type> record_batch(const Env& env, const PolicyParams& params, const EasParams& eas,
                                                     int rollouts, int steps, std::uint64_t seed)
{
    RolloutBatch<typename Env::action_type> batch;
    batch.phi_version = eas.version;
    for (int r = 0; r < rollouts; ++r) {
        detail::Trajectory<typename Env::action_type> traj;
        auto s = env.reset(seed);
        const double start = s.best_length;
        for (int t = 0; t < steps; ++t) {
            Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(t)}));
            const auto a = make_dist(params, &eas, env, s).sample(rng);
            traj.decisions.push_back({s, a, log_prob(params, &eas, env, s, a)});
            s = env.step(s, a).next_state;
        }
        batch.rollouts.push_back(std::move(traj));
        batch.rewards.push_back(start - s.best_length);
    }
    return batch;
}

EasParams random_phi(const PolicyParams& params, std::uint64_t seed)
{
    auto eas = eas_wrap(params);
    Rng rng(seed);
    for (auto& v : eas.phi) v = 0.5 * (2.0 * rng.uniform() - 1.0);
    return eas;
}

SearchConfig config(int beta, int alpha, int n_s, int t_max, std::uint64_t seed)
{
    SearchConfig c;
    c.beta = beta;
    c.alpha = alpha;
    c.n_s = n_s;
    c.t_max = t_max;
    c.seed = seed;
    return c;
}

bool all_zero(const std::vector<double>& v)
{
    for (double x : v)
        if (x != 0.0) return false;
    return true;
}

} // namespace

TEST(PomoBaseline, MeanOfRewards)
{
    const std::vector<double> r{1.0, 2.0, 6.0};
    EXPECT_DOUBLE_EQ(pomo_baseline(r), 3.0);
    EXPECT_THROW(pomo_baseline(std::vector<double>{}), std::invalid_argument);
}

template <typename Env>
void check_fd(const Env& env, const PolicyParams& params, std::uint64_t seed)
{
    const auto eas = random_phi(params, seed);
    const auto batch = record_batch(env, params, eas, 2, 6, seed);
    const double b = pomo_baseline(batch.rewards);
    const auto grad = eas_gradient(env, params, eas, batch, b);
    const double h = 1e-6;
    for (std::size_t i = 0; i < eas.phi.size(); ++i) {
        auto up = eas, down = eas;
        up.phi[i] += h;
        down.phi[i] -= h;
        const double fd = (eas_surrogate(env, params, up, batch, b) - eas_surrogate(env, params, down, batch, b)) / (2 * h);
        EXPECT_NEAR(grad[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << i;
    }
}

TEST(EasGradient, MatchesFiniteDifferencesTsp)
{
    for (std::uint64_t seed = 0; seed < 4; ++seed)
        check_fd(TspEnv(gen_uniform_tsp(9, seed)), PolicyParams::random(ProblemKind::tsp, seed, 0.5), seed);
}

TEST(EasGradient, MatchesFiniteDifferencesPdp)
{
    for (std::uint64_t seed = 0; seed < 4; ++seed)
        check_fd(PdpEnv(gen_uniform_pdp(4, seed), seed % 2 ? PdpVariant::lifo : PdpVariant::precedence),
                 PolicyParams::random(ProblemKind::pdp, seed, 0.5), seed);
}

TEST(EasGradient, LinearInRewardsAndWorkerIndependent)
{
    TspEnv env(gen_uniform_tsp(12, 3));
    const auto params = PolicyParams::random(ProblemKind::tsp, 3, 0.5);
    const auto eas = random_phi(params, 3);
    auto batch = record_batch(env, params, eas, 6, 5, 3);
    const auto g1 = eas_gradient(env, params, eas, batch, pomo_baseline(batch.rewards));
    EXPECT_EQ(g1, eas_gradient(env, params, eas, batch, pomo_baseline(batch.rewards), 4));
    for (auto& r : batch.rewards) r *= 3.0;
    const auto g3 = eas_gradient(env, params, eas, batch, pomo_baseline(batch.rewards));
    for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g3[i], 3.0 * g1[i], 1e-12 * std::max(1.0, std::abs(g3[i])));

    // Equal rewards carry no signal.
    std::fill(batch.rewards.begin(), batch.rewards.end(), 0.7);
    EXPECT_TRUE(all_zero(eas_gradient(env, params, eas, batch, 0.7)));
}

TEST(EasGradient, RejectsStaleBatches)
{
    TspEnv env(gen_uniform_tsp(8, 1));
    const auto params = PolicyParams::random(ProblemKind::tsp, 1);
    auto eas = eas_wrap(params);
    const auto batch = record_batch(env, params, eas, 2, 3, 1);
    ASSERT_TRUE(apply_eas_update(eas, std::vector<double>(eas.phi.size(), 0.1), 1.0));
    EXPECT_EQ(eas.version, 1u);
    EXPECT_THROW(eas_gradient(env, params, eas, batch, 0.0), staleness_error);
    auto short_rewards = batch;
    short_rewards.phi_version = eas.version;
    short_rewards.rewards.pop_back();
    EXPECT_THROW(eas_gradient(env, params, eas, short_rewards, 0.0), std::invalid_argument);
}

TEST(EasUpdate, SmallStepIncreasesSurrogate)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TspEnv env(gen_uniform_tsp(12, seed));
        const auto params = PolicyParams::random(ProblemKind::tsp, seed, 0.5);
        auto eas = eas_wrap(params);
        const auto batch = record_batch(env, params, eas, 8, 6, seed);
        const double b = pomo_baseline(batch.rewards);
        const auto grad = eas_gradient(env, params, eas, batch, b);
        const double before = eas_surrogate(env, params, eas, batch, b);
        ASSERT_TRUE(apply_eas_update(eas, grad, 1e-4));
        EXPECT_GT(eas_surrogate(env, params, eas, batch, b), before);
    }
}

TEST(EasUpdate, RejectsNonFiniteStep)
{
    auto eas = eas_wrap(PolicyParams::zeros(ProblemKind::tsp));
    std::vector<double> grad(eas.phi.size(), 0.0);
    grad[0] = std::numeric_limits<double>::infinity();
    EXPECT_FALSE(apply_eas_update(eas, grad, 1.0));
    EXPECT_TRUE(all_zero(eas.phi));
    EXPECT_EQ(eas.version, 0u);
}

TEST(AdaptConfigTest, ValidationAndPresets)
{
    AdaptConfig a;
    EXPECT_NO_THROW(a.validate());
    a.learning_rate = -1.0;
    EXPECT_THROW(a.validate(), std::invalid_argument);
    a = {};
    a.reset_batch = 0;
    EXPECT_THROW(a.validate(), std::invalid_argument);
    EXPECT_EQ(default_adapt_config("pdp").n_s_adapt, 10);
    EXPECT_EQ(default_adapt_config("tsp100").n_s_adapt, 0);
    EXPECT_THROW(default_adapt_config("nope"), std::invalid_argument);
}

TEST(OnlineAdaptation, ZeroLearningRateEqualsLrbs)
{
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        TspEnv env(gen_uniform_tsp(20, seed));
        const auto params = PolicyParams::random(ProblemKind::tsp, seed, 0.5);
        const auto cfg = config(4, 2, 5, 60, seed);
        AdaptConfig acfg;
        acfg.learning_rate = 0.0;
        EasParams phi;
        const auto oa = lrbs_oa(env, params, cfg, acfg, &phi);
        const auto plain = lrbs::lrbs(env, params, nullptr, cfg);
        EXPECT_EQ(oa.best_length, plain.best_length);
        EXPECT_EQ(oa.best_solution, plain.best_solution);
        EXPECT_EQ(oa.steps_consumed, plain.steps_consumed);
        EXPECT_TRUE(all_zero(phi.phi));
    }
}

TEST(OnlineAdaptation, UpdatesPhiOnlyAndIsIsolated)
{
    TspEnv a(gen_uniform_tsp(20, 1)), b(gen_uniform_tsp(20, 2));
    const auto params = PolicyParams::random(ProblemKind::tsp, 1, 0.5);
    const auto theta = params.theta;
    const auto cfg = config(4, 2, 5, 60, 1);
    AdaptConfig acfg;
    acfg.learning_rate = 0.05;
    EasParams phi;
    const auto first = lrbs_oa(a, params, cfg, acfg, &phi);
    EXPECT_FALSE(all_zero(phi.phi));
    EXPECT_GT(phi.version, 0u);
    EXPECT_EQ(params.theta, theta);
    EXPECT_EQ(first.best_length, tour_length(a.instance(), first.best_solution));

    const auto alone = lrbs_oa(b, params, cfg, acfg);
    (void)lrbs_oa(a, params, cfg, acfg);
    const auto after = lrbs_oa(b, params, cfg, acfg);
    EXPECT_EQ(alone.best_length, after.best_length);
    EXPECT_EQ(alone.best_solution, after.best_solution);
}

TEST(OnlineAdaptation, PdpAdaptsAllStages)
{
    PdpEnv env(gen_uniform_pdp(6, 4), PdpVariant::lifo);
    const auto params = PolicyParams::random(ProblemKind::pdp, 4, 0.5);
    AdaptConfig acfg = default_adapt_config("pdp");
    acfg.learning_rate = 0.05;
    EasParams phi;
    const auto res = lrbs_oa(env, params, config(4, 2, 5, 60, 4), acfg, &phi);
    EXPECT_FALSE(all_zero(phi.phi));
    EXPECT_TRUE(pdp_feasible(env.instance(), res.best_solution, PdpVariant::lifo));
}

TEST(OnlineAdaptation, RejectsMismatchedPhi)
{
    TspEnv env(gen_uniform_tsp(10, 0));
    const auto params = PolicyParams::zeros(ProblemKind::tsp);
    auto eas = eas_wrap(PolicyParams::zeros(ProblemKind::pdp));
    EXPECT_THROW(lrbs_adapting(env, params, eas, config(2, 2, 2, 10, 0), AdaptConfig{}), std::invalid_argument);
}

TEST(FineTune, EmptySetGivesZeroPhi)
{
    const auto params = PolicyParams::random(ProblemKind::tsp, 0);
    const auto phi = fine_tune(params, std::vector<TspEnv>{}, config(2, 2, 2, 10, 0), AdaptConfig{});
    EXPECT_TRUE(all_zero(phi.phi));
    EXPECT_EQ(phi.phi.size(), params.layout().phi_size());
}

TEST(FineTune, DeterministicAndCarryFlagMatters)
{
    std::vector<TspEnv> envs;
    for (std::uint64_t s = 0; s < 3; ++s) envs.emplace_back(gen_uniform_tsp(15, 100 + s));
    const auto params = PolicyParams::random(ProblemKind::tsp, 5, 0.5);
    const auto cfg = config(4, 2, 5, 40, 5);
    AdaptConfig acfg;
    acfg.learning_rate = 0.05;
    const auto carried = fine_tune(params, envs, cfg, acfg);
    EXPECT_EQ(carried.phi, fine_tune(params, envs, cfg, acfg).phi);
    EXPECT_FALSE(all_zero(carried.phi));

    acfg.ft_carry_phi = false;
    const auto last_only = fine_tune(params, envs, cfg, acfg);
    EXPECT_NE(carried.phi, last_only.phi);
    EXPECT_FALSE(all_zero(last_only.phi));
}
