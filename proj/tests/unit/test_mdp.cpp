#include <gtest/gtest.h>

#include <deque>
#include <random>
#include <set>

#include <lrbs/mdp.hpp>

#include "helpers.hpp"

using namespace lrbs;

namespace {

Tour random_tour(int n, std::mt19937_64& gen)
{
    Tour t(static_cast<std::size_t>(n));
    std::iota(t.begin(), t.end(), 0);
    std::shuffle(t.begin(), t.end(), gen);
    return t;
}

std::vector<ReinsertMove> all_pdp_moves(int n)
{
    std::vector<ReinsertMove> out;
    for (int r = 0; r < n; ++r)
        for (int j = 0; j < 2 * n - 1; ++j)
            for (int k = j; k < 2 * n - 1; ++k) out.push_back({r, j, k});
    return out;
}

} // namespace

TEST(TwoOpt, FigureExample)
{
    const Tour t{1, 2, 3, 4, 5, 6, 7, 8};
    EXPECT_EQ(two_opt_apply(t, 3, 6), (Tour{1, 2, 3, 7, 6, 5, 4, 8}));
    EXPECT_EQ(t, (Tour{1, 2, 3, 4, 5, 6, 7, 8}));
}

TEST(TwoOpt, AdjacentSwap)
{
    EXPECT_EQ(two_opt_apply(Tour{4, 0, 2, 1, 3}, 2, 3), (Tour{4, 0, 1, 2, 3}));
}

TEST(TwoOpt, InvalidIndices)
{
    const Tour t{0, 1, 2, 3, 4};
    EXPECT_THROW(two_opt_apply(t, 2, 2), std::invalid_argument);
    EXPECT_THROW(two_opt_apply(t, 3, 1), std::invalid_argument);
    EXPECT_THROW(two_opt_apply(t, -1, 2), std::invalid_argument);
    EXPECT_THROW(two_opt_apply(t, 0, 5), std::invalid_argument);
}

TEST(TwoOpt, InvolutionFuzz)
{
    std::mt19937_64 gen(11);
    for (int c = 0; c < 10000; ++c) {
        const int n = 3 + static_cast<int>(gen() % 60);
        const auto t = random_tour(n, gen);
        int i = static_cast<int>(gen() % static_cast<unsigned>(n));
        int j = static_cast<int>(gen() % static_cast<unsigned>(n));
        if (i == j) continue;
        if (i > j) std::swap(i, j);
        ASSERT_EQ(two_opt_apply(two_opt_apply(t, i, j), i, j), t);
    }
}

TEST(TspActionSpace, SizeAndMask)
{
    for (int n : {4, 5, 10, 50}) {
        const auto moves = tsp_action_space(n);
        EXPECT_EQ(moves.size(), static_cast<std::size_t>(n * (n - 1) / 2 - 3));
        for (const auto& m : moves) {
            EXPECT_LT(m.i, m.j);
            EXPECT_LT(m.j - m.i + 1, n - 1);
        }
    }
    EXPECT_THROW(tsp_action_space(2), std::invalid_argument);
}

TEST(TspActionSpace, MatchesDistinctCycleEnumeration)
{
    // Every reversal, grouped by the cycle it produces: the action space must
    // reach exactly the cycles other than the original, and nothing else.
    for (int n : {4, 5, 6, 7}) {
        const Tour t = [&] {
            Tour x(static_cast<std::size_t>(n));
            std::iota(x.begin(), x.end(), 0);
            return x;
        }();
        const auto self = canonical_cycle(t);
        std::set<Tour> by_reversal;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const auto c = canonical_cycle(two_opt_apply(t, i, j));
                if (c != self) by_reversal.insert(c);
            }
        std::set<Tour> by_actions;
        for (const auto& m : tsp_action_space(n)) {
            const auto c = canonical_cycle(two_opt_apply(t, m.i, m.j));
            EXPECT_NE(c, self) << "n=" << n << " (" << m.i << "," << m.j << ")";
            by_actions.insert(c);
        }
        EXPECT_EQ(by_actions, by_reversal) << "n=" << n;
    }
}

TEST(TspActionSpace, MaskedPairsNeverChangeLength)
{
    std::mt19937_64 gen(3);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const int n = 4 + static_cast<int>(seed % 20);
        const auto inst = gen_uniform_tsp(n, seed);
        const auto t = random_tour(n, gen);
        const double len = tour_length(inst, t);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                if (!two_opt_degenerate(n, i, j)) continue;
                EXPECT_LE(check::rel_err(tour_length(inst, two_opt_apply(t, i, j)), len), 1e-12);
            }
        for (const auto& m : tsp_action_space(n))
            EXPECT_NE(tour_length(inst, two_opt_apply(t, m.i, m.j)), len);
    }
}

TEST(CanonicalCycle, RotationsAndReflections)
{
    const Tour t{3, 1, 0, 4, 2};
    const auto c = canonical_cycle(t);
    EXPECT_EQ(c.front(), 0);
    EXPECT_EQ(canonical_cycle(Tour{0, 4, 2, 3, 1}), c);
    EXPECT_EQ(canonical_cycle(Tour{2, 4, 0, 1, 3}), c);
    EXPECT_NE(canonical_cycle(Tour{0, 1, 2, 3, 4}), c);
}

TEST(PdpFeasible, Examples)
{
    const auto one = gen_uniform_pdp(1, 0);
    EXPECT_TRUE(pdp_feasible(one, Tour{0, 1, 2}, PdpVariant::precedence));
    EXPECT_TRUE(pdp_feasible(one, Tour{0, 1, 2}, PdpVariant::lifo));
    EXPECT_FALSE(pdp_feasible(one, Tour{0, 2, 1}, PdpVariant::precedence));

    const auto two = gen_uniform_pdp(2, 0);
    EXPECT_TRUE(pdp_feasible(two, Tour{0, 1, 2, 3, 4}, PdpVariant::precedence));
    EXPECT_FALSE(pdp_feasible(two, Tour{0, 1, 2, 3, 4}, PdpVariant::lifo));
    EXPECT_TRUE(pdp_feasible(two, Tour{0, 1, 2, 4, 3}, PdpVariant::lifo));
    EXPECT_FALSE(pdp_feasible(two, Tour{1, 0, 2, 3, 4}, PdpVariant::precedence));
    EXPECT_FALSE(pdp_feasible(two, Tour{0, 1, 2, 3, 3}, PdpVariant::precedence));
    EXPECT_FALSE(pdp_feasible(two, Tour{0, 1, 2, 3}, PdpVariant::precedence));
}

TEST(PdpFeasible, AgreesWithIndependentChecker)
{
    for (int n = 1; n <= 3; ++n) {
        const auto inst = gen_uniform_pdp(n, 1);
        Tour rest(static_cast<std::size_t>(2 * n));
        std::iota(rest.begin(), rest.end(), 1);
        do {
            Tour seq{0};
            seq.insert(seq.end(), rest.begin(), rest.end());
            for (bool lifo : {false, true})
                EXPECT_EQ(pdp_feasible(inst, seq, lifo ? PdpVariant::lifo : PdpVariant::precedence),
                          check::feasible_independent(n, seq, lifo));
        } while (std::next_permutation(rest.begin(), rest.end()));
    }
}

TEST(PdpApply, IdentityReinsertion)
{
    const auto inst = gen_uniform_pdp(3, 2);
    const Tour seq{0, 1, 4, 2, 3, 6, 5};
    // Request 1 (nodes 2 and 5): reduced = [0,1,4,3,6]; pickup after pos 2, delivery after pos 4.
    EXPECT_EQ(pdp_apply(inst, seq, {1, 2, 4}, PdpVariant::precedence), seq);
}

TEST(PdpApply, PrecedenceViolationNamed)
{
    const auto inst = gen_uniform_pdp(2, 2);
    try {
        pdp_apply(inst, Tour{0, 1, 3, 2, 4}, {0, 2, 1}, PdpVariant::precedence);
        FAIL();
    } catch (const feasibility_error& e) {
        EXPECT_EQ(e.constraint(), "precedence");
    }
}

TEST(PdpApply, LifoViolationNamed)
{
    const auto inst = gen_uniform_pdp(2, 2);
    // Reduced [0,2,4]; pickup 1 after depot, delivery after node 2 -> 0,1,2,3,4 crosses.
    try {
        pdp_apply(inst, Tour{0, 2, 4, 1, 3}, {0, 0, 1}, PdpVariant::lifo);
        FAIL();
    } catch (const feasibility_error& e) {
        EXPECT_EQ(e.constraint(), "lifo");
    }
    EXPECT_NO_THROW(pdp_apply(inst, Tour{0, 2, 4, 1, 3}, {0, 0, 1}, PdpVariant::precedence));
}

TEST(PdpApply, OutputsAlwaysFeasibleFuzz)
{
    std::mt19937_64 gen(5);
    for (int c = 0; c < 2000; ++c) {
        const int n = 1 + static_cast<int>(gen() % 6);
        const bool lifo = gen() & 1;
        const auto variant = lifo ? PdpVariant::lifo : PdpVariant::precedence;
        PdpEnv env(gen_uniform_pdp(n, gen()), variant);
        auto s = env.reset(gen());
        const ReinsertMove a{static_cast<int>(gen() % static_cast<unsigned>(n)),
                             static_cast<int>(gen() % static_cast<unsigned>(2 * n - 1)),
                             static_cast<int>(gen() % static_cast<unsigned>(2 * n - 1))};
        try {
            const auto out = pdp_apply(env.instance(), s.current, a, variant);
            EXPECT_TRUE(check::feasible_independent(n, out, lifo));
            EXPECT_TRUE(env.valid(s, a));
        } catch (const feasibility_error&) {
            EXPECT_FALSE(env.valid(s, a));
        }
    }
}

TEST(PdpApply, PrecedenceTwoRequestsAlwaysOrdered)
{
    const auto inst = gen_uniform_pdp(2, 8);
    const Tour start{0, 1, 3, 2, 4};
    for (const auto& a : all_pdp_moves(2)) {
        const auto out = pdp_apply(inst, start, a, PdpVariant::precedence);
        for (int r = 0; r < 2; ++r) {
            const auto p = std::find(out.begin(), out.end(), inst.pickup_node(r));
            const auto d = std::find(out.begin(), out.end(), inst.delivery_node(r));
            EXPECT_LT(p, d);
        }
    }
}

TEST(PdpApply, LifoClosureEqualsFeasibleSet)
{
    const int n = 3;
    PdpEnv env(gen_uniform_pdp(n, 4), PdpVariant::lifo);
    std::set<Tour> reached;
    std::deque<Tour> frontier{env.reset(0).current};
    reached.insert(frontier.front());
    while (!frontier.empty()) {
        const auto cur = frontier.front();
        frontier.pop_front();
        SearchState s = detail::make_state(cur, env.length(cur));
        for (const auto& a : all_pdp_moves(n)) {
            if (!env.valid(s, a)) continue;
            auto next = pdp_apply(env.instance(), cur, a, PdpVariant::lifo);
            if (reached.insert(next).second) frontier.push_back(std::move(next));
        }
    }
    std::set<Tour> feasible;
    Tour rest{1, 2, 3, 4, 5, 6};
    do {
        Tour seq{0};
        seq.insert(seq.end(), rest.begin(), rest.end());
        if (check::feasible_independent(n, seq, true)) feasible.insert(seq);
    } while (std::next_permutation(rest.begin(), rest.end()));
    EXPECT_EQ(reached, feasible);
    EXPECT_EQ(feasible.size(), 30u); // 3! * Catalan(3)
}

TEST(PdpEnvSlots, LifoSlotsAreExactlyTheFeasibleOnes)
{
    std::mt19937_64 gen(9);
    for (int c = 0; c < 300; ++c) {
        const int n = 2 + static_cast<int>(gen() % 5);
        PdpEnv env(gen_uniform_pdp(n, gen()), PdpVariant::lifo);
        const auto s = env.reset(gen());
        for (int r = 0; r < n; ++r)
            for (int j = 0; j < 2 * n - 1; ++j)
                for (int k = j; k < 2 * n - 1; ++k) {
                    bool ok = true;
                    try {
                        pdp_apply(env.instance(), s.current, {r, j, k}, PdpVariant::lifo);
                    } catch (const feasibility_error&) {
                        ok = false;
                    }
                    ASSERT_EQ(env.valid(s, {r, j, k}), ok);
                }
    }
}

TEST(EnvReset, BestEqualsCurrentAndDeterministic)
{
    TspEnv tsp(gen_uniform_tsp(20, 1));
    const auto a = tsp.reset(5);
    EXPECT_EQ(a, tsp.reset(5));
    EXPECT_NE(a.current, tsp.reset(6).current);
    EXPECT_EQ(a.best, a.current);
    EXPECT_EQ(a.best_length, a.current_length);
    EXPECT_EQ(a.step, 0);
    EXPECT_EQ(a.current_length, tour_length(tsp.instance(), a.current));
}

TEST(EnvReset, PdpResetFeasibleFuzz)
{
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const int n = 1 + static_cast<int>(seed % 8);
        const bool lifo = seed % 2;
        PdpEnv env(gen_uniform_pdp(n, seed), lifo ? PdpVariant::lifo : PdpVariant::precedence);
        const auto s = env.reset(seed * 7 + 1);
        ASSERT_TRUE(check::feasible_independent(n, s.current, lifo)) << seed;
        EXPECT_EQ(s.best_length, s.current_length);
    }
}

TEST(EnvStep, WorseningMoveGivesZeroReward)
{
    const Instance sq({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0}});
    TspEnv env(sq);
    auto s = detail::make_state(Tour{0, 4, 1, 2, 3}, tour_length(sq, Tour{0, 4, 1, 2, 3}));
    const auto out = env.step(s, {1, 2});
    EXPECT_GT(out.next_state.current_length, s.current_length);
    EXPECT_EQ(out.reward, 0.0);
    EXPECT_EQ(out.next_state.best, s.best);
    EXPECT_EQ(out.next_state.best_length, s.best_length);
    EXPECT_EQ(out.next_state.step, 1);
}

TEST(EnvStep, ImprovingMoveRewardIsExactDecrease)
{
    const Instance sq({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0}});
    TspEnv env(sq);
    const Tour crossed{0, 4, 2, 1, 3};
    auto s = detail::make_state(crossed, tour_length(sq, crossed));
    const auto out = env.step(s, {2, 3});
    EXPECT_EQ(out.next_state.current, (Tour{0, 4, 1, 2, 3}));
    EXPECT_EQ(out.reward, s.best_length - out.next_state.best_length);
    EXPECT_GT(out.reward, 0.0);
    EXPECT_DOUBLE_EQ(out.next_state.best_length, 4.0);
}

TEST(EnvStep, InvalidActionsRejected)
{
    TspEnv tsp(gen_uniform_tsp(6, 0));
    const auto s = tsp.reset(0);
    EXPECT_THROW(tsp.step(s, {0, 5}), std::invalid_argument);
    EXPECT_THROW(tsp.step(s, {3, 3}), std::invalid_argument);
    EXPECT_THROW(tsp.step(s, {2, 7}), std::invalid_argument);
    EXPECT_THROW(env_step(tsp.instance(), s, {0, 4}), std::invalid_argument);

    PdpEnv pdp(gen_uniform_pdp(2, 0), PdpVariant::precedence);
    const auto p = pdp.reset(0);
    EXPECT_THROW(pdp.step(p, {0, 2, 1}), std::invalid_argument);
    EXPECT_THROW(pdp.step(p, {2, 0, 0}), std::invalid_argument);
}

TEST(EnvStep, StepIsPure)
{
    TspEnv env(gen_uniform_tsp(10, 2));
    const auto s = env.reset(1);
    const auto copy = s;
    (void)env.step(s, {2, 6});
    EXPECT_EQ(s, copy);
}

TEST(EnvStep, TelescopingAndBestInvariants)
{
    std::mt19937_64 gen(21);
    for (int traj = 0; traj < 30; ++traj) {
        const int n = 5 + traj;
        TspEnv env(gen_uniform_tsp(n, static_cast<std::uint64_t>(traj)));
        auto s = env.reset(static_cast<std::uint64_t>(traj));
        const double start = s.best_length;
        const auto moves = tsp_action_space(n);
        double total = 0.0;
        double min_seen = s.current_length;
        for (int t = 0; t < 300; ++t) {
            const auto out = env.step(s, moves[gen() % moves.size()]);
            EXPECT_GE(out.reward, 0.0);
            EXPECT_EQ(out.reward > 0.0, out.next_state.best_length < s.best_length);
            EXPECT_LE(out.next_state.best_length, s.best_length);
            total += out.reward;
            s = out.next_state;
            min_seen = std::min(min_seen, s.current_length);
            EXPECT_EQ(s.best_length, min_seen);
            EXPECT_EQ(s.best_length, tour_length(env.instance(), s.best));
        }
        EXPECT_NEAR(total, start - s.best_length, 1e-9);
    }
}

TEST(EnvStep, AdvanceMatchesStep)
{
    PdpEnv env(gen_uniform_pdp(4, 3), PdpVariant::lifo);
    auto s = env.reset(2);
    std::mt19937_64 gen(2);
    int applied = 0;
    while (applied < 200) {
        const ReinsertMove a{static_cast<int>(gen() % 4), static_cast<int>(gen() % 7), static_cast<int>(gen() % 7)};
        if (!env.valid(s, a)) continue;
        const auto out = env.step(s, a);
        auto copy = s;
        const double r = env.advance(copy, a);
        ASSERT_EQ(copy, out.next_state);
        ASSERT_EQ(r, out.reward);
        s = copy;
        ++applied;
    }
}

TEST(CanonicalLength, SameCycleSameBits)
{
    std::mt19937_64 gen(31);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 5 + rep % 40;
        const TspEnv env(gen_uniform_tsp(n, 1000 + static_cast<std::uint64_t>(rep)));
        const Tour t = random_tour(n, gen);
        const double ref = canonical_length(env, t);
        Tour r = t;
        std::rotate(r.begin(), r.begin() + rep % n, r.end());
        EXPECT_EQ(canonical_length(env, r), ref);
        std::reverse(r.begin(), r.end());
        EXPECT_EQ(canonical_length(env, r), ref);
        EXPECT_NEAR(ref, env.length(t), 1e-12);
    }
}
