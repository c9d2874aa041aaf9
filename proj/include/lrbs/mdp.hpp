#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "instance.hpp"
#include "rng.hpp"

namespace lrbs {

/// State of the improvement process: the current solution and the best one
/// seen on the path that led here.
struct SearchState {
    Tour current;
    Tour best;
    double current_length = 0.0;
    double best_length = 0.0;
    int step = 0;

    friend bool operator==(const SearchState&, const SearchState&) = default;
};

/// Reverse the tour segment at positions i..j (inclusive).
struct TwoOptMove {
    int i = 0;
    int j = 0;

    friend bool operator==(const TwoOptMove&, const TwoOptMove&) = default;
};

/// Remove both nodes of `request`, then put the pickup after position j and the
/// delivery after position k of the reduced sequence. k == j places the delivery
/// directly after the pickup.
struct ReinsertMove {
    int request = 0;
    int j = 0;
    int k = 0;

    friend bool operator==(const ReinsertMove&, const ReinsertMove&) = default;
};

struct StepOutcome {
    SearchState next_state;
    double reward = 0.0;
};

enum class PdpVariant { precedence, lifo };

inline const char* to_string(PdpVariant v) noexcept { return v == PdpVariant::lifo ? "lifo" : "precedence"; }

// ---------------------------------------------------------------------------
// 2-opt

inline Tour two_opt_apply(std::span<const int> tour, int i, int j)
{
    const int n = static_cast<int>(tour.size());
    if (i < 0 || j >= n || i >= j) throw invalid_argument("two_opt_apply: need 0 <= i < j <= N-1");
    Tour out(tour.begin(), tour.end());
    std::reverse(out.begin() + i, out.begin() + j + 1);
    return out;
}

/// A reversal of length >= N-1 maps a cycle onto itself (it is the mirror of a
/// reversal of length <= 1), so such pairs are masked.
constexpr bool two_opt_degenerate(int n, int i, int j) noexcept { return i >= j || j - i + 1 >= n - 1; }

inline std::vector<TwoOptMove> tsp_action_space(int n)
{
    if (n < 3) throw invalid_argument("tsp_action_space: n must be at least 3");
    std::vector<TwoOptMove> moves;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (!two_opt_degenerate(n, i, j)) moves.push_back({i, j});
    return moves;
}

/// Rotates to start at node 0 and fixes the orientation, so two tours describe
/// the same cycle iff their canonical forms are equal.
inline Tour canonical_cycle(std::span<const int> tour)
{
    const std::size_t n = tour.size();
    Tour out(n);
    const auto start = static_cast<std::size_t>(std::find(tour.begin(), tour.end(), 0) - tour.begin());
    const bool forward = n < 3 || tour[(start + 1) % n] <= tour[(start + n - 1) % n];
    for (std::size_t s = 0; s < n; ++s) out[s] = forward ? tour[(start + s) % n] : tour[(start + n - s) % n];
    return out;
}

// ---------------------------------------------------------------------------
// Pickup and delivery

inline bool pdp_feasible(const PdInstance& instance, std::span<const int> solution, PdpVariant variant)
{
    const int size = instance.size();
    if (static_cast<int>(solution.size()) != size || solution.empty() || solution[0] != 0) return false;
    std::vector<char> seen(static_cast<std::size_t>(size), 0);
    std::vector<int> stack;
    for (std::size_t pos = 0; pos < solution.size(); ++pos) {
        const int v = solution[pos];
        if (v < 0 || v >= size || seen[static_cast<std::size_t>(v)]) return false;
        seen[static_cast<std::size_t>(v)] = 1;
        if (pos == 0) continue;
        if (v == 0) return false;
        const int r = instance.request_of(v);
        if (instance.is_pickup(v)) {
            stack.push_back(r);
        }
        else {
            if (!seen[static_cast<std::size_t>(instance.pickup_node(r))]) return false;
            if (variant == PdpVariant::lifo) {
                if (stack.empty() || stack.back() != r) return false;
                stack.pop_back();
            }
        }
    }
    return true;
}

namespace detail {

/// The sequence with both nodes of `request` removed.
inline Tour remove_request(const PdInstance& instance, std::span<const int> solution, int request)
{
    const int p = instance.pickup_node(request);
    const int d = instance.delivery_node(request);
    Tour reduced;
    reduced.reserve(solution.size() - 2);
    for (int v : solution)
        if (v != p && v != d) reduced.push_back(v);
    return reduced;
}

/// Positions k >= j such that reduced[j+1..k] is balanced (every pickup matched
/// by its delivery inside the segment, in stack order). Assumes `reduced` is
/// itself LIFO-feasible.
inline void lifo_delivery_slots(const PdInstance& instance, std::span<const int> reduced, int j, std::vector<int>& out)
{
    out.clear();
    out.push_back(j);
    int depth = 0;
    for (int pos = j + 1; pos < static_cast<int>(reduced.size()); ++pos) {
        depth += instance.is_pickup(reduced[static_cast<std::size_t>(pos)]) ? 1 : -1;
        if (depth < 0) break;
        if (depth == 0) out.push_back(pos);
    }
}

inline Tour insert_request(std::span<const int> reduced, int pickup, int delivery, int j, int k)
{
    Tour out;
    out.reserve(reduced.size() + 2);
    out.insert(out.end(), reduced.begin(), reduced.begin() + j + 1);
    out.push_back(pickup);
    out.insert(out.end(), reduced.begin() + j + 1, reduced.begin() + k + 1);
    out.push_back(delivery);
    out.insert(out.end(), reduced.begin() + k + 1, reduced.end());
    return out;
}

} // namespace detail

inline Tour pdp_apply(const PdInstance& instance, std::span<const int> solution, const ReinsertMove& move,
                      PdpVariant variant)
{
    const int n = instance.requests();
    const int m = 2 * n - 1;
    if (static_cast<int>(solution.size()) != instance.size()) throw invalid_argument("pdp_apply: wrong sequence size");
    if (move.request < 0 || move.request >= n) throw invalid_argument("pdp_apply: request out of range");
    if (move.j < 0 || move.j >= m || move.k < 0 || move.k >= m) throw invalid_argument("pdp_apply: position out of range");
    if (move.k < move.j) throw feasibility_error("precedence", "delivery inserted before its pickup");
    auto reduced = detail::remove_request(instance, solution, move.request);
    auto out = detail::insert_request(reduced, instance.pickup_node(move.request), instance.delivery_node(move.request),
                                      move.j, move.k);
    if (!pdp_feasible(instance, out, PdpVariant::precedence))
        throw feasibility_error("precedence", "resulting sequence breaks pickup-before-delivery");
    if (variant == PdpVariant::lifo && !pdp_feasible(instance, out, PdpVariant::lifo))
        throw feasibility_error("lifo", "delivery is not at the top of the load stack");
    return out;
}

// ---------------------------------------------------------------------------
// Environments

namespace detail {

inline SearchState make_state(Tour start, double length)
{
    SearchState s;
    s.best = start;
    s.current = std::move(start);
    s.current_length = s.best_length = length;
    return s;
}

/// Best-so-far bookkeeping shared by both environments. Returns the reward.
inline double commit_step(SearchState& s, double new_length)
{
    s.current_length = new_length;
    ++s.step;
    if (new_length < s.best_length) {
        const double reward = s.best_length - new_length;
        s.best = s.current;
        s.best_length = new_length;
        return reward;
    }
    return 0.0;
}

} // namespace detail

/// Improvement MDP over 2-opt moves.
class TspEnv {
public:
    using instance_type = Instance;
    using action_type = TwoOptMove;

    explicit TspEnv(Instance instance) : instance_(std::move(instance)) {}

    [[nodiscard]] const Instance& instance() const noexcept { return instance_; }
    [[nodiscard]] int node_count() const noexcept { return instance_.size(); }
    [[nodiscard]] double length(std::span<const int> tour) const noexcept { return instance_.cycle_length(tour); }

    /// Uniformly random permutation.
    [[nodiscard]] SearchState reset(std::uint64_t seed) const
    {
        Tour t(static_cast<std::size_t>(node_count()));
        std::iota(t.begin(), t.end(), 0);
        Rng rng(derive_seed(seed, {0x7e5e7ULL}));
        for (std::size_t i = t.size(); i > 1; --i) std::swap(t[i - 1], t[rng.below(i)]);
        const double len = length(t);
        return detail::make_state(std::move(t), len);
    }

    [[nodiscard]] bool valid(const SearchState&, const TwoOptMove& a) const noexcept
    {
        return a.i >= 0 && a.j < node_count() && !two_opt_degenerate(node_count(), a.i, a.j);
    }

    /// Hot-path transition; assumes the action is valid.
    double advance(SearchState& s, const TwoOptMove& a) const
    {
        std::reverse(s.current.begin() + a.i, s.current.begin() + a.j + 1);
        return detail::commit_step(s, length(s.current));
    }

    [[nodiscard]] StepOutcome step(const SearchState& s, const TwoOptMove& a) const
    {
        if (!valid(s, a)) throw invalid_argument("env_step: 2-opt move out of range or degenerate");
        StepOutcome out{s, 0.0};
        out.reward = advance(out.next_state, a);
        return out;
    }

    [[nodiscard]] Tour canonical(std::span<const int> tour) const { return canonical_cycle(tour); }

private:
    Instance instance_;
};

/// Improvement MDP over removal-reinsertion moves for PDTSP / PDTSPL.
class PdpEnv {
public:
    using instance_type = PdInstance;
    using action_type = ReinsertMove;

    PdpEnv(PdInstance instance, PdpVariant variant) : instance_(std::move(instance)), variant_(variant) {}

    [[nodiscard]] const PdInstance& instance() const noexcept { return instance_; }
    [[nodiscard]] PdpVariant variant() const noexcept { return variant_; }
    [[nodiscard]] int node_count() const noexcept { return instance_.size(); }
    [[nodiscard]] double length(std::span<const int> tour) const noexcept { return instance_.cycle_length(tour); }

    /// Random feasible sequence: requests inserted in random order, each at a
    /// uniformly chosen pickup slot and a uniformly chosen feasible delivery slot.
    [[nodiscard]] SearchState reset(std::uint64_t seed) const
    {
        Rng rng(derive_seed(seed, {0x7e5e7ULL}));
        const int n = instance_.requests();
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        Tour seq{0};
        std::vector<int> slots;
        for (int r : order) {
            const int j = static_cast<int>(rng.below(seq.size()));
            delivery_slots(seq, j, slots);
            const int k = slots[rng.below(slots.size())];
            seq = detail::insert_request(seq, instance_.pickup_node(r), instance_.delivery_node(r), j, k);
        }
        const double len = length(seq);
        return detail::make_state(std::move(seq), len);
    }

    /// Feasible delivery slots k for a pickup placed after reduced[j].
    void delivery_slots(std::span<const int> reduced, int j, std::vector<int>& out) const
    {
        if (variant_ == PdpVariant::lifo) {
            detail::lifo_delivery_slots(instance_, reduced, j, out);
            return;
        }
        out.clear();
        for (int k = j; k < static_cast<int>(reduced.size()); ++k) out.push_back(k);
    }

    [[nodiscard]] bool valid(const SearchState& s, const ReinsertMove& a) const
    {
        const int n = instance_.requests();
        const int m = 2 * n - 1;
        if (a.request < 0 || a.request >= n || a.j < 0 || a.k < a.j || a.k >= m) return false;
        if (variant_ == PdpVariant::precedence) return true;
        auto reduced = detail::remove_request(instance_, s.current, a.request);
        std::vector<int> slots;
        delivery_slots(reduced, a.j, slots);
        return std::find(slots.begin(), slots.end(), a.k) != slots.end();
    }

    double advance(SearchState& s, const ReinsertMove& a) const
    {
        auto reduced = detail::remove_request(instance_, s.current, a.request);
        s.current = detail::insert_request(reduced, instance_.pickup_node(a.request), instance_.delivery_node(a.request),
                                           a.j, a.k);
        return detail::commit_step(s, length(s.current));
    }

    [[nodiscard]] StepOutcome step(const SearchState& s, const ReinsertMove& a) const
    {
        StepOutcome out{s, 0.0};
        try {
            out.next_state.current = pdp_apply(instance_, s.current, a, variant_);
        }
        catch (const feasibility_error& e) {
            throw invalid_argument(std::string("env_step: ") + e.what());
        }
        out.reward = detail::commit_step(out.next_state, length(out.next_state.current));
        return out;
    }

    /// The depot is pinned first and orientation matters, so the sequence is its own canonical form.
    [[nodiscard]] Tour canonical(std::span<const int> tour) const { return Tour(tour.begin(), tour.end()); }

private:
    PdInstance instance_;
    PdpVariant variant_;
};

/// Length of the cycle summed from its canonical form. Running lengths are updated
/// incrementally and may differ in the last bits for the same cycle; this does not.
template <class Env>
double canonical_length(const Env& env, std::span<const int> tour)
{
    return env.length(env.canonical(tour));
}

inline SearchState env_reset(const Instance& instance, std::uint64_t seed) { return TspEnv(instance).reset(seed); }

inline SearchState env_reset(const PdInstance& instance, PdpVariant variant, std::uint64_t seed)
{
    return PdpEnv(instance, variant).reset(seed);
}

inline StepOutcome env_step(const Instance& instance, const SearchState& s, const TwoOptMove& a)
{
    return TspEnv(instance).step(s, a);
}

inline StepOutcome env_step(const PdInstance& instance, PdpVariant variant, const SearchState& s, const ReinsertMove& a)
{
    return PdpEnv(instance, variant).step(s, a);
}

} // namespace lrbs
