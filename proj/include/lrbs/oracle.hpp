#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "errors.hpp"
#include "instance.hpp"
#include "mdp.hpp"

namespace lrbs {

struct OracleResult {
    double optimal_length = 0.0;
    Tour optimal_tour;
};

inline constexpr int held_karp_max_nodes = 18;
inline constexpr int pdp_brute_force_max_requests = 5;

/// Exact TSP optimum by dynamic programming over subsets, node 0 fixed as start.
inline OracleResult held_karp_optimal(const Instance& instance)
{
    const int n = instance.size();
    if (n > held_karp_max_nodes)
        throw size_limit_error("held_karp_optimal: N = " + std::to_string(n) + " exceeds the limit of " +
                               std::to_string(held_karp_max_nodes));

    // Subsets range over nodes 1..n-1, bit b <-> node b+1.
    const int m = n - 1;
    const std::size_t subsets = std::size_t{1} << m;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cost(subsets * static_cast<std::size_t>(m), inf);
    std::vector<std::int8_t> parent(subsets * static_cast<std::size_t>(m), -1);
    auto at = [m](std::size_t mask, int last) { return mask * static_cast<std::size_t>(m) + static_cast<std::size_t>(last); };

    for (int b = 0; b < m; ++b) cost[at(std::size_t{1} << b, b)] = instance.distance(0, b + 1);

    for (std::size_t mask = 1; mask < subsets; ++mask) {
        for (int last = 0; last < m; ++last) {
            if (!(mask & (std::size_t{1} << last))) continue;
            const double base = cost[at(mask, last)];
            if (base == inf) continue;
            for (int next = 0; next < m; ++next) {
                if (mask & (std::size_t{1} << next)) continue;
                const std::size_t grown = mask | (std::size_t{1} << next);
                const double c = base + instance.distance(last + 1, next + 1);
                if (c < cost[at(grown, next)]) {
                    cost[at(grown, next)] = c;
                    parent[at(grown, next)] = static_cast<std::int8_t>(last);
                }
            }
        }
    }

    const std::size_t full = subsets - 1;
    double best = inf;
    int best_last = 0;
    for (int last = 0; last < m; ++last) {
        const double c = cost[at(full, last)] + instance.distance(last + 1, 0);
        if (c < best) {
            best = c;
            best_last = last;
        }
    }

    Tour reversed;
    std::size_t mask = full;
    int last = best_last;
    while (last >= 0) {
        reversed.push_back(last + 1);
        const int prev = parent[at(mask, last)];
        mask &= ~(std::size_t{1} << last);
        last = prev;
    }
    OracleResult result;
    result.optimal_tour.push_back(0);
    result.optimal_tour.insert(result.optimal_tour.end(), reversed.rbegin(), reversed.rend());
    // Report the length of the reconstructed tour itself so the two always agree exactly.
    result.optimal_length = instance.cycle_length(result.optimal_tour);
    return result;
}

namespace detail {

struct PdpSearch {
    const PdInstance& instance;
    PdpVariant variant;
    Tour seq;
    std::vector<char> used;
    std::vector<int> stack;
    OracleResult best{std::numeric_limits<double>::infinity(), {}};

    void run()
    {
        const int size = instance.size();
        if (static_cast<int>(seq.size()) == size) {
            const double len = instance.cycle_length(seq);
            if (len < best.optimal_length) best = {len, seq};
            return;
        }
        for (int v = 1; v < size; ++v) {
            if (used[static_cast<std::size_t>(v)]) continue;
            const int r = instance.request_of(v);
            const bool pickup = instance.is_pickup(v);
            if (!pickup) {
                if (!used[static_cast<std::size_t>(instance.pickup_node(r))]) continue;
                if (variant == PdpVariant::lifo && stack.back() != r) continue;
            }
            used[static_cast<std::size_t>(v)] = 1;
            seq.push_back(v);
            if (pickup) stack.push_back(r);
            else if (variant == PdpVariant::lifo) stack.pop_back();
            run();
            if (pickup) stack.pop_back();
            else if (variant == PdpVariant::lifo) stack.push_back(r);
            seq.pop_back();
            used[static_cast<std::size_t>(v)] = 0;
        }
    }
};

} // namespace detail

/// Exact optimum over all constraint-respecting sequences starting at the depot.
inline OracleResult brute_force_pdp_optimal(const PdInstance& instance, PdpVariant variant)
{
    if (instance.requests() > pdp_brute_force_max_requests)
        throw size_limit_error("brute_force_pdp_optimal: more than " + std::to_string(pdp_brute_force_max_requests) +
                               " requests");
    detail::PdpSearch search{instance, variant, {0}, std::vector<char>(static_cast<std::size_t>(instance.size()), 0), {}};
    search.used[0] = 1;
    search.run();
    return search.best;
}

} // namespace lrbs
