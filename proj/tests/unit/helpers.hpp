#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <lrbs/instance.hpp>

namespace lrbs::check {

/// Edge-by-edge cycle length, computed from raw coordinates.
inline double resum_length(std::span<const Point> pts, const std::vector<int>& tour)
{
    double total = 0.0;
    for (std::size_t i = 0; i < tour.size(); ++i) {
        const Point a = pts[static_cast<std::size_t>(tour[i])];
        const Point b = pts[static_cast<std::size_t>(tour[(i + 1) % tour.size()])];
        total += std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y));
    }
    return total;
}

/// Exhaustive TSP optimum over all permutations with node 0 first.
inline double brute_force_tsp(const Instance& inst)
{
    std::vector<int> rest(static_cast<std::size_t>(inst.size() - 1));
    std::iota(rest.begin(), rest.end(), 1);
    double best = std::numeric_limits<double>::infinity();
    do {
        std::vector<int> tour{0};
        tour.insert(tour.end(), rest.begin(), rest.end());
        best = std::min(best, resum_length(inst.coords(), tour));
    } while (std::next_permutation(rest.begin(), rest.end()));
    return best;
}

/// Feasibility written independently of the library: every delivery after its
/// pickup, and with `lifo` the delivered request is the most recent open one.
inline bool feasible_independent(int n, const std::vector<int>& seq, bool lifo)
{
    if (seq.empty() || seq.front() != 0 || static_cast<int>(seq.size()) != 2 * n + 1) return false;
    std::vector<int> seen(static_cast<std::size_t>(2 * n + 1), 0);
    std::vector<int> stack;
    for (std::size_t p = 1; p < seq.size(); ++p) {
        const int v = seq[p];
        if (v < 1 || v > 2 * n || seen[static_cast<std::size_t>(v)]++) return false;
        if (v <= n) {
            stack.push_back(v);
        } else {
            const int pick = v - n;
            if (!seen[static_cast<std::size_t>(pick)]) return false;
            if (lifo) {
                if (stack.empty() || stack.back() != pick) return false;
                stack.pop_back();
            } else {
                stack.erase(std::find(stack.begin(), stack.end(), pick));
            }
        }
    }
    return true;
}

/// Optimum over every permutation of nodes 1..2n that passes feasible_independent.
inline double enumerate_pdp(const PdInstance& inst, bool lifo, int* feasible_count = nullptr)
{
    const int n = inst.requests();
    std::vector<int> rest(static_cast<std::size_t>(2 * n));
    std::iota(rest.begin(), rest.end(), 1);
    double best = std::numeric_limits<double>::infinity();
    int count = 0;
    do {
        std::vector<int> seq{0};
        seq.insert(seq.end(), rest.begin(), rest.end());
        if (!feasible_independent(n, seq, lifo)) continue;
        ++count;
        best = std::min(best, resum_length(inst.coords(), seq));
    } while (std::next_permutation(rest.begin(), rest.end()));
    if (feasible_count) *feasible_count = count;
    return best;
}

inline double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

} // namespace lrbs::check
