#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace lrbs {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline double euclidean(Point a, Point b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

using Tour = std::vector<int>;

namespace detail {

/// Node coordinates plus an optional dense distance table. Shared immutably
/// between copies of an instance.
class Geometry {
public:
    static constexpr std::size_t dense_cutoff = 512;

    Geometry() = default;
    explicit Geometry(std::vector<Point> coords) : coords_(std::move(coords))
    {
        for (const auto& p : coords_) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0)
                throw validation_error("coordinate outside the unit square");
        }
        const std::size_t n = coords_.size();
        if (n <= dense_cutoff) {
            auto table = std::make_shared<std::vector<double>>(n * n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j)
                    (*table)[i * n + j] = (*table)[j * n + i] = euclidean(coords_[i], coords_[j]);
            dense_ = std::move(table);
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return coords_.size(); }
    [[nodiscard]] std::span<const Point> coords() const noexcept { return coords_; }
    [[nodiscard]] Point coord(int i) const noexcept { return coords_[static_cast<std::size_t>(i)]; }

    [[nodiscard]] double distance(int i, int j) const noexcept
    {
        if (dense_) return (*dense_)[static_cast<std::size_t>(i) * coords_.size() + static_cast<std::size_t>(j)];
        return euclidean(coords_[static_cast<std::size_t>(i)], coords_[static_cast<std::size_t>(j)]);
    }

    /// Closed-cycle length including the return edge. No validation.
    [[nodiscard]] double cycle_length(std::span<const int> order) const noexcept
    {
        double total = 0.0;
        const std::size_t n = order.size();
        for (std::size_t i = 0; i < n; ++i) total += distance(order[i], order[(i + 1) % n]);
        return total;
    }

    friend bool operator==(const Geometry& a, const Geometry& b) { return a.coords_ == b.coords_; }

private:
    std::vector<Point> coords_;
    std::shared_ptr<const std::vector<double>> dense_;
};

inline double unit_draw(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

inline std::vector<Point> uniform_points(std::size_t count, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::vector<Point> pts(count);
    for (auto& p : pts) {
        p.x = unit_draw(gen);
        p.y = unit_draw(gen);
    }
    return pts;
}

inline Point apply_symmetry(Point p, int k)
{
    switch (k) {
    case 0: return {p.x, p.y};
    case 1: return {p.y, p.x};
    case 2: return {1.0 - p.x, p.y};
    case 3: return {p.x, 1.0 - p.y};
    case 4: return {1.0 - p.x, 1.0 - p.y};
    case 5: return {p.y, 1.0 - p.x};
    case 6: return {1.0 - p.y, p.x};
    case 7: return {1.0 - p.y, 1.0 - p.x};
    default: throw invalid_argument("augmentation index must be in 0..7");
    }
}

inline void require_permutation(std::span<const int> tour, std::size_t n)
{
    if (tour.size() != n) throw invalid_argument("tour size does not match node count");
    std::vector<char> seen(n, 0);
    for (int v : tour) {
        if (v < 0 || static_cast<std::size_t>(v) >= n || seen[static_cast<std::size_t>(v)])
            throw invalid_argument("tour is not a permutation of the nodes");
        seen[static_cast<std::size_t>(v)] = 1;
    }
}

} // namespace detail

/// Euclidean TSP instance on the unit square.
class Instance {
public:
    Instance() = default;
    explicit Instance(std::vector<Point> coords) : geo_(std::move(coords))
    {
        if (geo_.size() < 3) throw validation_error("a TSP instance needs at least 3 nodes");
    }

    [[nodiscard]] int size() const noexcept { return static_cast<int>(geo_.size()); }
    [[nodiscard]] std::span<const Point> coords() const noexcept { return geo_.coords(); }
    [[nodiscard]] Point coord(int i) const noexcept { return geo_.coord(i); }
    [[nodiscard]] double distance(int i, int j) const noexcept { return geo_.distance(i, j); }
    [[nodiscard]] double cycle_length(std::span<const int> order) const noexcept { return geo_.cycle_length(order); }

    friend bool operator==(const Instance&, const Instance&) = default;

private:
    detail::Geometry geo_;
};

/// Pickup-and-delivery instance. Node 0 is the depot, nodes 1..n are pickups and
/// node n+i is the delivery paired with pickup i.
class PdInstance {
public:
    PdInstance() = default;
    PdInstance(Point depot, const std::vector<Point>& pickups, const std::vector<Point>& deliveries)
        : n_(static_cast<int>(pickups.size()))
    {
        if (pickups.empty()) throw validation_error("a pickup-and-delivery instance needs at least one request");
        if (pickups.size() != deliveries.size()) throw validation_error("pickup and delivery counts differ");
        std::vector<Point> all;
        all.reserve(2 * pickups.size() + 1);
        all.push_back(depot);
        all.insert(all.end(), pickups.begin(), pickups.end());
        all.insert(all.end(), deliveries.begin(), deliveries.end());
        geo_ = detail::Geometry(std::move(all));
    }

    [[nodiscard]] int requests() const noexcept { return n_; }
    [[nodiscard]] int size() const noexcept { return 2 * n_ + 1; }
    [[nodiscard]] std::span<const Point> coords() const noexcept { return geo_.coords(); }
    [[nodiscard]] Point coord(int i) const noexcept { return geo_.coord(i); }
    [[nodiscard]] double distance(int i, int j) const noexcept { return geo_.distance(i, j); }
    [[nodiscard]] double cycle_length(std::span<const int> order) const noexcept { return geo_.cycle_length(order); }

    [[nodiscard]] Point depot() const noexcept { return geo_.coord(0); }
    [[nodiscard]] int pickup_node(int request) const noexcept { return 1 + request; }
    [[nodiscard]] int delivery_node(int request) const noexcept { return 1 + n_ + request; }
    [[nodiscard]] bool is_pickup(int node) const noexcept { return node >= 1 && node <= n_; }
    [[nodiscard]] bool is_delivery(int node) const noexcept { return node > n_; }
    /// Request index of a pickup or delivery node; -1 for the depot.
    [[nodiscard]] int request_of(int node) const noexcept
    {
        if (node == 0) return -1;
        return node <= n_ ? node - 1 : node - 1 - n_;
    }

    friend bool operator==(const PdInstance&, const PdInstance&) = default;

private:
    int n_ = 0;
    detail::Geometry geo_;
};

inline Instance gen_uniform_tsp(int n, std::uint64_t seed)
{
    if (n < 3) throw invalid_argument("gen_uniform_tsp: n must be at least 3");
    return Instance(detail::uniform_points(static_cast<std::size_t>(n), seed));
}

inline PdInstance gen_uniform_pdp(int n_requests, std::uint64_t seed)
{
    if (n_requests < 1) throw invalid_argument("gen_uniform_pdp: n_requests must be at least 1");
    const auto n = static_cast<std::size_t>(n_requests);
    auto pts = detail::uniform_points(2 * n + 1, seed);
    std::vector<Point> pickups(pts.begin() + 1, pts.begin() + 1 + static_cast<std::ptrdiff_t>(n));
    std::vector<Point> deliveries(pts.begin() + 1 + static_cast<std::ptrdiff_t>(n), pts.end());
    return PdInstance(pts[0], pickups, deliveries);
}

/// Closed tour length, validating that the tour is a permutation of all nodes.
inline double tour_length(const Instance& instance, std::span<const int> tour)
{
    detail::require_permutation(tour, static_cast<std::size_t>(instance.size()));
    return instance.cycle_length(tour);
}

inline double tour_length(const PdInstance& instance, std::span<const int> tour)
{
    detail::require_permutation(tour, static_cast<std::size_t>(instance.size()));
    return instance.cycle_length(tour);
}

inline Instance augment8(const Instance& instance, int k)
{
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(instance.size()));
    for (auto p : instance.coords()) pts.push_back(detail::apply_symmetry(p, k));
    return Instance(std::move(pts));
}

inline PdInstance augment8(const PdInstance& instance, int k)
{
    const int n = instance.requests();
    std::vector<Point> pickups, deliveries;
    for (int r = 0; r < n; ++r) {
        pickups.push_back(detail::apply_symmetry(instance.coord(instance.pickup_node(r)), k));
        deliveries.push_back(detail::apply_symmetry(instance.coord(instance.delivery_node(r)), k));
    }
    return PdInstance(detail::apply_symmetry(instance.depot(), k), pickups, deliveries);
}

} // namespace lrbs
