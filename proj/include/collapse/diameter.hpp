#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include "collapse/fields.hpp"
#include "collapse/parallel.hpp"

namespace collapse {

namespace detail {

/// Weighted 8-neighbour graph on a periodic 2-D grid. Edge length uses the
/// average metric coefficient of the two endpoints:
///   len = sqrt((g_p + g_q)/2 * (dx^2 + dy^2)).
template <typename Scalar>
class TorusGraph {
public:
    TorusGraph(const GridSpec& grid, const VectorX<Scalar>& g) : grid_(grid), g_(g) {
        nx_ = grid.points_along(0);
        ny_ = grid.points_along(1);
        hx_ = grid.spacing(0);
        hy_ = grid.spacing(1);
    }

    std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_; }

    std::vector<Scalar> distances_from(std::size_t src) const {
        std::vector<Scalar> dist(size(), std::numeric_limits<Scalar>::infinity());
        using Item = std::pair<Scalar, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        dist[src] = 0;
        heap.emplace(Scalar(0), src);
        while (!heap.empty()) {
            auto [du, u] = heap.top();
            heap.pop();
            if (du > dist[u]) continue;
            const int ix = static_cast<int>(u / ny_), iy = static_cast<int>(u % ny_);
            for (int sx = -1; sx <= 1; ++sx)
                for (int sy = -1; sy <= 1; ++sy) {
                    if (sx == 0 && sy == 0) continue;
                    const int jx = (ix + sx + nx_) % nx_, jy = (iy + sy + ny_) % ny_;
                    const std::size_t v = static_cast<std::size_t>(jx) * ny_ + jy;
                    const Scalar step2 = Scalar(sx * sx) * hx_ * hx_ + Scalar(sy * sy) * hy_ * hy_;
                    const Scalar len = std::sqrt(Scalar(0.5) * (g_[u] + g_[v]) * step2);
                    if (du + len < dist[v]) {
                        dist[v] = du + len;
                        heap.emplace(dist[v], v);
                    }
                }
        }
        return dist;
    }

private:
    GridSpec grid_;
    VectorX<Scalar> g_;
    int nx_ = 0, ny_ = 0;
    Scalar hx_ = 0, hy_ = 0;
};

}  // namespace detail

/// Graph approximation of the Riemannian diameter of a flat-coordinate torus
/// fiber with Kahler metric omega (complex dimension 1). The length element
/// is ds^2 = g |dz|^2, so the identity metric on the unit square torus has
/// diameter sqrt(2)/2.
///
/// Eccentricities are maximised over every vertex when N <= 64, otherwise
/// over 16 farthest-point-sampled sources.
template <typename Scalar>
Scalar fiber_diameter(const HermitianFieldT<Scalar>& omega) {
    if (omega.dim() != 1) throw std::invalid_argument("fiber_diameter: only complex-dimension-1 fibers are supported");
    const GridSpec& grid = omega.grid();
    VectorX<Scalar> g = omega.component(0, 0).real();
    for (std::size_t p = 0; p < omega.size(); ++p)
        if (!(g[p] > Scalar(0))) throw GeometryError("fiber_diameter: metric is not positive", p);

    detail::TorusGraph<Scalar> graph(grid, g);
    const std::size_t n = graph.size();
    auto eccentricity = [&](const std::vector<Scalar>& dist) {
        Scalar e(0);
        for (Scalar v : dist) e = std::max(e, v);
        return e;
    };

    if (grid.points_along(0) <= 64 && grid.points_along(1) <= 64) {
        std::vector<Scalar> ecc(n);
        parallel_for(n, [&](std::size_t s) { ecc[s] = eccentricity(graph.distances_from(s)); });
        return *std::max_element(ecc.begin(), ecc.end());
    }

    constexpr int kSources = 16;
    std::vector<Scalar> nearest(n, std::numeric_limits<Scalar>::infinity());
    std::size_t src = 0;
    Scalar diam(0);
    for (int s = 0; s < kSources; ++s) {
        const auto dist = graph.distances_from(src);
        diam = std::max(diam, eccentricity(dist));
        std::size_t far = 0;
        for (std::size_t v = 0; v < n; ++v) {
            nearest[v] = std::min(nearest[v], dist[v]);
            if (nearest[v] > nearest[far]) far = v;
        }
        src = far;
    }
    return diam;
}

}  // namespace collapse
