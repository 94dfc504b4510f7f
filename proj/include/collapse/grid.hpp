#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace collapse {

/// Uniform sampling of a box in C^m, periodic in every real direction.
///
/// Real directions are ordered (x_1, y_1, x_2, y_2, ...) with z_j = x_j + i y_j.
/// Both real directions of z_j carry resolution N_j. Points are stored
/// row-major with the last real direction fastest; point i along direction d
/// sits at origin[d] + i * period[d] / N_j.
struct GridSpec {
    int complex_dim = 1;
    std::vector<int> resolution;   // one per complex dimension
    std::vector<double> periods;   // one per real direction
    std::vector<double> origin;    // one per real direction

    /// Unit square lattice in every complex coordinate.
    static GridSpec torus(int complex_dim, int n, double period = 1.0) {
        GridSpec g;
        g.complex_dim = complex_dim;
        g.resolution.assign(complex_dim, n);
        g.periods.assign(2 * complex_dim, period);
        g.origin.assign(2 * complex_dim, 0.0);
        g.validate();
        return g;
    }

    int real_dim() const { return 2 * complex_dim; }

    int points_along(int dir) const { return resolution[dir / 2]; }

    std::vector<int> shape() const {
        std::vector<int> s(real_dim());
        for (int d = 0; d < real_dim(); ++d) s[d] = points_along(d);
        return s;
    }

    std::size_t size() const {
        std::size_t n = 1;
        for (int d = 0; d < real_dim(); ++d) n *= static_cast<std::size_t>(points_along(d));
        return n;
    }

    double spacing(int dir) const { return periods[dir] / points_along(dir); }

    /// Stride of real direction `dir` in the flat index.
    std::size_t stride(int dir) const {
        std::size_t s = 1;
        for (int d = real_dim() - 1; d > dir; --d) s *= static_cast<std::size_t>(points_along(d));
        return s;
    }

    int index_along(std::size_t flat, int dir) const {
        return static_cast<int>((flat / stride(dir)) % static_cast<std::size_t>(points_along(dir)));
    }

    double coord(std::size_t flat, int dir) const {
        return origin[dir] + index_along(flat, dir) * spacing(dir);
    }

    /// Complex coordinate z_j of a grid point.
    std::pair<double, double> complex_coord(std::size_t flat, int j) const {
        return {coord(flat, 2 * j), coord(flat, 2 * j + 1)};
    }

    bool same_shape(const GridSpec& o) const {
        return complex_dim == o.complex_dim && resolution == o.resolution && periods == o.periods;
    }

    void validate() const {
        if (complex_dim < 1) throw std::invalid_argument("GridSpec: complex_dim must be >= 1");
        if (static_cast<int>(resolution.size()) != complex_dim)
            throw std::invalid_argument("GridSpec: need one resolution per complex dimension");
        if (static_cast<int>(periods.size()) != real_dim() || static_cast<int>(origin.size()) != real_dim())
            throw std::invalid_argument("GridSpec: need one period and origin per real direction");
        for (int n : resolution)
            if (n < 8 || n % 2 != 0)
                throw std::invalid_argument("GridSpec: resolution must be even and >= 8, got " +
                                            std::to_string(n));
        for (double p : periods)
            if (!(p > 0.0)) throw std::invalid_argument("GridSpec: periods must be strictly positive");
    }
};

}  // namespace collapse
