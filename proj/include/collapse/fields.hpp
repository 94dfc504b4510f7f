#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "collapse/grid.hpp"

namespace collapse {

/// Raised when a pointwise geometric precondition fails (positivity,
/// finiteness). Carries the flat index of the first offending point.
class GeometryError : public std::runtime_error {
public:
    GeometryError(const std::string& what, std::size_t point)
        : std::runtime_error(what + " at grid point " + std::to_string(point)), point_(point) {}
    std::size_t point() const { return point_; }

private:
    std::size_t point_;
};

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using ComplexVectorX = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using ComplexMatrixX = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

/// Real samples on a grid.
template <typename Scalar>
class ScalarFieldT {
public:
    ScalarFieldT() = default;
    explicit ScalarFieldT(GridSpec grid) : grid_(std::move(grid)), values_(VectorX<Scalar>::Zero(grid_.size())) {}
    ScalarFieldT(GridSpec grid, VectorX<Scalar> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (static_cast<std::size_t>(values_.size()) != grid_.size())
            throw std::invalid_argument("ScalarField: value count does not match grid");
    }

    static ScalarFieldT constant(const GridSpec& grid, Scalar c) {
        return ScalarFieldT(grid, VectorX<Scalar>::Constant(grid.size(), c));
    }

    /// Samples f(coords) where coords holds the real coordinates of each point.
    static ScalarFieldT sample(const GridSpec& grid, const std::function<Scalar(const std::vector<double>&)>& f) {
        ScalarFieldT out(grid);
        std::vector<double> x(grid.real_dim());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            for (int d = 0; d < grid.real_dim(); ++d) x[d] = grid.coord(i, d);
            out.values_[i] = f(x);
        }
        return out;
    }

    const GridSpec& grid() const { return grid_; }
    std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
    const VectorX<Scalar>& values() const { return values_; }
    VectorX<Scalar>& values() { return values_; }
    Scalar operator[](std::size_t i) const { return values_[i]; }
    Scalar& operator[](std::size_t i) { return values_[i]; }

    Scalar mean() const { return values_.mean(); }
    Scalar sup_norm() const { return values_.cwiseAbs().maxCoeff(); }
    bool all_finite() const { return values_.allFinite(); }

    ScalarFieldT& operator+=(const ScalarFieldT& o) { values_ += o.values_; return *this; }
    ScalarFieldT& operator-=(const ScalarFieldT& o) { values_ -= o.values_; return *this; }
    ScalarFieldT& operator*=(Scalar c) { values_ *= c; return *this; }
    friend ScalarFieldT operator+(ScalarFieldT a, const ScalarFieldT& b) { return a += b; }
    friend ScalarFieldT operator-(ScalarFieldT a, const ScalarFieldT& b) { return a -= b; }
    friend ScalarFieldT operator*(Scalar c, ScalarFieldT a) { return a *= c; }

private:
    GridSpec grid_;
    VectorX<Scalar> values_;
};

/// Components g_{j kbar} of a (1,1)-form sampled on a grid; one complex
/// vector per component, stored row-major in (j, k).
template <typename Scalar>
class HermitianFieldT {
public:
    using Complex = std::complex<Scalar>;
    using PointMatrix = ComplexMatrixX<Scalar>;

    HermitianFieldT() = default;
    explicit HermitianFieldT(GridSpec grid)
        : grid_(std::move(grid)), dim_(grid_.complex_dim),
          comps_(dim_ * dim_, ComplexVectorX<Scalar>::Zero(grid_.size())) {}

    /// Same matrix at every point.
    static HermitianFieldT constant(const GridSpec& grid, const PointMatrix& m) {
        HermitianFieldT out(grid);
        if (m.rows() != out.dim_ || m.cols() != out.dim_)
            throw std::invalid_argument("HermitianField: constant matrix has wrong size");
        for (int j = 0; j < out.dim_; ++j)
            for (int k = 0; k < out.dim_; ++k) out.component(j, k).setConstant(m(j, k));
        out.check_hermitian();
        return out;
    }

    static HermitianFieldT identity(const GridSpec& grid) {
        return constant(grid, PointMatrix::Identity(grid.complex_dim, grid.complex_dim));
    }

    const GridSpec& grid() const { return grid_; }
    int dim() const { return dim_; }
    std::size_t size() const { return grid_.size(); }

    ComplexVectorX<Scalar>& component(int j, int k) { return comps_[j * dim_ + k]; }
    const ComplexVectorX<Scalar>& component(int j, int k) const { return comps_[j * dim_ + k]; }

    PointMatrix at(std::size_t p) const {
        PointMatrix m(dim_, dim_);
        for (int j = 0; j < dim_; ++j)
            for (int k = 0; k < dim_; ++k) m(j, k) = comps_[j * dim_ + k][p];
        return m;
    }

    void set(std::size_t p, const PointMatrix& m) {
        for (int j = 0; j < dim_; ++j)
            for (int k = 0; k < dim_; ++k) comps_[j * dim_ + k][p] = m(j, k);
    }

    /// Throws std::invalid_argument if any point deviates from Hermitian by
    /// more than `rel_tol` relative to the largest component magnitude.
    void check_hermitian(Scalar rel_tol = Scalar(1e-12)) const {
        Scalar scale(0);
        for (const auto& c : comps_)
            if (c.size() > 0) scale = std::max(scale, c.cwiseAbs().maxCoeff());
        const Scalar tol = rel_tol * std::max(scale, Scalar(1));
        for (int j = 0; j < dim_; ++j)
            for (int k = j; k < dim_; ++k) {
                const Scalar dev = (component(j, k) - component(k, j).conjugate()).cwiseAbs().maxCoeff();
                if (dev > tol)
                    throw std::invalid_argument("HermitianField: components (" + std::to_string(j) + "," +
                                                std::to_string(k) + ") not Hermitian");
            }
    }

    /// First point where the component matrix is not positive definite.
    std::optional<std::size_t> first_non_positive() const {
        for (std::size_t p = 0; p < size(); ++p)
            if (!point_positive(at(p))) return p;
        return std::nullopt;
    }

    bool is_positive() const { return !first_non_positive().has_value(); }

    void require_positive(const char* who) const {
        if (auto p = first_non_positive()) throw GeometryError(std::string(who) + ": form is not positive definite", *p);
    }

    /// Smallest eigenvalue over all points.
    Scalar min_eigenvalue() const {
        Scalar lo = std::numeric_limits<Scalar>::infinity();
        for (std::size_t p = 0; p < size(); ++p) {
            Eigen::SelfAdjointEigenSolver<PointMatrix> es(at(p), Eigen::EigenvaluesOnly);
            lo = std::min(lo, es.eigenvalues().minCoeff());
        }
        return lo;
    }

    Scalar sup_norm() const {
        Scalar s(0);
        for (const auto& c : comps_) s = std::max(s, c.cwiseAbs().maxCoeff());
        return s;
    }

    HermitianFieldT& operator+=(const HermitianFieldT& o) {
        for (std::size_t i = 0; i < comps_.size(); ++i) comps_[i] += o.comps_[i];
        return *this;
    }
    HermitianFieldT& operator-=(const HermitianFieldT& o) {
        for (std::size_t i = 0; i < comps_.size(); ++i) comps_[i] -= o.comps_[i];
        return *this;
    }
    HermitianFieldT& operator*=(Scalar c) {
        for (auto& v : comps_) v *= c;
        return *this;
    }
    friend HermitianFieldT operator+(HermitianFieldT a, const HermitianFieldT& b) { return a += b; }
    friend HermitianFieldT operator-(HermitianFieldT a, const HermitianFieldT& b) { return a -= b; }
    friend HermitianFieldT operator*(Scalar c, HermitianFieldT a) { return a *= c; }

    static bool point_positive(const PointMatrix& m) {
        // Cholesky pivots; LLT reports NumericalIssue on a non-positive pivot.
        if (m.rows() == 1) return std::real(m(0, 0)) > Scalar(0);
        Eigen::LLT<PointMatrix> llt(m);
        return llt.info() == Eigen::Success;
    }

private:
    GridSpec grid_;
    int dim_ = 0;
    std::vector<ComplexVectorX<Scalar>> comps_;
};

using ScalarField = ScalarFieldT<double>;
using HermitianField = HermitianFieldT<double>;

}  // namespace collapse
