#pragma once

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "collapse/fields.hpp"

namespace collapse {

/// In-place n-dimensional DFT by successive 1-D transforms along each axis.
/// The inverse is scaled by 1/size.
template <typename Scalar>
void fft_nd(std::vector<std::complex<Scalar>>& data, const std::vector<int>& shape, bool inverse) {
    thread_local Eigen::FFT<Scalar> fft;
    const std::size_t total = data.size();
    std::vector<std::complex<Scalar>> in, out;
    std::size_t stride = total;
    for (std::size_t d = 0; d < shape.size(); ++d) {
        const auto n = static_cast<std::size_t>(shape[d]);
        stride /= n;
        in.resize(n);
        out.resize(n);
        const std::size_t blocks = total / (n * stride);
        for (std::size_t b = 0; b < blocks; ++b)
            for (std::size_t s = 0; s < stride; ++s) {
                const std::size_t base = b * n * stride + s;
                for (std::size_t i = 0; i < n; ++i) in[i] = data[base + i * stride];
                if (inverse)
                    fft.inv(out, in);
                else
                    fft.fwd(out, in);
                for (std::size_t i = 0; i < n; ++i) data[base + i * stride] = out[i];
            }
    }
}

/// Fourier differentiation on a periodic GridSpec.
///
/// Odd-order factors drop the Nyquist mode; a repeated real direction uses
/// the exact second-derivative symbol -k^2, so trigonometric data up to the
/// Nyquist frequency is differentiated exactly.
template <typename Scalar>
class Spectral {
public:
    using Complex = std::complex<Scalar>;
    using CVec = ComplexVectorX<Scalar>;

    explicit Spectral(const GridSpec& grid) : grid_(grid), wave_(grid.real_dim()), nyquist_(grid.real_dim()) {
        const std::size_t n = grid.size();
        for (int d = 0; d < grid.real_dim(); ++d) {
            wave_[d].resize(n);
            nyquist_[d].resize(n);
            const int npts = grid.points_along(d);
            const Scalar base = Scalar(2) * std::numbers::pi_v<Scalar> / Scalar(grid.periods[d]);
            for (std::size_t p = 0; p < n; ++p) {
                int i = grid.index_along(p, d);
                const int freq = i <= npts / 2 ? i : i - npts;
                wave_[d][p] = base * Scalar(freq);
                nyquist_[d][p] = (i == npts / 2);
            }
        }
    }

    const GridSpec& grid() const { return grid_; }

    CVec forward(const VectorX<Scalar>& v) const { return forward(CVec(v.template cast<Complex>())); }

    CVec forward(const CVec& v) const {
        std::vector<Complex> buf(v.data(), v.data() + v.size());
        fft_nd(buf, grid_.shape(), false);
        return Eigen::Map<CVec>(buf.data(), static_cast<Eigen::Index>(buf.size()));
    }

    CVec inverse(const CVec& spec) const {
        std::vector<Complex> buf(spec.data(), spec.data() + spec.size());
        fft_nd(buf, grid_.shape(), true);
        return Eigen::Map<CVec>(buf.data(), static_cast<Eigen::Index>(buf.size()));
    }

    /// Symbol of d/d(real direction a).
    Complex first(std::size_t p, int a) const {
        return nyquist_[a][p] ? Complex(0) : Complex(0, wave_[a][p]);
    }

    /// Symbol of d^2/(da db).
    Complex second(std::size_t p, int a, int b) const {
        if (a == b) return Complex(-wave_[a][p] * wave_[a][p]);
        return first(p, a) * first(p, b);
    }

    /// d/dz_j = (d/dx_j - i d/dy_j) / 2.
    Complex dz(std::size_t p, int j) const {
        return (first(p, 2 * j) - Complex(0, 1) * first(p, 2 * j + 1)) / Scalar(2);
    }

    /// d/dzbar_j = (d/dx_j + i d/dy_j) / 2.
    Complex dzbar(std::size_t p, int j) const {
        return (first(p, 2 * j) + Complex(0, 1) * first(p, 2 * j + 1)) / Scalar(2);
    }

    /// d^2/(dz_j dzbar_k), expanded so that repeated real directions use
    /// the second-derivative symbol.
    Complex dz_dzbar(std::size_t p, int j, int k) const {
        const int xj = 2 * j, yj = 2 * j + 1, xk = 2 * k, yk = 2 * k + 1;
        const Complex re = second(p, xj, xk) + second(p, yj, yk);
        const Complex im = second(p, xj, yk) - second(p, yj, xk);
        return (re + Complex(0, 1) * im) / Scalar(4);
    }

    /// Trace of the flat d dbar symbol: sum_j d^2/(dz_j dzbar_j) = Laplacian / 4.
    Scalar flat_trace(std::size_t p) const {
        Scalar s(0);
        for (int j = 0; j < grid_.complex_dim; ++j) s += std::real(dz_dzbar(p, j, j));
        return s;
    }

    template <typename Symbol>
    CVec apply(const CVec& spectrum, Symbol&& symbol) const {
        CVec out(spectrum.size());
        for (Eigen::Index p = 0; p < spectrum.size(); ++p)
            out[p] = spectrum[p] * symbol(static_cast<std::size_t>(p));
        return inverse(out);
    }

private:
    GridSpec grid_;
    std::vector<VectorX<Scalar>> wave_;
    std::vector<std::vector<bool>> nyquist_;
};

/// Components d^2 phi / (dz_j dzbar_k) of i ddbar(phi).
template <typename Scalar>
HermitianFieldT<Scalar> ddbar(const ScalarFieldT<Scalar>& phi) {
    HermitianFieldT<Scalar> out(phi.grid());
    if (phi.size() == 0 || (phi.values().array() == phi[0]).all()) return out;
    const Spectral<Scalar> sp(phi.grid());
    const auto hat = sp.forward(phi.values());
    const int m = phi.grid().complex_dim;
    for (int j = 0; j < m; ++j) {
        auto diag = sp.apply(hat, [&](std::size_t p) { return sp.dz_dzbar(p, j, j); });
        out.component(j, j) = diag.real().template cast<std::complex<Scalar>>();
        for (int k = j + 1; k < m; ++k) {
            out.component(j, k) = sp.apply(hat, [&](std::size_t p) { return sp.dz_dzbar(p, j, k); });
            out.component(k, j) = out.component(j, k).conjugate();
        }
    }
    return out;
}

/// d f / dz_j for a complex-valued field on the grid.
template <typename Scalar>
ComplexVectorX<Scalar> dz(const Spectral<Scalar>& sp, const ComplexVectorX<Scalar>& f, int j) {
    return sp.apply(sp.forward(f), [&](std::size_t p) { return sp.dz(p, j); });
}

/// d f / dzbar_j for a complex-valued field on the grid.
template <typename Scalar>
ComplexVectorX<Scalar> dzbar(const Spectral<Scalar>& sp, const ComplexVectorX<Scalar>& f, int j) {
    return sp.apply(sp.forward(f), [&](std::size_t p) { return sp.dzbar(p, j); });
}

}  // namespace collapse
