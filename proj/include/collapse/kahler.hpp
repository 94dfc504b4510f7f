#pragma once

#include <cmath>
#include <vector>

#include "collapse/fields.hpp"
#include "collapse/spectral.hpp"

namespace collapse {

namespace detail {
template <typename Scalar>
void require_same_grid(const GridSpec& a, const GridSpec& b, const char* who) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(who) + ": fields live on different grids");
}

template <typename Scalar>
Scalar point_det(const ComplexMatrixX<Scalar>& g) {
    switch (g.rows()) {
        case 1: return std::real(g(0, 0));
        case 2: return std::real(g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0));
        default: return std::real(g.determinant());
    }
}
}  // namespace detail

/// Pointwise determinant of the component matrix: the top wedge power
/// relative to the Euclidean volume form. May be non-positive.
template <typename Scalar>
ScalarFieldT<Scalar> ma_density(const HermitianFieldT<Scalar>& omega) {
    ScalarFieldT<Scalar> out(omega.grid());
    for (std::size_t p = 0; p < omega.size(); ++p) out[p] = detail::point_det<Scalar>(omega.at(p));
    return out;
}

/// Tr_omega eta = g^{j kbar} eta_{j kbar} = tr(G^{-1} H) pointwise.
template <typename Scalar>
ScalarFieldT<Scalar> trace_wrt(const HermitianFieldT<Scalar>& omega, const HermitianFieldT<Scalar>& eta) {
    detail::require_same_grid<Scalar>(omega.grid(), eta.grid(), "trace_wrt");
    ScalarFieldT<Scalar> out(omega.grid());
    for (std::size_t p = 0; p < omega.size(); ++p) {
        const auto g = omega.at(p);
        Eigen::LLT<ComplexMatrixX<Scalar>> llt(g);
        if (llt.info() != Eigen::Success || !HermitianFieldT<Scalar>::point_positive(g))
            throw GeometryError("trace_wrt: reference form is not positive definite", p);
        out[p] = std::real(llt.solve(eta.at(p)).trace());
    }
    return out;
}

/// Ric(omega) = -i ddbar log det(g).
template <typename Scalar>
HermitianFieldT<Scalar> ricci_form(const HermitianFieldT<Scalar>& omega) {
    auto logdet = ma_density(omega);
    for (std::size_t p = 0; p < logdet.size(); ++p) {
        if (!(logdet[p] > Scalar(0))) throw GeometryError("ricci_form: non-positive volume density", p);
        logdet[p] = -std::log(logdet[p]);
    }
    return ddbar(logdet);
}

/// Second-order jet of a Kahler metric at one point:
///   g(j,k)         = g_{j kbar}
///   d[l](j,k)      = d_l g_{j kbar}
///   dd[l][m](j,k)  = d_l dbar_m g_{j kbar}
template <typename Scalar>
struct MetricJet {
    ComplexMatrixX<Scalar> g;
    std::vector<ComplexMatrixX<Scalar>> d;
    std::vector<std::vector<ComplexMatrixX<Scalar>>> dd;
};

/// Norm of the curvature tensor
///   R_{j kbar l mbar} = -d_l dbar_m g_{j kbar} + g^{p qbar} (d_l g_{j qbar}) (dbar_m g_{p kbar}),
/// with every slot contracted against g^{-1} (computed in a unitary frame).
template <typename Scalar>
Scalar curvature_norm(const MetricJet<Scalar>& jet) {
    using Complex = std::complex<Scalar>;
    using Mat = ComplexMatrixX<Scalar>;
    const int m = static_cast<int>(jet.g.rows());
    Eigen::LLT<Mat> llt(jet.g);
    if (llt.info() != Eigen::Success) throw std::domain_error("curvature_norm: metric is not positive definite");
    const Mat ginv = llt.solve(Mat::Identity(m, m));
    // Unitary frame e_a = A_{j a} d_j with A^T G conj(A) = I, i.e. A = L^{-T}.
    const Mat linv = Mat(llt.matrixL()).inverse();
    const Mat A = linv.transpose();

    auto idx = [m](int a, int b, int c, int d) { return ((a * m + b) * m + c) * m + d; };
    std::vector<Complex> R(static_cast<std::size_t>(m * m * m * m));
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
            for (int l = 0; l < m; ++l)
                for (int mm = 0; mm < m; ++mm) {
                    Complex r = -jet.dd[l][mm](j, k);
                    for (int p = 0; p < m; ++p)
                        for (int q = 0; q < m; ++q)
                            r += ginv(q, p) * jet.d[l](j, q) * std::conj(jet.d[mm](k, p));
                    R[idx(j, k, l, mm)] = r;
                }

    // Contract one slot at a time: slot 0 and 2 with A, slots 1 and 3 with conj(A).
    std::vector<Complex> tmp(R.size());
    for (int slot = 0; slot < 4; ++slot) {
        const bool conj = (slot % 2) == 1;
        std::fill(tmp.begin(), tmp.end(), Complex(0));
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                for (int c = 0; c < m; ++c)
                    for (int d = 0; d < m; ++d) {
                        int out[4] = {a, b, c, d};
                        Complex s(0);
                        for (int i = 0; i < m; ++i) {
                            int in[4] = {a, b, c, d};
                            in[slot] = i;
                            const Complex w = conj ? std::conj(A(i, out[slot])) : A(i, out[slot]);
                            s += R[idx(in[0], in[1], in[2], in[3])] * w;
                        }
                        tmp[idx(a, b, c, d)] = s;
                    }
        R.swap(tmp);
    }
    Scalar sq(0);
    for (const auto& r : R) sq += std::norm(r);
    return std::sqrt(sq);
}

/// Pointwise ||Rm|| of a smooth periodic Kahler metric, derivatives spectral.
template <typename Scalar>
ScalarFieldT<Scalar> riemann_norm(const HermitianFieldT<Scalar>& omega) {
    omega.require_positive("riemann_norm");
    const int m = omega.dim();
    const Spectral<Scalar> sp(omega.grid());
    // d[l][j*m+k] = d_l g_{j kbar}; dd[l][mm][j*m+k] = d_l dbar_mm g_{j kbar}
    std::vector<std::vector<ComplexVectorX<Scalar>>> d(m, std::vector<ComplexVectorX<Scalar>>(m * m));
    std::vector<std::vector<std::vector<ComplexVectorX<Scalar>>>> dd(
        m, std::vector<std::vector<ComplexVectorX<Scalar>>>(m, std::vector<ComplexVectorX<Scalar>>(m * m)));
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) {
            const auto hat = sp.forward(omega.component(j, k));
            for (int l = 0; l < m; ++l) {
                d[l][j * m + k] = sp.apply(hat, [&](std::size_t p) { return sp.dz(p, l); });
                for (int mm = 0; mm < m; ++mm)
                    dd[l][mm][j * m + k] = sp.apply(hat, [&](std::size_t p) { return sp.dz_dzbar(p, l, mm); });
            }
        }

    ScalarFieldT<Scalar> out(omega.grid());
    MetricJet<Scalar> jet;
    jet.d.assign(m, ComplexMatrixX<Scalar>(m, m));
    jet.dd.assign(m, std::vector<ComplexMatrixX<Scalar>>(m, ComplexMatrixX<Scalar>(m, m)));
    for (std::size_t p = 0; p < omega.size(); ++p) {
        jet.g = omega.at(p);
        for (int l = 0; l < m; ++l)
            for (int j = 0; j < m; ++j)
                for (int k = 0; k < m; ++k) {
                    jet.d[l](j, k) = d[l][j * m + k][p];
                    for (int mm = 0; mm < m; ++mm) jet.dd[l][mm](j, k) = dd[l][mm][j * m + k][p];
                }
        out[p] = curvature_norm(jet);
    }
    return out;
}

}  // namespace collapse
