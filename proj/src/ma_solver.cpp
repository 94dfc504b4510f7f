#include "collapse/ma_solver.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "collapse/kahler.hpp"
#include "collapse/spectral.hpp"

namespace collapse {
namespace detail {
class GkeJacobian;
}
}  // namespace collapse

namespace Eigen::internal {
template <>
struct traits<collapse::detail::GkeJacobian> : public traits<Eigen::SparseMatrix<double>> {};
}  // namespace Eigen::internal

namespace collapse {
namespace detail {

/// v -> tr(G_u^{-1} ddbar v) - v at a frozen u, matrix-free.
class GkeJacobian : public Eigen::EigenBase<GkeJacobian> {
public:
    using Scalar = double;
    using RealScalar = double;
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

    explicit GkeJacobian(const HermitianField& omega_u) : grid_(omega_u.grid()), m_(omega_u.dim()) {
        const std::size_t n = grid_.size();
        inv_.assign(m_ * m_, ComplexVectorX<double>(n));
        double trace_sum = 0, lo = std::numeric_limits<double>::infinity(), hi = 0;
        for (std::size_t p = 0; p < n; ++p) {
            const Eigen::MatrixXcd gi = omega_u.at(p).inverse();
            for (int j = 0; j < m_; ++j)
                for (int k = 0; k < m_; ++k) inv_[j * m_ + k][p] = gi(j, k);
            const double tr = gi.trace().real() / m_;
            trace_sum += tr;
            lo = std::min(lo, tr);
            hi = std::max(hi, tr);
        }
        mu_ = trace_sum / static_cast<double>(n);
        mid_ = 0.5 * (lo + hi);
    }

    Eigen::Index rows() const { return static_cast<Eigen::Index>(grid_.size()); }
    Eigen::Index cols() const { return rows(); }

    template <typename Rhs>
    Eigen::Product<GkeJacobian, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
        return Eigen::Product<GkeJacobian, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
        const auto h = ddbar(ScalarField(grid_, v));
        Eigen::VectorXd out = -v;
        for (int j = 0; j < m_; ++j)
            for (int k = 0; k < m_; ++k)
                out += (inv_[k * m_ + j].array() * h.component(j, k).array()).real().matrix();
        return out;
    }

    const GridSpec& grid() const { return grid_; }
    double mu() const { return mu_; }
    /// Midrange of tr(G^{-1}) / m, which minimises the sup of the leftover
    /// variable coefficient.
    double midrange() const { return mid_; }

private:
    GridSpec grid_;
    int m_;
    std::vector<ComplexVectorX<double>> inv_;
    double mu_ = 1, mid_ = 1;
};

/// Inverse of mu * (flat Laplacian / 4) - 1, diagonal in Fourier space. mu is
/// the mean of tr(G_u^{-1}) / m, so for flat omega_Sigma this is exact.
class FlatPreconditioner {
public:
    FlatPreconditioner() = default;

    template <typename MatType>
    FlatPreconditioner& analyzePattern(const MatType&) { return *this; }
    template <typename MatType>
    FlatPreconditioner& factorize(const MatType& a) { return compute(a); }

    FlatPreconditioner& compute(const GkeJacobian& a) {
        sp_ = std::make_shared<Spectral<double>>(a.grid());
        mu_ = a.mu();
        return *this;
    }

    template <typename Rhs>
    Eigen::VectorXd solve(const Eigen::MatrixBase<Rhs>& b) const {
        const Eigen::VectorXd v = b;
        return sp_->apply(sp_->forward(v), [&](std::size_t p) { return std::complex<double>(1.0 / (mu_ * sp_->flat_trace(p) - 1.0)); })
            .real();
    }

    Eigen::ComputationInfo info() const { return Eigen::Success; }

private:
    std::shared_ptr<Spectral<double>> sp_;
    double mu_ = 1;
};

HermitianField shifted_form(const HermitianField& base, const ScalarField& u) {
    return base + ddbar(u);
}

// log det of omega at every point; throws on loss of positivity.
Eigen::VectorXd log_density(const HermitianField& omega, const char* who) {
    if (omega.dim() > 1) omega.require_positive(who);
    const auto det = ma_density(omega);
    Eigen::VectorXd out(det.size());
    for (std::size_t p = 0; p < det.size(); ++p) {
        if (!(det[p] > 0.0)) throw GeometryError(std::string(who) + ": form is not positive definite", p);
        out[p] = std::log(det[p]);
    }
    return out;
}

}  // namespace detail
}  // namespace collapse

namespace Eigen::internal {
template <typename Rhs>
struct generic_product_impl<collapse::detail::GkeJacobian, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<collapse::detail::GkeJacobian, Rhs,
                                generic_product_impl<collapse::detail::GkeJacobian, Rhs>> {
    using Scalar = typename Product<collapse::detail::GkeJacobian, Rhs>::Scalar;
    template <typename Dest>
    static void scaleAndAddTo(Dest& dst, const collapse::detail::GkeJacobian& lhs, const Rhs& rhs, const Scalar& alpha) {
        dst.noalias() += alpha * lhs.apply(rhs);
    }
};
}  // namespace Eigen::internal

namespace collapse {

ScalarField gke_residual(const ScalarField& u, const HermitianField& omega_sigma, const ScalarField& F) {
    detail::require_same_grid<double>(u.grid(), omega_sigma.grid(), "gke_residual");
    detail::require_same_grid<double>(u.grid(), F.grid(), "gke_residual");
    const Eigen::VectorXd lhs = detail::log_density(detail::shifted_form(omega_sigma, u), "gke_residual");
    const Eigen::VectorXd ref = detail::log_density(omega_sigma, "gke_residual reference");
    return ScalarField(u.grid(), lhs - ref - F.values().array().log().matrix() - u.values());
}

GkeSolution solve_gke(const HermitianField& omega_sigma, const ScalarField& F, const GkeConfig& cfg,
                      const std::optional<ScalarField>& u0) {
    for (std::size_t p = 0; p < F.size(); ++p)
        if (!(F[p] > 0.0)) throw GeometryError("solve_gke: F must be strictly positive", p);
    omega_sigma.require_positive("solve_gke omega_Sigma");

    GkeSolution sol;
    sol.u = u0 ? *u0 : ScalarField(omega_sigma.grid());
    ScalarField r = gke_residual(sol.u, omega_sigma, F);
    sol.residual_history.push_back(r.sup_norm());

    while (sol.residual_history.back() > cfg.tol) {
        if (sol.iterations >= cfg.max_iterations) {
            std::ostringstream msg;
            msg << "solve_gke: no convergence after " << cfg.max_iterations << " iterations, residual "
                << sol.residual_history.back();
            throw SolverError(msg.str(), sol.residual_history);
        }
        const double rnorm = sol.residual_history.back();
        detail::GkeJacobian jac(detail::shifted_form(omega_sigma, sol.u));
        Eigen::BiCGSTAB<detail::GkeJacobian, detail::FlatPreconditioner> krylov;
        krylov.setTolerance(cfg.adaptive_forcing ? std::min(cfg.krylov_rtol, rnorm) : cfg.krylov_rtol);
        krylov.setMaxIterations(cfg.max_krylov);
        krylov.compute(jac);
        const Eigen::VectorXd delta = krylov.solve(Eigen::VectorXd(-r.values()));
        sol.krylov_iterations.push_back(static_cast<int>(krylov.iterations()));
        if (!delta.allFinite()) throw SolverError("solve_gke: Krylov solve produced non-finite update", sol.residual_history);

        double lambda = 1.0;
        bool accepted = false;
        for (int h = 0; h <= cfg.max_halvings && !accepted; ++h, lambda *= 0.5) {
            ScalarField cand(sol.u.grid(), sol.u.values() + lambda * delta);
            try {
                ScalarField rc = gke_residual(cand, omega_sigma, F);
                if (rc.sup_norm() < rnorm) {
                    sol.u = std::move(cand);
                    r = std::move(rc);
                    accepted = true;
                }
            } catch (const GeometryError&) {
                // positivity lost; shorten the step
            }
        }
        if (!accepted)
            throw SolverError("solve_gke: step damping could not keep positivity and decrease the residual",
                              sol.residual_history);
        ++sol.iterations;
        sol.residual_history.push_back(r.sup_norm());
    }
    sol.positivity_margin = detail::shifted_form(omega_sigma, sol.u).min_eigenvalue();
    return sol;
}

ParabolicResult parabolic_gke(const HermitianField& omega_sigma, const ScalarField& F, const ScalarField& u0,
                              const ScalarField& u_inf, const ParabolicConfig& cfg) {
    if (cfg.mode == ForcingMode::Transient && !cfg.rho)
        throw std::invalid_argument("parabolic_gke: transient mode needs a perturbation form rho");
    const GridSpec grid = omega_sigma.grid();
    const Eigen::VectorXd log_ref = detail::log_density(omega_sigma, "parabolic_gke reference");
    const Eigen::VectorXd log_F = F.values().array().log();
    auto sigma_at = [&](double t) {
        if (cfg.mode == ForcingMode::Static) return omega_sigma;
        return omega_sigma + std::exp(-t) * (*cfg.rho);
    };
    auto rhs = [&](double t, const Eigen::VectorXd& u) -> Eigen::VectorXd {
        const auto w = detail::shifted_form(sigma_at(t), ScalarField(grid, u));
        return detail::log_density(w, "parabolic_gke") - log_ref - log_F - u;
    };

    // Integrate v = u - u_inf so the explicit part vanishes at the fixed point.
    const double mu = detail::GkeJacobian(detail::shifted_form(sigma_at(0.0), u0)).midrange();
    const auto sp = std::make_shared<Spectral<double>>(grid);
    const Eigen::VectorXd& base = u_inf.values();
    LawsonProblem prob;
    prob.propagate = spectral_propagator(grid, [sp, mu](std::size_t p, double ta, double tb) {
        return (mu * sp->flat_trace(p) - 1.0) * (tb - ta);
    });
    prob.nonlinear = [&, sp, mu](double t, const Eigen::VectorXd& v) -> Eigen::VectorXd {
        const Eigen::VectorXd lin =
            sp->apply(sp->forward(v), [&](std::size_t p) { return std::complex<double>(mu * sp->flat_trace(p) - 1.0); }).real();
        return rhs(t, base + v) - lin;
    };

    ParabolicResult res;
    auto record = [&](double t, const Eigen::VectorXd& u) {
        const Eigen::VectorXd w = u - u_inf.values();
        Eigen::Index pmax = 0;
        ParabolicSample s;
        s.t = t;
        s.A = w.maxCoeff(&pmax);
        s.A_min = w.minCoeff();
        s.deviation = w.cwiseAbs().maxCoeff();
        const auto sig = sigma_at(t);
        const auto now = detail::log_density(detail::shifted_form(sig, ScalarField(grid, u)), "parabolic_gke");
        const auto lim = detail::log_density(detail::shifted_form(sig, u_inf), "parabolic_gke limit");
        s.spatial_at_max = now[pmax] - lim[pmax];
        res.max_spatial_at_max = std::max(res.max_spatial_at_max, s.spatial_at_max);
        res.samples.push_back(s);
    };

    double t = 0;
    Eigen::VectorXd v = u0.values() - base;
    record(t, u0.values());
    AdaptiveLawson driver(prob, cfg.step);
    try {
        driver.advance(t, v, cfg.horizon, [&](double tt, const Eigen::VectorXd& vv, double) { record(tt, base + vv); });
    } catch (const StiffnessBreakdown& e) {
        throw SolverError("parabolic_gke: positivity lost near t = " + std::to_string(e.time()), {});
    }
    res.stats = driver.stats();
    res.u = ScalarField(grid, base + v);

    for (std::size_t i = 0; i + 1 < res.samples.size(); ++i) {
        const auto& a = res.samples[i];
        const auto& b = res.samples[i + 1];
        const double tm = 0.5 * (a.t + b.t);
        const double slack = ((b.A - a.A) / (b.t - a.t) + 0.5 * (a.A + b.A)) * std::exp(tm);
        res.C = std::max(res.C, slack);
        if (b.t <= 0.5 * cfg.horizon) res.C_first_half = std::max(res.C_first_half, slack);
    }
    return res;
}

}  // namespace collapse
