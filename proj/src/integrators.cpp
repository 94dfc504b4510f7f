#include "collapse/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "collapse/fields.hpp"
#include "collapse/spectral.hpp"

namespace collapse {

Eigen::VectorXd lawson_rk4_step(const LawsonProblem& prob, double t, const Eigen::VectorXd& u, double h) {
    const double tm = t + 0.5 * h, t1 = t + h;
    auto phi = [&](const Eigen::VectorXd& v, double a, double b) -> Eigen::VectorXd {
        return prob.propagate ? prob.propagate(v, a, b) : v;
    };
    const Eigen::VectorXd n1 = prob.nonlinear(t, u);
    const Eigen::VectorXd u_half = phi(u, t, tm);
    const Eigen::VectorXd n2 = prob.nonlinear(tm, phi(u + 0.5 * h * n1, t, tm));
    const Eigen::VectorXd n3 = prob.nonlinear(tm, u_half + 0.5 * h * n2);
    const Eigen::VectorXd n4 = prob.nonlinear(t1, phi(u, t, t1) + h * phi(n3, tm, t1));
    return phi(u + (h / 6) * n1, t, t1) + phi((h / 3) * (n2 + n3), tm, t1) + (h / 6) * n4;
}

AdaptiveLawson::AdaptiveLawson(LawsonProblem prob, AdaptiveConfig cfg)
    : prob_(std::move(prob)), cfg_(cfg), dt_(cfg.dt0) {}

void AdaptiveLawson::advance(double& t, Eigen::VectorXd& u, double t_end, const Observer& observer) {
    while (t < t_end) {
        if (dt_ < cfg_.dt_min) throw StiffnessBreakdown(t, dt_);
        const bool last = t + dt_ >= t_end * (1 - 1e-14);
        const double h = last ? t_end - t : dt_;

        Eigen::VectorXd coarse, fine;
        bool ok = true;
        try {
            coarse = lawson_rk4_step(prob_, t, u, h);
            fine = lawson_rk4_step(prob_, t, u, 0.5 * h);
            fine = lawson_rk4_step(prob_, t + 0.5 * h, fine, 0.5 * h);
            ok = coarse.allFinite() && fine.allFinite();
        } catch (const std::domain_error&) {
            ok = false;
        } catch (const GeometryError&) {
            ok = false;
        }
        double err = 0;
        if (ok) {
            err = (fine - coarse).cwiseAbs().maxCoeff() / 15.0;
            ok = err <= cfg_.tol;
        }
        Eigen::VectorXd next;
        if (ok) {
            next = fine + (fine - coarse) / 15.0;
            if (prob_.guard && !prob_.guard(t + h, u, next)) ok = false;
        }
        if (!ok) {
            ++stats_.rejected;
            dt_ = 0.5 * h;
            continue;
        }
        ++stats_.accepted;
        t = last ? t_end : t + h;
        u = std::move(next);
        stats_.dt = h;
        if (observer) observer(t, u, h);
        if (!last && err < cfg_.tol / 32) dt_ = std::min(2 * dt_, cfg_.dt_max);
    }
}

std::function<Eigen::VectorXd(const Eigen::VectorXd&, double, double)> spectral_propagator(
    const GridSpec& grid, std::function<double(std::size_t p, double ta, double tb)> exponent) {
    auto sp = std::make_shared<Spectral<double>>(grid);
    return [sp, exponent = std::move(exponent)](const Eigen::VectorXd& v, double ta, double tb) -> Eigen::VectorXd {
        const auto out = sp->apply(sp->forward(v), [&](std::size_t p) { return std::complex<double>(std::exp(exponent(p, ta, tb))); });
        return out.real();
    };
}

}  // namespace collapse
