#include "collapse/krf.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "collapse/diameter.hpp"
#include "collapse/kahler.hpp"
#include "collapse/spectral.hpp"

namespace collapse {

namespace {

// 2-jet at y = 1 of a * g_B on each of p base factors times the flat b * I_r.
MetricJet<double> product_jet(double a, int p, double b, int r) {
    const int m = p + r;
    const auto base = hyperbolic_jet(a, 1.0);
    MetricJet<double> jet;
    jet.g = Eigen::MatrixXcd::Zero(m, m);
    jet.d.assign(m, Eigen::MatrixXcd::Zero(m, m));
    jet.dd.assign(m, std::vector<Eigen::MatrixXcd>(m, Eigen::MatrixXcd::Zero(m, m)));
    for (int i = 0; i < p; ++i) {
        jet.g(i, i) = base.g(0, 0);
        jet.d[i](i, i) = base.d[0](0, 0);
        jet.dd[i][i](i, i) = base.dd[0][0](0, 0);
    }
    for (int i = p; i < m; ++i) jet.g(i, i) = b;
    return jet;
}

}  // namespace

ProductFlow::ProductFlow(ProductModelSpec spec) : spec_(spec) { spec_.validate(); }

ProductFlow::State ProductFlow::initial_state() const { return {0.0, 0.0, spec_.a0, spec_.b0}; }

double ProductFlow::map_rhs(double t, double phi) const {
    return spec_.base_dim * std::log(reference_metric(t, spec_).base) - phi;
}

void ProductFlow::advance(State& s, double t_end, const AdaptiveConfig& cfg,
                          const std::function<void(const State&)>& observer) const {
    LawsonProblem prob;
    prob.nonlinear = [this](double t, const Eigen::VectorXd& y) -> Eigen::VectorXd {
        // the fiber scale is carried as log b so its relative error stays at rounding
        const auto ab = product_flow_rhs({y[1], std::exp(y[2])});
        return Eigen::Vector3d(map_rhs(t, y[0]), ab.base, ab.fiber / std::exp(y[2]));
    };
    prob.guard = [](double, const Eigen::VectorXd&, const Eigen::VectorXd& y) { return y[1] > 0; };
    Eigen::VectorXd y = Eigen::Vector3d(s.phi, s.a, std::log(s.b));
    AdaptiveLawson drv(prob, cfg);
    drv.advance(s.t, y, t_end, [&](double t, const Eigen::VectorXd& yy, double) {
        if (observer) observer({t, yy[0], yy[1], std::exp(yy[2])});
    });
    s.phi = y[0];
    s.a = y[1];
    s.b = std::exp(y[2]);
}

Diagnostics ProductFlow::monitors(const State& s, bool with_diameter) const {
    const auto ref = reference_metric(s.t, spec_);
    const int p = spec_.base_dim, r = spec_.fiber_dim;
    Diagnostics d;
    d.t = s.t;
    d.sup_phi = std::abs(s.phi);
    d.sup_phi_dot = std::abs(map_rhs(s.t, s.phi));
    // omega_t^n / (e^{-rt} Omega) with Omega = b0^r omega_B^p omega_F^r
    d.volume_min = d.volume_max = std::pow(s.a, p) * std::pow(s.b * std::exp(s.t) / spec_.b0, r);
    d.trace_sup = p / s.a;
    const double rb = s.a / ref.base, rf = s.b / ref.fiber;
    d.ratio_min = std::min(rb, rf);
    d.ratio_max = std::max(rb, rf);
    d.sup_v = 0;
    d.q_max = std::log(std::exp(-s.t) * (p * spec_.a0 / s.a + r * spec_.b0 / s.b));
    d.kahler_margin = s.b * std::exp(s.t);
    d.fiber_limit = std::abs(s.b * std::exp(s.t) - spec_.b0) / spec_.b0;
    d.mode_amplitude = 0;
    d.curvature = curvature_norm(product_jet(s.a, p, s.b, r));
    if (with_diameter) {
        const auto g = GridSpec::torus(1, 16);
        d.diameter = std::sqrt(static_cast<double>(r)) * fiber_diameter(s.b * HermitianField::identity(g));
    }
    return d;
}

FiberFlow::FiberFlow(FiberFlowSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

FiberFlow::State FiberFlow::initial_state() const { return {0.0, spec_.phi0}; }

ScalarField FiberFlow::kahler_coefficient(const State& s) const {
    const auto w = ddbar(s.phi);
    ScalarField out(s.phi.grid(), (spec_.b0 + std::exp(s.t) * w.component(0, 0).real().array()).matrix());
    return out;
}

ScalarField FiberFlow::map_rhs(const State& s) const {
    const auto coef = kahler_coefficient(s);
    const double log_a = std::log(reference_metric(s.t, spec_).base);
    ScalarField out(s.phi.grid());
    for (std::size_t p = 0; p < coef.size(); ++p) {
        if (!(coef[p] > 0.0)) throw GeometryError("fiber flow: Kahler condition b0 + e^t phi_xixibar > 0 violated", p);
        out[p] = log_a + std::log(coef[p] / spec_.b0) - s.phi[p];
    }
    return out;
}

LawsonProblem FiberFlow::problem() const {
    const auto sp = std::make_shared<Spectral<double>>(spec_.fiber);
    const double b0 = spec_.b0;
    LawsonProblem prob;
    // L_k(t) = (e^t / b0) s_k - 1 with s_k the flat d dbar trace symbol.
    prob.propagate = spectral_propagator(spec_.fiber, [sp, b0](std::size_t p, double ta, double tb) {
        return sp->flat_trace(p) * (std::exp(tb) - std::exp(ta)) / b0 - (tb - ta);
    });
    prob.nonlinear = [this](double t, const Eigen::VectorXd& phi) -> Eigen::VectorXd {
        // log a_hat + log(1 + X) - X with X = e^t phi_{xi xibar} / b0
        const State s{t, ScalarField(spec_.fiber, phi)};
        const auto coef = kahler_coefficient(s);
        const double log_a = std::log(reference_metric(t, spec_).base);
        Eigen::VectorXd out(phi.size());
        for (Eigen::Index p = 0; p < phi.size(); ++p) {
            const double x = coef[p] / spec_.b0 - 1.0;
            if (!(x > -1.0)) throw GeometryError("fiber flow: Kahler condition violated", static_cast<std::size_t>(p));
            out[p] = log_a + std::log1p(x) - x;
        }
        return out;
    };
    prob.guard = [this](double t, const Eigen::VectorXd& before, const Eigen::VectorXd& after) {
        // t is the end of the step; the start margin is taken at t as well,
        // which is conservative because e^t only grows.
        const double m0 = kahler_coefficient({t, ScalarField(spec_.fiber, before)}).values().minCoeff();
        const double m1 = kahler_coefficient({t, ScalarField(spec_.fiber, after)}).values().minCoeff();
        return m1 >= 0.1 * m0;
    };
    return prob;
}

FiberFlow::State FiberFlow::step(const State& s, double dt) const {
    if (!(dt > 0)) throw std::invalid_argument("FiberFlow::step: dt must be positive");
    return {s.t + dt, ScalarField(spec_.fiber, lawson_rk4_step(problem(), s.t, s.phi.values(), dt))};
}

void FiberFlow::advance(State& s, double t_end, const AdaptiveConfig& cfg,
                        const std::function<void(const State&)>& observer) const {
    Eigen::VectorXd y = s.phi.values();
    AdaptiveLawson drv(problem(), cfg);
    drv.advance(s.t, y, t_end, [&](double t, const Eigen::VectorXd& yy, double) {
        if (observer) observer({t, ScalarField(spec_.fiber, yy)});
    });
    s.phi = ScalarField(spec_.fiber, y);
}

Diagnostics FiberFlow::monitors(const State& s, bool with_diameter, double q_constant) const {
    const auto coef = kahler_coefficient(s);
    const auto rhs = map_rhs(s);
    const auto ref = reference_metric(s.t, spec_);
    const double b0 = spec_.b0;
    const auto v = normalized_potential(s.t, s.phi);

    Diagnostics d;
    d.t = s.t;
    d.sup_phi = s.phi.sup_norm();
    d.sup_phi_dot = rhs.sup_norm();
    // omega_t^2 / (e^{-t} Omega) = a_hat (b0 + e^t phi_xixibar) / b0
    const Eigen::ArrayXd vol = ref.base * coef.values().array() / b0;
    d.volume_min = vol.minCoeff();
    d.volume_max = vol.maxCoeff();
    d.trace_sup = 1.0 / ref.base;
    // base eigenvalue ratio is exactly 1; fiber ratio is 1 + X
    const Eigen::ArrayXd fiber_ratio = coef.values().array() / b0;
    d.ratio_min = std::min(1.0, fiber_ratio.minCoeff());
    d.ratio_max = std::max(1.0, fiber_ratio.maxCoeff());
    d.sup_v = v.sup_norm();
    const Eigen::ArrayXd q =
        (std::exp(-s.t) * spec_.a0 / ref.base + b0 / coef.values().array()).log() - q_constant * v.values().array();
    d.q_max = q.maxCoeff();
    d.kahler_margin = coef.values().minCoeff();
    d.fiber_limit = fiber_limit_check(s, spec_);
    d.mode_amplitude = lowest_mode_amplitude(v);

    // fiber metric e^{-t} coef; product with the constant-curvature base
    HermitianField fiber(spec_.fiber);
    fiber.component(0, 0) = (std::exp(-s.t) * coef.values()).cast<std::complex<double>>();
    const double fiber_rm = riemann_norm(fiber).values().maxCoeff();
    d.curvature = std::hypot(curvature_norm(hyperbolic_jet(ref.base, 1.0)), fiber_rm);
    if (with_diameter) d.diameter = fiber_diameter(fiber);
    return d;
}

double fiber_average(const ScalarField& phi) {
    // Neumaier summation keeps the mean exact to rounding for long grids.
    double sum = 0, comp = 0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double x = phi[i];
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return (sum + comp) / static_cast<double>(phi.size());
}

ScalarField normalized_potential(double t, const ScalarField& phi) {
    const double mean = fiber_average(phi);
    ScalarField out(phi.grid(), std::exp(t) * (phi.values().array() - mean).matrix());
    return out;
}

double fiber_limit_check(const FiberFlow::State& s, const FiberFlowSpec& spec) {
    const auto w = ddbar(s.phi);
    return std::exp(s.t) * w.component(0, 0).real().cwiseAbs().maxCoeff() / spec.b0;
}

double lowest_mode_amplitude(const ScalarField& f) {
    const Spectral<double> sp(f.grid());
    const auto hat = sp.forward(f.values());
    const auto& g = f.grid();
    double best = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        int k2 = 0;
        for (int d = 0; d < g.real_dim(); ++d) {
            const int n = g.points_along(d), i = g.index_along(p, d);
            const int k = i <= n / 2 ? i : i - n;
            k2 += k * k;
        }
        if (k2 == 1) best = std::max(best, std::abs(hat[static_cast<Eigen::Index>(p)]));
    }
    // cos(2 pi x) has two nonzero coefficients of size N/2 each
    return 2.0 * best / static_cast<double>(g.size());
}

RateReport rate_fit(std::string quantity, const std::vector<double>& t, const std::vector<double>& y,
                    RateAbscissa mode, double window_begin, double window_end) {
    if (t.size() != y.size() || t.empty()) throw std::invalid_argument("rate_fit: need matching, nonempty samples");
    RateReport rep;
    rep.quantity = std::move(quantity);
    rep.mode = mode;
    rep.window_begin = std::isnan(window_begin) ? t.front() + 0.5 * (t.back() - t.front()) : window_begin;
    rep.window_end = std::isnan(window_end) ? t.back() : window_end;
    std::vector<double> xs, ls;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < rep.window_begin - 1e-12 || t[i] > rep.window_end + 1e-12) continue;
        if (!(y[i] > 0.0) || !std::isfinite(y[i]))
            throw std::domain_error("rate_fit: non-positive sample for " + rep.quantity + " at t = " + std::to_string(t[i]));
        rep.t.push_back(t[i]);
        rep.y.push_back(y[i]);
        xs.push_back(mode == RateAbscissa::Time ? t[i] : std::exp(t[i]));
        ls.push_back(std::log(y[i]));
    }
    if (xs.size() < 8)
        throw std::invalid_argument("rate_fit: need at least 8 samples in the window for " + rep.quantity);
    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i, 0) = xs[i];
        a(i, 1) = 1.0;
        b[i] = ls[i];
    }
    const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
    rep.slope = c[0];
    rep.intercept = c[1];
    rep.residual = (a * c - b).cwiseAbs().maxCoeff();
    return rep;
}

}  // namespace collapse
