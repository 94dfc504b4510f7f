#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "collapse/krf.hpp"
#include "collapse/spectral.hpp"

using namespace collapse;
using std::numbers::pi;

namespace {

// e^{-t} int_0^t e^s p log(1 + (a0 - 1) e^{-s}) ds by composite Simpson
double phi_quadrature(double t, double a0, int p) {
    if (t == 0.0) return 0.0;
    const int n = 4000;
    const double h = t / n;
    auto f = [&](double s) { return std::exp(s - t) * p * std::log(1 + (a0 - 1) * std::exp(-s)); };
    double sum = f(0) + f(t);
    for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(i * h);
    return sum * h / 3.0;
}

FiberFlowSpec cos_spec(double a0, double b0, double amp, int n = 16) {
    FiberFlowSpec s;
    s.a0 = a0;
    s.b0 = b0;
    s.fiber = GridSpec::torus(1, n);
    // i ddbar of this potential has relative size amp against b0
    s.phi0 = ScalarField::sample(s.fiber, [&](const auto& x) { return -amp * b0 / (pi * pi) * std::cos(2 * pi * x[0]); });
    return s;
}

}  // namespace

TEST_SUITE("product flow") {
    TEST_CASE("closed forms and quadrature oracle") {
        for (const auto& [a0, b0, p] : {std::tuple{2.0, 1.0, 1}, std::tuple{0.3, 5.0, 1}, std::tuple{1.5, 0.2, 2}}) {
            ProductModelSpec spec{a0, b0, p, 1};
            ProductFlow flow(spec);
            auto s = flow.initial_state();
            double worst_phi = 0, worst_ab = 0, worst_ratio = 0;
            int seen = 0;
            flow.advance(s, 10.0, AdaptiveConfig{1e-2, 1e-12, 0.25, 1e-12}, [&](const ProductFlow::State& st) {
                if (++seen % 5) return;
                worst_phi = std::max(worst_phi, std::abs(st.phi - phi_quadrature(st.t, a0, p)));
                const auto ref = reference_metric(st.t, spec);
                worst_ab = std::max({worst_ab, std::abs(st.a - ref.base), std::abs(st.b - ref.fiber)});
                const auto d = flow.monitors(st);
                worst_ratio = std::max({worst_ratio, std::abs(d.ratio_min - 1), std::abs(d.ratio_max - 1)});
            });
            CHECK(s.t == 10.0);
            CHECK(worst_phi <= 1e-8);
            CHECK(worst_ab <= 1e-8);
            CHECK(worst_ratio <= 1e-10);
            CHECK(std::abs(s.phi - phi_quadrature(10.0, a0, p)) <= 1e-8);
        }
    }

    TEST_CASE("monitors on the product") {
        ProductFlow flow(ProductModelSpec{2.0, 1.0, 1, 1});
        auto s = flow.initial_state();
        flow.advance(s, 4.0, AdaptiveConfig{});
        const auto d = flow.monitors(s, true);
        CHECK(d.curvature == doctest::Approx(1.0 / s.a).epsilon(1e-12));
        ProductFlow two(ProductModelSpec{3.0, 0.5, 2, 2});
        CHECK(two.monitors(two.initial_state()).curvature == doctest::Approx(std::sqrt(2.0) / 3.0).epsilon(1e-12));
        CHECK(d.diameter == doctest::Approx(std::sqrt(s.b) * std::sqrt(2.0) / 2).epsilon(1e-12));
        CHECK(d.sup_v == 0.0);
        CHECK(d.trace_sup == doctest::Approx(1.0 / s.a));
    }
}

TEST_SUITE("fiber flow") {
    TEST_CASE("reduced right side equals the unreduced Monge-Ampere quotient") {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> ut(0.0, 8.0), uy(0.3, 3.0), uc(-1.0, 1.0);
        const auto spec = cos_spec(1.7, 2.5, 0.3, 32);
        FiberFlow flow(spec);
        const Spectral<double> sp(spec.fiber);
        double worst = 0;
        for (int trial = 0; trial < 10; ++trial) {
            const double t = ut(rng), y = uy(rng);
            const double c1 = uc(rng), c2 = uc(rng);
            // small enough that b0 e^{-t} + phi_xixibar stays positive
            const double s = 0.02 * std::exp(-t);
            const auto phi = ScalarField::sample(spec.fiber, [&](const auto& x) {
                return s * (c1 * std::sin(2 * pi * x[0]) + c2 * std::cos(2 * pi * (x[0] + x[1])));
            });
            const auto rhs = flow.map_rhs({t, phi});
            const auto w = ddbar(phi);
            const double a_hat = 1 + (spec.a0 - 1) * std::exp(-t);
            const double gB = 1.0 / (2 * y * y);
            const std::size_t p = static_cast<std::size_t>(trial * 97) % spec.fiber.size();
            Eigen::Matrix2cd om;
            om << a_hat * gB, 0.0, 0.0, spec.b0 * std::exp(-t) + w.component(0, 0)[p];
            const double omega_vol = spec.b0 * gB;
            const double oracle = std::log(om.determinant().real() / (std::exp(-t) * omega_vol)) - phi[p];
            worst = std::max(worst, std::abs(rhs[p] - oracle));
        }
        CHECK(worst <= 1e-12);
    }

    TEST_CASE("Kahler violation is reported") {
        const auto spec = cos_spec(1.0, 1.0, 0.5);
        FiberFlow flow(spec);
        auto s = flow.initial_state();
        s.t = 2.0;  // e^t * 0.5 > 1
        CHECK_THROWS_AS(flow.map_rhs(s), GeometryError);
    }

    TEST_CASE("explicit Euler forward-backward pair returns within O(dt^2)") {
        FiberFlow flow(cos_spec(2.0, 1.0, 0.2));
        const auto s0 = flow.initial_state();
        double errs[2];
        for (int k = 0; k < 2; ++k) {
            const double dt = 1e-3 / (1 << k);
            ScalarField f0 = flow.map_rhs(s0);
            ScalarField p1 = s0.phi + dt * f0;
            ScalarField f1 = flow.map_rhs({dt, p1});
            ScalarField p2 = p1 - dt * f1;
            errs[k] = (p2 - s0.phi).sup_norm();
        }
        CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.05));
    }

    TEST_CASE("adaptive run to the horizon: collapse monitors") {
        const auto spec = cos_spec(2.0, 1.0, 0.2);
        FiberFlow flow(spec);
        auto s = flow.initial_state();
        double q_max = -1e300, ratio_lo = 1e300, margin_lo = 1e300;
        flow.advance(s, 10.0, AdaptiveConfig{1e-2, 1e-12, 0.25, 1e-8}, [&](const FiberFlow::State& st) {
            const auto d = flow.monitors(st);
            q_max = std::max(q_max, d.q_max);
            ratio_lo = std::min(ratio_lo, d.ratio_min);
            margin_lo = std::min(margin_lo, d.kahler_margin);
        });
        CHECK(s.t == 10.0);
        const auto d = flow.monitors(s);
        CHECK(d.fiber_limit < 1e-6);
        CHECK(std::abs(d.ratio_max - 1) < 1e-6);
        CHECK(std::abs(d.ratio_min - 1) < 1e-6);
        CHECK(d.sup_v < 1e-6);
        CHECK(std::isfinite(q_max));
        CHECK(q_max < 5.0);
        CHECK(margin_lo > 0.0);
        CHECK(ratio_lo > 0.0);
        CHECK(d.curvature == doctest::Approx(1.0 / reference_metric(10.0, spec).base).epsilon(1e-6));
        // phi converges to the base potential solving phi' = log a_hat - phi
        CHECK(std::abs(fiber_average(s.phi) - phi_quadrature(10.0, 2.0, 1)) < 1e-7);
    }

    TEST_CASE("lowest mode decays like exp(-(pi^2/b0)(e^t - 1))") {
        const double b0 = 4.0;
        const auto spec = cos_spec(1.5, b0, 1e-4);
        FiberFlow flow(spec);
        auto s = flow.initial_state();
        const double amp0 = lowest_mode_amplitude(normalized_potential(0, s.phi));
        CHECK(amp0 == doctest::Approx(1e-4 * b0 / (pi * pi)).epsilon(1e-10));
        std::vector<double> ts, amps;
        for (int k = 0; k <= 40; ++k) {
            const double tk = 0.05 * k;
            if (tk > 0) flow.advance(s, tk, AdaptiveConfig{1e-2, 1e-12, 0.25, 1e-10});
            ts.push_back(s.t);
            amps.push_back(lowest_mode_amplitude(normalized_potential(s.t, s.phi)));
            const double expect = amp0 * std::exp(-(pi * pi / b0) * (std::exp(s.t) - 1));
            CHECK(amps.back() == doctest::Approx(expect).epsilon(1e-3));
        }
        const auto rep = rate_fit("mode", ts, amps, RateAbscissa::ExpTime, 0.0, 2.0);
        CHECK(rep.slope == doctest::Approx(-pi * pi / b0).epsilon(1e-3));
    }

    TEST_CASE("fiber diameter decays like e^{-t/2}") {
        FiberFlow flow(cos_spec(2.0, 1.0, 0.2));
        auto s = flow.initial_state();
        std::vector<double> ts, ds;
        for (int k = 0; k <= 20; ++k) {
            const double tk = 0.5 * k;
            if (tk > 0) flow.advance(s, tk, AdaptiveConfig{});
            ts.push_back(tk);
            ds.push_back(flow.monitors(s, true).diameter);
        }
        const auto rep = rate_fit("diameter", ts, ds);
        CHECK(rep.slope == doctest::Approx(-0.5).epsilon(1e-4));
        CHECK(rep.window_begin == 5.0);
    }

    TEST_CASE("large initial deformation survives under the margin guard") {
        FiberFlow flow(cos_spec(1.0, 1.0, 0.9));
        auto s = flow.initial_state();
        double margin_lo = 1e300;
        flow.advance(s, 3.0, AdaptiveConfig{0.25, 1e-12, 0.25, 1e-8},
                     [&](const FiberFlow::State& st) { margin_lo = std::min(margin_lo, flow.monitors(st).kahler_margin); });
        CHECK(margin_lo > 0.0);
        CHECK(s.t == 3.0);
    }
}

TEST_SUITE("rate_fit") {
    TEST_CASE("synthetic exponentials") {
        std::vector<double> t, y1, y2, y3;
        const double b0 = 3.0;
        for (int i = 0; i <= 40; ++i) {
            t.push_back(0.25 * i);
            y1.push_back(2.0 * std::exp(-t.back()));
            y2.push_back(0.7 * std::exp(-0.5 * t.back()));
            y3.push_back(std::exp(-(pi * pi / b0) * (std::exp(0.05 * i) - 1)));
        }
        CHECK(rate_fit("a", t, y1).slope == doctest::Approx(-1.0).epsilon(1e-6));
        CHECK(rate_fit("b", t, y2).slope == doctest::Approx(-0.5).epsilon(1e-6));
        std::vector<double> t3;
        for (int i = 0; i <= 40; ++i) t3.push_back(0.05 * i);
        const auto r3 = rate_fit("c", t3, y3, RateAbscissa::ExpTime, 0.0, 2.0);
        CHECK(r3.slope == doctest::Approx(-pi * pi / b0).epsilon(1e-6));
        CHECK(r3.t.size() == 41u);
        const auto r1 = rate_fit("a", t, y1);
        CHECK(r1.window_begin == 5.0);
        CHECK(r1.t.size() == 21u);
        CHECK(r1.residual < 1e-12);
    }

    TEST_CASE("bad input") {
        std::vector<double> t{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, y(10, 1.0);
        y[8] = 0.0;
        CHECK_THROWS_AS(rate_fit("z", t, y, RateAbscissa::Time, 0, 9), std::domain_error);
        y[8] = 1.0;
        CHECK_THROWS_AS(rate_fit("z", t, y), std::invalid_argument);
        CHECK_NOTHROW(rate_fit("z", t, y, RateAbscissa::Time, 0, 9));
    }
}
