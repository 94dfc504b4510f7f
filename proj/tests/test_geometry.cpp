#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "collapse/diameter.hpp"
#include "collapse/kahler.hpp"
#include "collapse/spectral.hpp"

using namespace collapse;
using std::numbers::pi;
using Cx = std::complex<double>;

namespace {

// Fourth-order central differences of an analytic function of (x, y).
template <typename F>
double fd_dx(F f, double x, double y, double h = 2e-3) {
    return (-f(x + 2 * h, y) + 8 * f(x + h, y) - 8 * f(x - h, y) + f(x - 2 * h, y)) / (12 * h);
}
template <typename F>
double fd_dy(F f, double x, double y, double h = 2e-3) {
    return (-f(x, y + 2 * h) + 8 * f(x, y + h) - 8 * f(x, y - h) + f(x, y - 2 * h)) / (12 * h);
}
template <typename F>
double fd_dxx(F f, double x, double y, double h = 2e-3) {
    return (-f(x + 2 * h, y) + 16 * f(x + h, y) - 30 * f(x, y) + 16 * f(x - h, y) - f(x - 2 * h, y)) / (12 * h * h);
}
template <typename F>
double fd_dyy(F f, double x, double y, double h = 2e-3) {
    return (-f(x, y + 2 * h) + 16 * f(x, y + h) - 30 * f(x, y) + 16 * f(x, y - h) - f(x, y - 2 * h)) / (12 * h * h);
}
// d^2/dz dzbar = (f_xx + f_yy) / 4
template <typename F>
double fd_ddbar(F f, double x, double y) {
    return 0.25 * (fd_dxx(f, x, y) + fd_dyy(f, x, y));
}

// Cofactor expansion along the first row.
Cx cofactor_det(const Eigen::MatrixXcd& m) {
    const auto n = m.rows();
    if (n == 1) return m(0, 0);
    Cx det = 0;
    for (Eigen::Index c = 0; c < n; ++c) {
        Eigen::MatrixXcd minor(n - 1, n - 1);
        for (Eigen::Index i = 1; i < n; ++i)
            for (Eigen::Index j = 0, jj = 0; j < n; ++j)
                if (j != c) minor(i - 1, jj++) = m(i, j);
        det += ((c % 2) ? -1.0 : 1.0) * m(0, c) * cofactor_det(minor);
    }
    return det;
}

Eigen::MatrixXcd random_positive(std::mt19937_64& rng, int m) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXcd b(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) b(i, j) = Cx(n01(rng), n01(rng));
    Eigen::MatrixXcd h = b * b.adjoint() + 0.1 * Eigen::MatrixXcd::Identity(m, m);
    return 0.5 * (h + h.adjoint());
}

HermitianField random_positive_field(const GridSpec& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    HermitianField f(g);
    for (std::size_t p = 0; p < g.size(); ++p) f.set(p, random_positive(rng, g.complex_dim));
    return f;
}

HermitianField conformal_field(const GridSpec& g, const std::function<double(double, double)>& gfun) {
    HermitianField f(g);
    for (std::size_t p = 0; p < g.size(); ++p) f.component(0, 0)[p] = gfun(g.coord(p, 0), g.coord(p, 1));
    return f;
}

}  // namespace

TEST_SUITE("ddbar") {
    TEST_CASE("zero potential gives zero form") {
        const auto g = GridSpec::torus(1, 16);
        const auto w = ddbar(ScalarField(g));
        CHECK(w.sup_norm() == 0.0);
    }

    TEST_CASE("constant potential gives exactly zero") {
        const auto g = GridSpec::torus(2, 8);
        const auto w = ddbar(ScalarField::constant(g, 0.1));
        CHECK(w.sup_norm() == 0.0);
    }

    TEST_CASE("cos(2 pi x) has component -pi^2 cos(2 pi x)") {
        const auto g = GridSpec::torus(1, 32);
        const auto phi = ScalarField::sample(g, [](const auto& x) { return std::cos(2 * pi * x[0]); });
        const auto w = ddbar(phi);
        double err = 0;
        for (std::size_t p = 0; p < g.size(); ++p)
            err = std::max(err, std::abs(w.component(0, 0)[p] - Cx(-pi * pi * std::cos(2 * pi * g.coord(p, 0)))));
        CHECK(err < 1e-12);
    }

    TEST_CASE("sin sin matches symbolic and finite-difference oracles") {
        const auto g = GridSpec::torus(1, 32);
        auto f = [](double x, double y) { return std::sin(2 * pi * x) * std::sin(2 * pi * y); };
        const auto phi = ScalarField::sample(g, [&](const auto& x) { return f(x[0], x[1]); });
        const auto w = ddbar(phi);
        double err = 0;
        for (std::size_t p = 0; p < g.size(); ++p) {
            const double expect = -2 * pi * pi * f(g.coord(p, 0), g.coord(p, 1));
            err = std::max(err, std::abs(w.component(0, 0)[p] - expect));
        }
        CHECK(err < 1e-12);

        std::mt19937_64 rng(7);
        std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
        for (int i = 0; i < 5; ++i) {
            const auto p = pick(rng);
            const double fd = fd_ddbar(f, g.coord(p, 0), g.coord(p, 1));
            CHECK(std::abs(w.component(0, 0)[p].real() - fd) < 1e-6);
        }
    }

    TEST_CASE("mixed component on C^2") {
        const auto g = GridSpec::torus(2, 8);
        // every component of d dbar cos(2 pi (x1 + x2)) is -pi^2 cos
        const auto phi = ScalarField::sample(g, [](const auto& x) { return std::cos(2 * pi * (x[0] + x[2])); });
        const auto w = ddbar(phi);
        double err = 0;
        for (std::size_t p = 0; p < g.size(); ++p) {
            const double c = std::cos(2 * pi * (g.coord(p, 0) + g.coord(p, 2)));
            err = std::max(err, std::abs(w.component(0, 1)[p] - Cx(-pi * pi * c)));
            err = std::max(err, std::abs(w.component(1, 1)[p] - Cx(-pi * pi * c)));
        }
        CHECK(err < 1e-12);
    }

    TEST_CASE("output is Hermitian and mean-free for random potentials") {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> n01;
        for (int trial = 0; trial < 3; ++trial) {
            const auto g = GridSpec::torus(2, 8);
            ScalarField phi(g);
            for (std::size_t p = 0; p < g.size(); ++p) phi[p] = n01(rng);
            const auto w = ddbar(phi);
            CHECK_NOTHROW(w.check_hermitian());
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) CHECK(std::abs(w.component(j, k).mean()) < 1e-13);
        }
    }

    TEST_CASE("long double instantiation differentiates trigonometric data") {
        const auto g = GridSpec::torus(1, 16);
        const auto phi = ScalarFieldT<long double>::sample(
            g, [](const auto& x) { return std::cos(2 * std::numbers::pi_v<long double> * x[0]); });
        const auto w = ddbar(phi);
        long double err = 0;
        for (std::size_t p = 0; p < g.size(); ++p) {
            const long double expect = -std::numbers::pi_v<long double> * std::numbers::pi_v<long double> *
                                       std::cos(2 * std::numbers::pi_v<long double> * g.coord(p, 0));
            err = std::max(err, std::abs(w.component(0, 0)[p].real() - expect));
        }
        CHECK(err < 1e-13L);
    }
}

TEST_SUITE("ma_density") {
    TEST_CASE("identity gives one") {
        const auto g = GridSpec::torus(2, 8);
        const auto d = ma_density(HermitianField::identity(g));
        CHECK((d.values().array() == 1.0).all());
    }

    TEST_CASE("constant diagonal gives the product") {
        const auto g = GridSpec::torus(2, 8);
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
        m(0, 0) = 2.5;
        m(1, 1) = 0.4;
        const auto d = ma_density(HermitianField::constant(g, m));
        CHECK(d.values().maxCoeff() == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(d.values().minCoeff() == doctest::Approx(1.0).epsilon(1e-15));
    }

    TEST_CASE("random 3x3 positive field matches cofactor expansion") {
        auto g = GridSpec::torus(3, 8);
        const auto w = random_positive_field(g, 3);
        const auto d = ma_density(w);
        double err = 0;
        for (std::size_t p = 0; p < g.size(); p += 97) {
            const Cx ref = cofactor_det(w.at(p));
            err = std::max(err, std::abs(d[p] - ref.real()) / std::abs(ref));
        }
        CHECK(err < 1e-12);
    }

    TEST_CASE("homogeneity of degree m") {
        const auto g = GridSpec::torus(2, 8);
        const auto w = random_positive_field(g, 5);
        const auto d1 = ma_density(w);
        const auto d2 = ma_density(3.0 * w);
        CHECK(((d2.values() - 9.0 * d1.values()).cwiseAbs().array() <= 1e-12 * d2.values().cwiseAbs().array()).all());
    }
}

TEST_SUITE("trace_wrt") {
    TEST_CASE("trace of a form against itself is the dimension") {
        const auto g = GridSpec::torus(2, 8);
        const auto w = random_positive_field(g, 9);
        const auto tr = trace_wrt(w, w);
        CHECK((tr.values().array() - 2.0).abs().maxCoeff() < 1e-12);
    }

    TEST_CASE("diag(2,1) against identity gives 3/2") {
        const auto g = GridSpec::torus(2, 8);
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(2, 2);
        m(0, 0) = 2.0;
        const auto tr = trace_wrt(HermitianField::constant(g, m), HermitianField::identity(g));
        CHECK((tr.values().array() - 1.5).abs().maxCoeff() < 1e-15);
    }

    TEST_CASE("random pair matches explicit inverse oracle and is linear") {
        const auto g = GridSpec::torus(2, 8);
        const auto w = random_positive_field(g, 13);
        const auto e1 = random_positive_field(g, 17);
        const auto e2 = random_positive_field(g, 19);
        const auto tr1 = trace_wrt(w, e1);
        double err = 0;
        for (std::size_t p = 0; p < g.size(); ++p) {
            const double ref = (w.at(p).inverse() * e1.at(p)).trace().real();
            err = std::max(err, std::abs(tr1[p] - ref) / std::abs(ref));
        }
        CHECK(err < 1e-12);
        const auto lin = trace_wrt(w, 2.0 * e1 + e2);
        const auto tr2 = trace_wrt(w, e2);
        CHECK((lin.values() - 2.0 * tr1.values() - tr2.values()).cwiseAbs().maxCoeff() < 1e-11);
    }

    TEST_CASE("non-positive reference reports the point") {
        const auto g = GridSpec::torus(1, 8);
        auto w = HermitianField::identity(g);
        w.component(0, 0)[5] = -1.0;
        try {
            trace_wrt(w, w);
            FAIL("expected GeometryError");
        } catch (const GeometryError& e) {
            CHECK(e.point() == 5);
        }
    }
}

TEST_SUITE("ricci_form") {
    TEST_CASE("flat metric is Ricci flat") {
        const auto g = GridSpec::torus(2, 8);
        Eigen::MatrixXcd m(2, 2);
        m << 2.0, Cx(0.3, 0.1), Cx(0.3, -0.1), 1.0;
        CHECK(ricci_form(HermitianField::constant(g, m)).sup_norm() == 0.0);
    }

    TEST_CASE("conformal metric e^f has Ricci form -ddbar f") {
        const auto g = GridSpec::torus(1, 32);
        auto f = [](double x, double) { return 0.1 * std::cos(2 * pi * x); };
        const auto w = conformal_field(g, [&](double x, double y) { return std::exp(f(x, y)); });
        const auto ric = ricci_form(w);
        auto minus_f = ScalarField::sample(g, [&](const auto& x) { return -f(x[0], x[1]); });
        const auto oracle = ddbar(minus_f);
        CHECK((ric - oracle).sup_norm() < 1e-8);
        // closed form: -d dbar f = 0.1 pi^2 cos(2 pi x)
        double err = 0;
        for (std::size_t p = 0; p < g.size(); ++p)
            err = std::max(err, std::abs(ric.component(0, 0)[p].real() - 0.1 * pi * pi * std::cos(2 * pi * g.coord(p, 0))));
        CHECK(err < 1e-8);
    }

    TEST_CASE("scale invariance") {
        const auto g = GridSpec::torus(1, 32);
        const auto w = conformal_field(g, [](double x, double y) { return 1.0 + 0.3 * std::sin(2 * pi * x) * std::cos(2 * pi * y); });
        CHECK((ricci_form(w) - ricci_form(7.0 * w)).sup_norm() < 1e-10);
    }

    TEST_CASE("non-positive density is an error") {
        const auto g = GridSpec::torus(1, 8);
        auto w = HermitianField::identity(g);
        w.component(0, 0)[3] = 0.0;
        CHECK_THROWS_AS(ricci_form(w), GeometryError);
    }
}

TEST_SUITE("riemann_norm") {
    TEST_CASE("flat metric has zero curvature") {
        const auto g = GridSpec::torus(2, 8);
        Eigen::MatrixXcd m(2, 2);
        m << 1.5, Cx(0.2, 0.4), Cx(0.2, -0.4), 1.0;
        CHECK(riemann_norm(HermitianField::constant(g, m)).sup_norm() < 1e-14);
    }

    TEST_CASE("Poincare metric: norm of a * g_B is 1/a") {
        // g = 1/(2 y^2) on the upper half plane has Ric = -g. Jets by hand:
        //   d_z g = i/(2 y^3), d_z dbar_z g = 3/(4 y^4)  =>  R = -g^2, ||Rm|| = 1.
        for (double a : {1.0, 0.5, 3.0}) {
            for (double y : {0.3, 1.0, 2.5}) {
                MetricJet<double> jet;
                jet.g = Eigen::MatrixXcd::Constant(1, 1, a / (2 * y * y));
                jet.d = {Eigen::MatrixXcd::Constant(1, 1, a * Cx(0, 1) / (2 * y * y * y))};
                jet.dd = {{Eigen::MatrixXcd::Constant(1, 1, a * 3.0 / (4 * y * y * y * y))}};
                CHECK(curvature_norm(jet) == doctest::Approx(1.0 / a).epsilon(1e-13));
            }
        }
    }

    TEST_CASE("perturbed flat torus agrees with finite differences") {
        const auto g = GridSpec::torus(1, 128);
        auto gm = [](double x, double y) { return 1.0 + 0.2 * std::cos(2 * pi * x) * std::sin(2 * pi * y) + 0.1 * std::sin(4 * pi * x); };
        const auto rm = riemann_norm(conformal_field(g, gm));
        std::mt19937_64 rng(21);
        std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
        for (int i = 0; i < 10; ++i) {
            const auto p = pick(rng);
            const double x = g.coord(p, 0), y = g.coord(p, 1);
            const double gv = gm(x, y);
            const Cx dzg = 0.5 * Cx(fd_dx(gm, x, y), -fd_dy(gm, x, y));
            const double r = -fd_ddbar(gm, x, y) + std::norm(dzg) / gv;
            CHECK(std::abs(rm[p] - std::abs(r) / (gv * gv)) < 1e-4);
        }
    }

    TEST_CASE("product of two curved factors adds in quadrature") {
        const auto g2 = GridSpec::torus(2, 16);
        const auto g1 = GridSpec::torus(1, 16);
        auto ga = [](double x, double y) { return 1.0 + 0.3 * std::cos(2 * pi * x) * std::cos(2 * pi * y); };
        auto gb = [](double x, double y) { return 2.0 + 0.5 * std::sin(2 * pi * y); };
        HermitianField w(g2);
        for (std::size_t p = 0; p < g2.size(); ++p) {
            w.component(0, 0)[p] = ga(g2.coord(p, 0), g2.coord(p, 1));
            w.component(1, 1)[p] = gb(g2.coord(p, 2), g2.coord(p, 3));
        }
        const auto rm = riemann_norm(w);
        const auto ra = riemann_norm(conformal_field(g1, ga));
        const auto rb = riemann_norm(conformal_field(g1, gb));
        double err = 0;
        for (std::size_t p = 0; p < g2.size(); p += 7) {
            std::size_t pa = g2.index_along(p, 0) * 16 + g2.index_along(p, 1);
            std::size_t pb = g2.index_along(p, 2) * 16 + g2.index_along(p, 3);
            err = std::max(err, std::abs(rm[p] - std::hypot(ra[pa], rb[pb])));
        }
        CHECK(err < 1e-10);
    }

    TEST_CASE("non-positive metric is an error") {
        const auto g = GridSpec::torus(1, 8);
        auto w = HermitianField::identity(g);
        w.component(0, 0)[2] = -0.5;
        CHECK_THROWS_AS(riemann_norm(w), GeometryError);
    }
}

TEST_SUITE("fiber_diameter") {
    TEST_CASE("flat unit torus has diameter sqrt(2)/2 and scales with sqrt(c)") {
        const auto g = GridSpec::torus(1, 32);
        const double d1 = fiber_diameter(HermitianField::identity(g));
        CHECK(std::abs(d1 - std::sqrt(2.0) / 2) <= 0.05 * std::sqrt(2.0) / 2);
        for (double c : {0.25, 4.0, 1e-3}) {
            const double dc = fiber_diameter(c * HermitianField::identity(g));
            CHECK(dc == doctest::Approx(std::sqrt(c) * d1).epsilon(1e-12));
        }
    }

    TEST_CASE("rectangular torus matches the lattice computation") {
        auto g = GridSpec::torus(1, 32);
        g.periods = {1.0, 0.4};
        const double c = 2.0;
        const double exact = std::sqrt(c) * std::sqrt(1.0 + 0.16) / 2;
        const double d = fiber_diameter(c * HermitianField::identity(g));
        CHECK(std::abs(d - exact) <= 0.05 * exact);
    }

    TEST_CASE("exact scaling for a non-constant metric") {
        const auto g = GridSpec::torus(1, 16);
        const auto w = conformal_field(g, [](double x, double y) { return 1.0 + 0.5 * std::sin(2 * pi * x) * std::cos(2 * pi * y); });
        CHECK(fiber_diameter(9.0 * w) == doctest::Approx(3.0 * fiber_diameter(w)).epsilon(1e-12));
    }

    TEST_CASE("large grids use sampled sources") {
        const auto g = GridSpec::torus(1, 80);
        const double d = fiber_diameter(HermitianField::identity(g));
        CHECK(std::abs(d - std::sqrt(2.0) / 2) <= 0.05 * std::sqrt(2.0) / 2);
    }

    TEST_CASE("non-positive metric is an error") {
        const auto g = GridSpec::torus(1, 8);
        auto w = HermitianField::identity(g);
        w.component(0, 0)[0] = 0.0;
        CHECK_THROWS_AS(fiber_diameter(w), GeometryError);
    }
}
