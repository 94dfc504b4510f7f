#include "collapse/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace collapse {

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string(name) + " must be positive and finite, got " + std::to_string(v));
}

double imag_tau_checked(Complex z, const SemiFlatSpec& spec) {
    const double h = spec.tau(z).imag();
    if (!(h > 0.0))
        throw std::domain_error("semi-flat: Im tau(z) <= 0 at z = (" + std::to_string(z.real()) + ", " +
                                std::to_string(z.imag()) + ")");
    return h;
}

}  // namespace

void ProductModelSpec::validate() const {
    require_positive(a0, "a0");
    require_positive(b0, "b0");
    if (base_dim < 1 || fiber_dim < 1) throw std::invalid_argument("product model: dimensions must be >= 1");
}

void FiberFlowSpec::validate() const {
    require_positive(a0, "a0");
    require_positive(b0, "b0");
    require_positive(horizon, "horizon");
    fiber.validate();
    if (fiber.complex_dim != 1) throw std::invalid_argument("fiber flow: fiber must have complex dimension 1");
    if (!phi0.grid().same_shape(fiber)) throw std::invalid_argument("fiber flow: phi0 is not on the fiber grid");
    if (!phi0.all_finite()) throw std::invalid_argument("fiber flow: phi0 has non-finite values");
    if (std::abs(phi0.mean()) > 1e-12 * std::max(1.0, phi0.sup_norm()))
        throw std::invalid_argument("fiber flow: phi0 must be mean-free");
    const auto w = ddbar(phi0);
    for (std::size_t p = 0; p < fiber.size(); ++p)
        if (!(b0 + w.component(0, 0)[p].real() > 0.0))
            throw GeometryError("fiber flow: initial fiber metric b0 + phi0_xixibar is not positive", p);
}

HermitianField GkeTestbedSpec::omega_sigma() const {
    return flat_scale * HermitianField::identity(base) + ddbar(eta);
}

void GkeTestbedSpec::validate() const {
    base.validate();
    require_positive(flat_scale, "flat_scale");
    if (!eta.grid().same_shape(base) || !F.grid().same_shape(base))
        throw std::invalid_argument("gke testbed: eta and F must live on the base grid");
    omega_sigma().require_positive("gke testbed omega_Sigma");
    for (std::size_t p = 0; p < F.size(); ++p)
        if (!(F[p] > 0.0)) throw GeometryError("gke testbed: F must be strictly positive", p);
    if (manufactured && !manufactured->grid().same_shape(base))
        throw std::invalid_argument("gke testbed: manufactured solution is not on the base grid");
}

GridSpec SemiFlatSpec::patch_grid() const {
    GridSpec g;
    g.complex_dim = 1;
    g.resolution = {patch_points};
    g.periods = {2 * half_width, 2 * half_width};
    g.origin = {-half_width, -half_width};
    g.validate();
    return g;
}

GridSpec SemiFlatSpec::product_grid() const {
    GridSpec g;
    g.complex_dim = 2;
    g.resolution = {patch_points, fiber_points};
    g.periods = {2 * half_width, 2 * half_width, 1.0, 1.0};
    g.origin = {-half_width, -half_width, 0.0, 0.0};
    g.validate();
    return g;
}

Complex SemiFlatSpec::base_point(const GridSpec& g, std::size_t p) const {
    return {g.coord(p, 0), g.coord(p, 1)};
}

Complex SemiFlatSpec::fiber_point(const GridSpec& g, std::size_t p) const {
    return g.coord(p, 2) + tau(base_point(g, p)) * g.coord(p, 3);
}

void SemiFlatSpec::validate() const {
    require_positive(half_width, "half_width");
    const auto g = patch_grid();
    for (double x : {-half_width, half_width})
        for (double y : {-half_width, half_width}) imag_tau_checked({x, y}, *this);
    for (std::size_t p = 0; p < g.size(); ++p) imag_tau_checked(base_point(g, p), *this);
    if (fiber_points < 8 || fiber_points % 2) throw std::invalid_argument("semi-flat: fiber_points must be even and >= 8");
}

ProductCoefficients reference_metric(double t, const ProductModelSpec& spec) {
    const double e = std::exp(-t);
    return {1.0 + (spec.a0 - 1.0) * e, spec.b0 * e};
}

ProductCoefficients reference_metric(double t, const FiberFlowSpec& spec) {
    const double e = std::exp(-t);
    return {1.0 + (spec.a0 - 1.0) * e, spec.b0 * e};
}

HermitianField reference_metric(double t, const SemiFlatSpec& spec, double g_sigma) {
    auto sf = semiflat_form(spec);
    sf *= std::exp(-t);
    const auto g = spec.product_grid();
    Eigen::MatrixXcd base = Eigen::MatrixXcd::Zero(2, 2);
    base(0, 0) = g_sigma;
    return HermitianField::constant(g, base) + sf;
}

ProductCoefficients product_closed_form(double t, const ProductModelSpec& spec) {
    return reference_metric(t, spec);
}

ProductCoefficients product_flow_rhs(const ProductCoefficients& ab) {
    return {1.0 - ab.base, -ab.fiber};
}

MetricJet<double> hyperbolic_jet(double a, double y) {
    MetricJet<double> jet;
    jet.g = Eigen::MatrixXcd::Constant(1, 1, a / (2 * y * y));
    jet.d = {Eigen::MatrixXcd::Constant(1, 1, a * Complex(0, 1) / (2 * y * y * y))};
    jet.dd = {{Eigen::MatrixXcd::Constant(1, 1, a * 3.0 / (4 * y * y * y * y))}};
    return jet;
}

double hyperbolic_curvature_norm(double a, int base_dim) {
    return std::sqrt(static_cast<double>(base_dim)) / a;
}

double semiflat_potential(Complex z, Complex xi, const SemiFlatSpec& spec) {
    const double h = imag_tau_checked(z, spec);
    return xi.imag() * xi.imag() / h;
}

Matrix2c semiflat_form_at(Complex z, Complex xi, const SemiFlatSpec& spec) {
    const double h = imag_tau_checked(z, spec);
    const double v = xi.imag();
    const Complex tp = spec.tau_prime(z);
    Matrix2c m;
    m(0, 0) = v * v * std::norm(tp) / (2 * h * h * h);
    m(0, 1) = -v * tp / (2 * h * h);
    m(1, 0) = std::conj(m(0, 1));
    m(1, 1) = 1.0 / (2 * h);
    return m;
}

HermitianField semiflat_form(const SemiFlatSpec& spec) {
    const auto g = spec.product_grid();
    HermitianField out(g);
    for (std::size_t p = 0; p < g.size(); ++p)
        out.set(p, semiflat_form_at(spec.base_point(g, p), spec.fiber_point(g, p), spec));
    return out;
}

double rescaling_check(double t, const SemiFlatSpec& spec, const FormAt& form) {
    const FormAt f = form ? form : FormAt([&](Complex z, Complex xi) { return semiflat_form_at(z, xi, spec); });
    const auto g = spec.product_grid();
    const double lam = std::exp(t / 2);
    const double shrink = std::exp(-t);
    double diff = 0, scale = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const Complex z = spec.base_point(g, p), xi = spec.fiber_point(g, p);
        const Matrix2c w = f(z, xi);
        Matrix2c pulled = f(z, lam * xi);
        pulled(0, 1) *= lam;
        pulled(1, 0) *= lam;
        pulled(1, 1) *= lam * lam;
        diff = std::max(diff, (shrink * pulled - w).cwiseAbs().maxCoeff());
        scale = std::max(scale, w.cwiseAbs().maxCoeff());
    }
    return scale > 0 ? diff / scale : diff;
}

double weil_petersson_at(Complex z, const SemiFlatSpec& spec) {
    const double h = imag_tau_checked(z, spec);
    return std::norm(spec.tau_prime(z)) / (4 * h * h);
}

HermitianField weil_petersson(const SemiFlatSpec& spec) {
    const auto g = spec.patch_grid();
    HermitianField out(g);
    for (std::size_t p = 0; p < g.size(); ++p) out.component(0, 0)[p] = weil_petersson_at(spec.base_point(g, p), spec);
    return out;
}

ScalarField density_F(const SemiFlatSpec& spec, const std::function<double(Complex)>& g_sigma,
                      const ScalarField& omega_density) {
    const auto g = spec.product_grid();
    if (!omega_density.grid().same_shape(g)) throw std::invalid_argument("density_F: Omega is not on the product grid");
    const auto sf = semiflat_form(spec);
    ScalarField out(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
        const double denom = g_sigma(spec.base_point(g, p)) * sf.component(1, 1)[p].real();
        if (!(denom > 0.0)) throw GeometryError("density_F: non-positive denominator", p);
        out[p] = omega_density[p] / denom;
    }
    return out;
}

double fiber_spread(const ScalarField& f) {
    const auto& g = f.grid();
    if (g.complex_dim != 2) throw std::invalid_argument("fiber_spread: expected a (base, fiber) product grid");
    const std::size_t per_fiber = static_cast<std::size_t>(g.points_along(2)) * g.points_along(3);
    const std::size_t fibers = g.size() / per_fiber;
    double worst = 0;
    for (std::size_t b = 0; b < fibers; ++b) {
        const auto seg = f.values().segment(static_cast<Eigen::Index>(b * per_fiber), static_cast<Eigen::Index>(per_fiber));
        const double mean = seg.mean();
        const double sd = std::sqrt((seg.array() - mean).square().mean());
        worst = std::max(worst, sd / std::abs(mean));
    }
    return worst;
}

ScalarField fiberwise_cy_potential(const ScalarField& eta) {
    const auto w = ddbar(eta);
    const Eigen::VectorXd weight = 1.0 + w.component(0, 0).real().array();
    const double c = eta.values().dot(weight) / weight.sum();
    ScalarField psi = -1.0 * eta;
    psi.values().array() += c;
    return psi;
}

GkeTestbedSpec manufactured_testbed(const ScalarField& eta, const ScalarField& u_star, double flat_scale) {
    GkeTestbedSpec spec;
    spec.base = eta.grid();
    spec.flat_scale = flat_scale;
    spec.eta = eta;
    const auto sigma = spec.omega_sigma();
    const auto num = ma_density(sigma + ddbar(u_star));
    const auto den = ma_density(sigma);
    spec.F = ScalarField(spec.base);
    for (std::size_t p = 0; p < spec.base.size(); ++p) {
        if (!(num[p] > 0.0)) throw GeometryError("manufactured_testbed: omega_Sigma + ddbar u* is not positive", p);
        spec.F[p] = num[p] / den[p] * std::exp(-u_star[p]);
    }
    spec.manufactured = u_star;
    return spec;
}

double window(double x, double inner, double outer) {
    const double r = std::abs(x);
    if (r <= inner) return 1.0;
    if (r >= outer) return 0.0;
    constexpr double c = 4.0;
    const double s = (r - inner) / (outer - inner);
    const double step = 0.5 * (1.0 + std::erf(c * (s - 0.5) / std::sqrt(s * (1.0 - s))));
    return 1.0 - step;
}

WeilPeterssonTestbed weil_petersson_testbed(const SemiFlatSpec& spec, int n, const ScalarField* eta,
                                            double inner_half_width) {
    SemiFlatSpec cell = spec;
    cell.half_width = 0.5;
    cell.patch_points = n;
    cell.validate();
    const auto g = cell.patch_grid();

    WeilPeterssonTestbed tb;
    tb.gke.base = g;
    tb.gke.eta = eta ? *eta : ScalarField(g);
    if (!tb.gke.eta.grid().same_shape(g)) throw std::invalid_argument("weil_petersson_testbed: eta has wrong grid");
    const auto sigma = tb.gke.omega_sigma();
    tb.gke.F = ScalarField(g);
    tb.omega_wp = HermitianField(g);
    const double outer = 0.5;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const Complex z = cell.base_point(g, p);
        const double w = window(z.real(), inner_half_width, outer) * window(z.imag(), inner_half_width, outer);
        // Only q = log Im tau + |z|^2 is non-periodic; the eta terms already are.
        const double q = w > 0 ? std::log(cell.tau(z).imag()) + std::norm(z) : 0.0;
        const double gs = sigma.component(0, 0)[p].real();
        tb.gke.F[p] = 2.0 * std::exp(w * q + tb.gke.eta[p]) / gs;
        tb.omega_wp.component(0, 0)[p] = weil_petersson_at(z, cell);
        if (std::abs(z.real()) <= inner_half_width + 1e-12 && std::abs(z.imag()) <= inner_half_width + 1e-12)
            tb.inner.push_back(p);
    }
    tb.gke.validate();
    return tb;
}

}  // namespace collapse
