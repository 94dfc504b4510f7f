#pragma once

#include <array>
#include <complex>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "collapse/fields.hpp"
#include "collapse/kahler.hpp"

namespace collapse {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;

/// Hyperbolic base (p copies of a curve with Ric = -omega) times a flat torus
/// of complex dimension r, with initial scales a0 and b0.
struct ProductModelSpec {
    double a0 = 1.0;
    double b0 = 1.0;
    int base_dim = 1;
    int fiber_dim = 1;
    void validate() const;
};

/// n = 2, r = 1: hyperbolic curve times a flat unit torus fiber carrying a
/// fiber-dependent potential.
struct FiberFlowSpec {
    double a0 = 1.0;
    double b0 = 1.0;
    GridSpec fiber = GridSpec::torus(1, 32);
    ScalarField phi0 = ScalarField(GridSpec::torus(1, 32));
    double horizon = 10.0;
    void validate() const;
};

/// Base form omega_Sigma = flat_scale * flat + ddbar(eta) and density F on a
/// periodic base.
struct GkeTestbedSpec {
    GridSpec base = GridSpec::torus(1, 32);
    double flat_scale = 1.0;
    ScalarField eta = ScalarField(GridSpec::torus(1, 32));
    ScalarField F = ScalarField::constant(GridSpec::torus(1, 32), 1.0);
    std::optional<ScalarField> manufactured;  // exact solution when F was built from it
    HermitianField omega_sigma() const;
    void validate() const;
};

/// Elliptic fibration over a patch |Re z|, |Im z| < half_width with lattice
/// Z + tau(z) Z and tau(z) = c0 + c1 z + c2 z^2. Fiber points are
/// xi = s + tau(z) t with (s, t) in the unit square.
struct SemiFlatSpec {
    std::array<Complex, 3> tau_coeffs{Complex(0, 1), Complex(0.2, 0), Complex(0, 0)};
    double half_width = 0.5;
    int patch_points = 16;
    int fiber_points = 8;

    Complex tau(Complex z) const { return tau_coeffs[0] + z * (tau_coeffs[1] + z * tau_coeffs[2]); }
    Complex tau_prime(Complex z) const { return tau_coeffs[1] + 2.0 * z * tau_coeffs[2]; }
    GridSpec patch_grid() const;
    /// C^2 grid over (z; s, t).
    GridSpec product_grid() const;
    Complex base_point(const GridSpec& g, std::size_t p) const;
    Complex fiber_point(const GridSpec& g, std::size_t p) const;
    void validate() const;
};

using ModelSpec = std::variant<ProductModelSpec, FiberFlowSpec, GkeTestbedSpec, SemiFlatSpec>;

/// Coefficients of a homogeneous Kahler form a * omega_B + b * omega_F.
struct ProductCoefficients {
    double base = 0;
    double fiber = 0;
};

/// Reference family omega_inf + e^{-t}(omega_0 - omega_inf) in the homogeneous
/// directions: (1 + (a0 - 1) e^{-t}, b0 e^{-t}).
ProductCoefficients reference_metric(double t, const ProductModelSpec& spec);
ProductCoefficients reference_metric(double t, const FiberFlowSpec& spec);

/// omega_hat_t for the semi-flat patch with omega_inf = g_sigma |dz|^2 and
/// omega_0 = omega_inf + omega_SF, on the product grid.
HermitianField reference_metric(double t, const SemiFlatSpec& spec, double g_sigma);

/// Exact solution of a' = 1 - a, b' = -b.
ProductCoefficients product_closed_form(double t, const ProductModelSpec& spec);

/// Right side of the homogeneous flow: (1 - a, -b).
ProductCoefficients product_flow_rhs(const ProductCoefficients& ab);

/// 2-jet of a * g_B with g_B = 1/(2 y^2) on the upper half plane.
MetricJet<double> hyperbolic_jet(double a, double y);

/// ||Rm|| of a * omega_B for the p-fold product base.
double hyperbolic_curvature_norm(double a, int base_dim = 1);

/// psi = (Im xi)^2 / Im tau(z).
double semiflat_potential(Complex z, Complex xi, const SemiFlatSpec& spec);

/// Components of i ddbar psi in (z, xi) at one point.
Matrix2c semiflat_form_at(Complex z, Complex xi, const SemiFlatSpec& spec);

/// semiflat_form_at sampled on the product grid.
HermitianField semiflat_form(const SemiFlatSpec& spec);

using FormAt = std::function<Matrix2c(Complex z, Complex xi)>;

/// sup |e^{-t} lambda_t^* omega - omega| / sup |omega| over the product grid,
/// with lambda_t(z, xi) = (z, e^{t/2} xi). omega defaults to omega_SF.
double rescaling_check(double t, const SemiFlatSpec& spec, const FormAt& form = {});

/// |tau'|^2 / (4 (Im tau)^2).
double weil_petersson_at(Complex z, const SemiFlatSpec& spec);

/// omega_WP = i ddbar(-log Im tau) on the patch grid.
HermitianField weil_petersson(const SemiFlatSpec& spec);

/// F = Omega / (det(g_Sigma) * (omega_SF)_{xi xibar}) on the product grid.
/// g_sigma gives the base form coefficient at z.
ScalarField density_F(const SemiFlatSpec& spec, const std::function<double(Complex)>& g_sigma,
                      const ScalarField& omega_density);

/// Largest per-fiber std/mean of a field on the product grid.
double fiber_spread(const ScalarField& f);

/// Psi = -eta + c with c making the omega_0-weighted fiber mean vanish,
/// where the fiber part of omega_0 is flat + ddbar(eta).
ScalarField fiberwise_cy_potential(const ScalarField& eta);

/// F = det(omega_Sigma + ddbar u*) / det(omega_Sigma) * e^{-u*}.
GkeTestbedSpec manufactured_testbed(const ScalarField& eta, const ScalarField& u_star, double flat_scale = 1.0);

/// Smooth cutoff equal to 1 on |x| <= inner, 0 on |x| >= outer, C^infinity,
/// with all derivatives vanishing at both ends.
double window(double x, double inner, double outer);

/// Periodic unit cell (centered at z = 0) whose GKE solution reproduces the
/// Weil-Petersson identity of the analytic fibration on the inner square.
struct WeilPeterssonTestbed {
    GkeTestbedSpec gke;
    HermitianField omega_wp;           // analytic, on the whole cell
    std::vector<std::size_t> inner;    // points with |x|, |y| <= inner_half_width
};

WeilPeterssonTestbed weil_petersson_testbed(const SemiFlatSpec& spec, int n, const ScalarField* eta = nullptr,
                                            double inner_half_width = 0.1);

}  // namespace collapse
