#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "collapse/fields.hpp"
#include "collapse/integrators.hpp"

namespace collapse {

/// Newton iteration gave up; carries the sup-residual history so far.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), history_(std::move(history)) {}
    const std::vector<double>& history() const { return history_; }

private:
    std::vector<double> history_;
};

struct GkeConfig {
    double tol = 1e-10;          // sup-norm residual
    int max_iterations = 50;
    double krylov_rtol = 1e-3;   // inner relative tolerance cap
    bool adaptive_forcing = true;  // inner tolerance min(krylov_rtol, |r_k|)
    int max_krylov = 500;
    int max_halvings = 30;
};

struct GkeSolution {
    ScalarField u;
    std::vector<double> residual_history;
    std::vector<int> krylov_iterations;
    int iterations = 0;
    double positivity_margin = 0;  // smallest eigenvalue of omega_Sigma + i ddbar u
};

/// log det(omega_Sigma + i ddbar u) - log det omega_Sigma - log F - u.
/// Throws GeometryError where omega_Sigma + i ddbar u is not positive.
ScalarField gke_residual(const ScalarField& u, const HermitianField& omega_sigma, const ScalarField& F);

/// Damped inexact Newton with the linearization Delta_{omega_u} - 1 applied
/// spectrally and solved by preconditioned BiCGSTAB.
GkeSolution solve_gke(const HermitianField& omega_sigma, const ScalarField& F, const GkeConfig& cfg = {},
                      const std::optional<ScalarField>& u0 = std::nullopt);

enum class ForcingMode { Static, Transient };

struct ParabolicConfig {
    double horizon = 10.0;
    ForcingMode mode = ForcingMode::Static;
    std::optional<HermitianField> rho;  // transient perturbation, required in that mode
    AdaptiveConfig step{1e-2, 1e-12, 0.25, 1e-10};
};

struct ParabolicSample {
    double t = 0;
    double A = 0;         // max(u_t - u_inf)
    double A_min = 0;     // min(u_t - u_inf)
    double deviation = 0; // sup |u_t - u_inf|
    double spatial_at_max = 0;
};

struct ParabolicResult {
    std::vector<ParabolicSample> samples;  // t = 0 and every accepted step
    ScalarField u;
    double C = 0;             // smallest C with dA/dt <= C e^{-t} - A at every step
    double C_first_half = 0;  // same, restricted to t <= horizon / 2
    double max_spatial_at_max = 0;
    StepStats stats;
};

/// Integrates du/dt = log det(omega_Sigma' + i ddbar u) - log det omega_Sigma - log F - u
/// with omega_Sigma' = omega_Sigma (static) or omega_Sigma + e^{-t} rho (transient).
/// Positivity loss raises SolverError naming the offending time.
ParabolicResult parabolic_gke(const HermitianField& omega_sigma, const ScalarField& F, const ScalarField& u0,
                              const ScalarField& u_inf, const ParabolicConfig& cfg);

}  // namespace collapse
