#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "collapse/integrators.hpp"
#include "collapse/models.hpp"

namespace collapse {

/// Per-time snapshot of the flow monitors. NaN marks a monitor that was not
/// evaluated (the diameter is only computed on request).
struct Diagnostics {
    double t = 0;
    double sup_phi = 0;
    double sup_phi_dot = 0;
    double volume_min = 0;  // omega_t^n / (e^{-rt} Omega)
    double volume_max = 0;
    double trace_sup = 0;   // Tr_{omega_t} omega_inf
    double ratio_min = 0;   // eigenvalues of omega_t relative to omega_hat_t
    double ratio_max = 0;
    double sup_v = 0;       // e^t |phi - Phi|
    double q_max = 0;       // log(e^{-t} Tr_{omega_t} omega_0) - A e^t (phi - Phi)
    double kahler_margin = 0;
    double fiber_limit = 0;
    double mode_amplitude = 0;
    double curvature = 0;   // sup ||Rm||
    double diameter = std::numeric_limits<double>::quiet_NaN();
};

/// Homogeneous flow on the product model: the potential ODE
/// phi' = p log a_hat - phi together with the metric ODE a' = 1 - a, b' = -b.
class ProductFlow {
public:
    struct State {
        double t = 0;
        double phi = 0;
        double a = 1;
        double b = 1;
    };

    explicit ProductFlow(ProductModelSpec spec);

    const ProductModelSpec& spec() const { return spec_; }
    State initial_state() const;
    double map_rhs(double t, double phi) const;
    /// Adaptive RK4 to t_end; observer runs after each accepted step.
    void advance(State& s, double t_end, const AdaptiveConfig& cfg,
                 const std::function<void(const State&)>& observer = {}) const;
    Diagnostics monitors(const State& s, bool with_diameter = false) const;

private:
    ProductModelSpec spec_;
};

/// Reduced flow of a hyperbolic curve times a flat torus fiber:
///   phi' = log a_hat + log((b0 + e^t phi_{xi xibar}) / b0) - phi.
/// Integrated with an integrating factor for the linear part
/// (e^t / b0) Laplacian/4 - 1, which carries all of the stiffness.
class FiberFlow {
public:
    struct State {
        double t = 0;
        ScalarField phi;
    };

    explicit FiberFlow(FiberFlowSpec spec);

    const FiberFlowSpec& spec() const { return spec_; }
    State initial_state() const;

    /// b0 + e^t phi_{xi xibar}.
    ScalarField kahler_coefficient(const State& s) const;
    ScalarField map_rhs(const State& s) const;
    /// One integrating-factor RK4 step.
    State step(const State& s, double dt) const;
    /// Adaptive stepping to t_end. Steps that would drop the Kahler margin below
    /// 10% of its current value are halved.
    void advance(State& s, double t_end, const AdaptiveConfig& cfg,
                 const std::function<void(const State&)>& observer = {}) const;
    Diagnostics monitors(const State& s, bool with_diameter = false, double q_constant = 1.0) const;

private:
    LawsonProblem problem() const;

    FiberFlowSpec spec_;
};

/// Uniform grid mean of a fiber field.
double fiber_average(const ScalarField& phi);

/// e^t (phi - fiber_average(phi)).
ScalarField normalized_potential(double t, const ScalarField& phi);

/// sup |e^t phi_{xi xibar}| / b0: distance of e^t omega_t on the fiber from the
/// flat fiber form.
double fiber_limit_check(const FiberFlow::State& s, const FiberFlowSpec& spec);

/// Largest Fourier amplitude among the lowest nonzero wavevectors (|k| = 1).
double lowest_mode_amplitude(const ScalarField& f);

enum class RateAbscissa { Time, ExpTime };

struct RateReport {
    std::string quantity;
    std::vector<double> t;
    std::vector<double> y;
    RateAbscissa mode = RateAbscissa::Time;
    double slope = 0;
    double intercept = 0;
    double residual = 0;  // max |log y - fit|
    double window_begin = 0;
    double window_end = 0;
};

/// Least-squares line through (x, log y) with x = t or e^t over samples with
/// t in [window_begin, window_end]. Defaults to the last half of the samples'
/// time span. Needs at least 8 samples in the window, all positive.
RateReport rate_fit(std::string quantity, const std::vector<double>& t, const std::vector<double>& y,
                    RateAbscissa mode = RateAbscissa::Time,
                    double window_begin = std::numeric_limits<double>::quiet_NaN(),
                    double window_end = std::numeric_limits<double>::quiet_NaN());

}  // namespace collapse
