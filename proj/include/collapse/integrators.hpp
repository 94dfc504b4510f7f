#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

#include "collapse/grid.hpp"

namespace collapse {

/// dt fell below the configured floor.
class StiffnessBreakdown : public std::runtime_error {
public:
    explicit StiffnessBreakdown(double t, double dt)
        : std::runtime_error("stiffness breakdown at t = " + std::to_string(t) + " (dt = " + std::to_string(dt) + ")"),
          t_(t) {}
    double time() const { return t_; }

private:
    double t_;
};

/// u' = L(t) u + N(t, u) where L is diagonal in some basis. `propagate(v, ta, tb)`
/// applies exp(int_ta^tb L); identity when there is no linear part.
struct LawsonProblem {
    std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& u)> nonlinear;
    std::function<Eigen::VectorXd(const Eigen::VectorXd& v, double ta, double tb)> propagate;
    /// Optional acceptance test on a candidate step (e.g. positivity margins).
    std::function<bool(double t, const Eigen::VectorXd& before, const Eigen::VectorXd& after)> guard;
};

struct AdaptiveConfig {
    double dt0 = 1e-2;
    double dt_min = 1e-12;
    double dt_max = 0.25;
    double tol = 1e-8;  // absolute sup-norm local error per step
};

struct StepStats {
    long accepted = 0;
    long rejected = 0;
    double dt = 0;
};

/// One integrating-factor RK4 step of size h.
Eigen::VectorXd lawson_rk4_step(const LawsonProblem& prob, double t, const Eigen::VectorXd& u, double h);

/// Step-doubling adaptive driver with Richardson extrapolation. A step is
/// rejected (and dt halved) when the local error estimate exceeds tol, the
/// guard refuses, or a stage throws std::domain_error / GeometryError.
class AdaptiveLawson {
public:
    using Observer = std::function<void(double t, const Eigen::VectorXd& u, double dt)>;

    AdaptiveLawson(LawsonProblem prob, AdaptiveConfig cfg);

    /// Advances (t, u) to exactly t_end; calls `observer` after every accepted step.
    void advance(double& t, Eigen::VectorXd& u, double t_end, const Observer& observer = {});

    const StepStats& stats() const { return stats_; }

private:
    LawsonProblem prob_;
    AdaptiveConfig cfg_;
    StepStats stats_;
    double dt_;
};

/// exp(E_p(ta, tb)) applied mode by mode in the Fourier basis of `grid`,
/// E_p given the flat index p of the wavevector.
std::function<Eigen::VectorXd(const Eigen::VectorXd&, double, double)> spectral_propagator(
    const GridSpec& grid, std::function<double(std::size_t p, double ta, double tb)> exponent);

}  // namespace collapse
