#pragma once

#include <functional>
#include <span>
#include <vector>

namespace enapp::optim {

/// Objective over a box. Returns +inf at points that cannot be evaluated
/// (e.g. power flow diverged), which the line search treats as rejected.
using Objective = std::function<double(std::span<const double>)>;

struct BoxOptions {
    double grad_tol = 1e-7;   // on the projected-gradient infinity norm
    int max_iter = 200;
    double fd_step = 1e-6;    // central finite differences
    double armijo = 1e-4;
    int max_backtracks = 40;
};

struct BoxResult {
    std::vector<double> x;
    double value = 0.0;
    double pg_norm = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Projected quasi-Newton (BFGS restricted to the free variables) with Armijo
/// backtracking along the projection arc. Deterministic for identical inputs.
BoxResult minimize_box(const Objective& f, std::span<const double> lo, std::span<const double> hi,
                       std::vector<double> x0, const BoxOptions& opts = {});

/// Central-difference gradient that falls back to one-sided differences at the
/// box faces or where the objective is infinite.
std::vector<double> fd_gradient(const Objective& f, std::span<const double> x, double fx,
                                std::span<const double> lo, std::span<const double> hi, double h,
                                int* evaluations = nullptr);

/// Infinity norm of P(x - g) - x.
double projected_gradient_norm(std::span<const double> x, std::span<const double> g,
                               std::span<const double> lo, std::span<const double> hi);

/// Problem with smooth inequality constraints s_i(x) >= 0 handled by a log barrier.
struct ConstrainedProblem {
    std::vector<double> lo, hi;
    /// Fills `slacks`; returns the objective, or +inf when x cannot be evaluated.
    std::function<double(std::span<const double> x, std::vector<double>& slacks)> evaluate;
};

struct BarrierOptions {
    double mu0 = 1e-2;
    double mu_factor = 0.1;
    int stages = 4;
    double restoration_margin = 1e-4;
    bool polish = true;  // final stage at mu = 0 with a feasibility-preserving line search
    BoxOptions box{};
};

enum class BarrierStatus { Optimal, MaxIter, Infeasible };

struct BarrierResult {
    std::vector<double> x;
    double objective = 0.0;
    double kkt_residual = 0.0;
    double min_slack = 0.0;
    int iterations = 0;
    int evaluations = 0;
    BarrierStatus status = BarrierStatus::Optimal;
};

/// Feasibility restoration (if x0 violates a constraint), then barrier stages
/// mu0, mu0*factor, ..., then an optional unbarriered polish.
BarrierResult solve_barrier(const ConstrainedProblem& problem, std::vector<double> x0,
                            const BarrierOptions& opts = {});

}  // namespace enapp::optim
