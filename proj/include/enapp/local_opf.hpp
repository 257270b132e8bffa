#pragma once

#include <optional>
#include <string>
#include <vector>

#include "enapp/distflow.hpp"
#include "enapp/feeder.hpp"
#include "enapp/optimizer.hpp"

namespace enapp {

/// Reactive limits of an inverter from its rating circle.
struct QBounds {
    double lo = 0.0;
    double hi = 0.0;
};

/// Throws ValidationError when p_d exceeds the rating (or is negative).
QBounds der_q_bounds(const Der& d);

enum class OpfStatus { Optimal, MaxIter, Infeasible };

std::string to_string(OpfStatus s);

struct OpfSolution {
    PowerFlowSolution flow;
    std::vector<double> q_d;
    double objective = 0.0;     // losses, per-unit
    double kkt_residual = 0.0;  // projected-gradient infinity norm
    OpfStatus status = OpfStatus::Optimal;
    int iterations = 0;
    std::vector<LimitViolation> violations;  // non-empty only when infeasible
};

struct OpfOptions {
    double pf_tol = 1e-13;      // inner power flow, tight enough for finite differences
    int pf_max_iter = kPowerFlowMaxIter;
    double kkt_tol = 1e-7;
    double constraint_tol = 1e-6;
    double mu0 = 1e-2;
    double mu_factor = 0.1;
    int barrier_stages = 4;
    double fd_step = 1e-6;
    int max_iter = 200;         // per barrier stage
    std::optional<std::vector<double>> q_init;  // warm start, clipped to the box
};

optim::BarrierOptions barrier_options(const OpfOptions& opts);

/// Minimizes area losses over the DER reactive dispatch with the boundary held fixed.
///
/// Reduced space: every trial dispatch is evaluated by a full power flow, so
/// the branch-flow equalities hold by construction. Voltage and thermal limits
/// enter through a log barrier; the DER box through projection.
OpfSolution solve_area_opf(const Feeder& area, const OpfOptions& opts = {});

/// Inequality slacks used by the OPF: v - v_min and v_max - v at every non-root
/// bus, then l_max - l on every line with a finite rating.
void opf_slacks(const PowerFlowSolution& s, const Feeder& f, const RadialIndex& index,
                std::vector<double>& slacks);

}  // namespace enapp
