#pragma once

#include "enapp/coordinator.hpp"

namespace enapp {

struct AdmmOptions {
    double rho = 1.0;
    double tol = 1e-3;  // on both primal and dual residual (max norm)
    int max_iter = 2000;
    bool residual_balancing = false;  // rho x2 / /2 when the residuals differ by 10x
    std::size_t workers = 0;          // 0: worker_count()
    OpfOptions opf;
};

/// Consensus state for one boundary: z, plus one copy and multiplier per side.
struct AdmmBoundary {
    std::vector<double> z;  // y1, y2_p, y2_q
    std::vector<double> upstream_copy, downstream_copy;
    std::vector<double> upstream_lambda, downstream_lambda;
};

struct AdmmState {
    std::vector<AdmmBoundary> boundaries;
    double rho = 1.0;
};

/// Consensus ADMM over boundary copies. The upstream area treats the boundary
/// load as a variable and reports the dummy voltage; the downstream area treats
/// its source voltage as a variable and reports the power it draws. Both copies
/// are pulled toward z through the augmented Lagrangian.
DopfResult run_admm(const Feeder& f, const AreaPartition& p, const AdmmOptions& opts = {},
                    AdmmState* final_state = nullptr);

}  // namespace enapp
