#pragma once

#include <complex>
#include <map>
#include <string>
#include <vector>

#include "enapp/exchange.hpp"
#include "enapp/feeder.hpp"
#include "enapp/local_opf.hpp"
#include "enapp/partition.hpp"
#include "enapp/transport.hpp"

namespace enapp {

/// Upstream network equivalent: squared voltage at the dummy bus of `boundary`
/// in the upstream area's solution.
double psi1_update(const AreaFeeder& ua, const OpfSolution& ua_solution, const AreaPartition& p,
                   BoundaryId boundary);

/// Downstream network equivalent: complex power the downstream area draws at
/// its dummy (root) bus.
std::complex<double> psi2_update(const AreaFeeder& da, const OpfSolution& da_solution, const AreaPartition& p,
                                 BoundaryId boundary);

struct AssemblyReport {
    // Per boundary: |y1 used - whole-feeder v_sq| and |y2 used - whole-feeder flow into the area|.
    std::vector<double> y1_mismatch;
    std::vector<double> y2_mismatch;
    double max_mismatch = 0.0;
};

struct AssembledSolution {
    OpfSolution solution;
    AssemblyReport report;
};

struct AreaResult {
    AreaFeeder area;
    OpfSolution solution;
};

/// Collects the area dispatches into a whole-feeder dispatch, reruns the
/// whole-feeder power flow, and compares the boundary values the areas were
/// solved with against the resulting whole-feeder state.
AssembledSolution assemble_solution(const std::map<AreaId, AreaResult>& areas, const AreaPartition& p,
                                    const Feeder& f, const BoundaryTable& used, const OpfOptions& opts = {});

struct DopfResult {
    std::map<AreaId, AreaResult> areas;
    OpfSolution solution;  // whole feeder at the assembled dispatch
    AssemblyReport assembly;
    ConvergenceTrace trace;
    BoundaryTable boundaries;  // values after the final update
    int macro_iterations = 0;
    bool converged = false;
    double parallel_seconds = 0.0;
    double coordinator_seconds = 0.0;
};

struct EnappOptions {
    double tol = 1e-3;
    int max_iter = 50;
    bool sequential = false;
    std::size_t workers = 0;  // 0: worker_count()
    OpfOptions opf;
};

ExchangeLayout enapp_layout(const AreaPartition& p);
SharedValues to_shared(const BoundaryTable& t);
BoundaryTable to_table(const SharedValues& v);

/// Distributed OPF by equivalent-network exchange across area boundaries.
/// A null transport uses an internal QueueTransport.
DopfResult run_enapp(const Feeder& f, const AreaPartition& p, const EnappOptions& opts = {},
                     Transport* transport = nullptr);

/// Solves a single area against fixed boundary values.
AreaResult solve_area(const AreaPartition& p, const Feeder& f, const AreaId& area, const BoundaryTable& b,
                      const OpfOptions& opts = {});

}  // namespace enapp
