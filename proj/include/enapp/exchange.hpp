#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "enapp/local_opf.hpp"
#include "enapp/partition.hpp"
#include "enapp/transport.hpp"

namespace enapp {

/// Shared values per boundary: the y1 components followed by the y2 components.
using SharedValues = std::vector<std::vector<double>>;

struct IterationRecord {
    int k = 0;
    double epsilon = 0.0;     // max |residual| over every boundary component
    double objective = 0.0;   // sum of area objectives
    SharedValues values;      // shared values after this iteration's update
    SharedValues residual;
    std::map<AreaId, OpfStatus> status;
    double max_area_seconds = 0.0;  // slowest area this round
    double coordinator_seconds = 0.0;
    double primal_residual = 0.0;   // consensus methods only
    double dual_residual = 0.0;
};

struct ConvergenceTrace {
    std::vector<std::string> labels;  // component names, e.g. y1, y2_p, y2_q
    std::vector<IterationRecord> records;

    std::size_t size() const { return records.size(); }
};

/// Which scalars cross a boundary and how they are labeled.
struct ExchangeLayout {
    std::vector<AreaId> order;  // upstream areas before downstream ones
    std::vector<Boundary> boundaries;
    std::size_t y1_width = 1;
    std::size_t y2_width = 2;
    std::vector<std::string> labels;
};

/// What an area reports after its local solve.
struct AreaOutcome {
    double objective = 0.0;
    OpfStatus status = OpfStatus::Optimal;
    std::map<BoundaryId, std::vector<double>> voltage;  // psi1, one per downstream boundary
    std::optional<std::vector<double>> power;           // psi2 for the upstream boundary
    double seconds = 0.0;
};

using AreaSolve = std::function<AreaOutcome(const AreaId&, const SharedValues& inputs)>;

struct ExchangeOptions {
    double tol = 1e-3;
    int max_iter = 50;
    bool sequential = false;
    std::size_t workers = 1;
};

struct ExchangeResult {
    ConvergenceTrace trace;
    SharedValues last_inputs;  // values the final area solves were given
    SharedValues values;       // values after the final update
    int iterations = 0;
    bool converged = false;
    double parallel_seconds = 0.0;  // sum over rounds of the slowest area
    double coordinator_seconds = 0.0;
};

/// Synchronous fixed-point exchange of boundary values (the ENApp master loop).
///
/// Each round: solve every area with the current shared values (concurrently,
/// or upstream-first with immediate hand-off when `sequential`), route psi1
/// downstream and psi2 upstream through `transport`, form the residual as the
/// received values minus the values used as inputs, then adopt the received
/// values. Stops when the max-norm residual is at most `tol`.
ExchangeResult run_exchange(const ExchangeLayout& layout, SharedValues initial, const AreaSolve& solve,
                            const ExchangeOptions& opts, Transport& transport);

/// CSV with columns k, epsilon, objective, then per boundary every value
/// component followed by every residual component.
std::string trace_csv(const ConvergenceTrace& trace, std::size_t boundaries);

}  // namespace enapp
