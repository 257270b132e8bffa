#pragma once

#include <string>
#include <vector>

#include "enapp/distflow.hpp"
#include "enapp/feeder.hpp"
#include "enapp/local_opf.hpp"

namespace enapp {

/// Whole-feeder loss minimization; the same reduced-space machinery as the
/// area subproblem applied to the undecomposed network.
OpfSolution solve_copf(const Feeder& f, const OpfOptions& opts = {});

inline constexpr double kExactnessThreshold = 1e-3;

/// Per-line gap of the relaxed cone constraint, e = v_i * l_ij - (P_ij^2 + Q_ij^2).
struct ExactnessReport {
    std::vector<double> residual;
    double max_abs = 0.0;

    bool exact(double threshold = kExactnessThreshold) const { return max_abs <= threshold; }
};

/// Works on any branch-flow state, including externally supplied relaxed solutions.
ExactnessReport exactness_residuals(const PowerFlowSolution& s, const Feeder& f);
inline ExactnessReport exactness_residuals(const OpfSolution& s, const Feeder& f) {
    return exactness_residuals(s.flow, f);
}

std::string exactness_csv(const ExactnessReport& r, const Feeder& f);

/// Stable 64-bit FNV-1a hash of the canonical feeder JSON.
std::string feeder_hash(const Feeder& f);

/// C-OPF with a golden-file cache in `cache_dir` keyed by feeder_hash. A hit
/// reloads the stored dispatch and recomputes the power flow from it.
OpfSolution solve_copf_cached(const Feeder& f, const std::string& cache_dir, const OpfOptions& opts = {});

}  // namespace enapp
