#pragma once

#include <array>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "enapp/exchange.hpp"
#include "enapp/feeder.hpp"
#include "enapp/local_opf.hpp"
#include "enapp/partition.hpp"

namespace enapp {

using PhaseArray = std::array<double, 3>;
using PhaseMatrix = std::array<PhaseArray, 3>;

/// Phase bitmask: a = 1, b = 2, c = 4.
using PhaseSet = unsigned;
inline constexpr PhaseSet kPhaseA = 1, kPhaseB = 2, kPhaseC = 4, kPhaseABC = 7;
inline bool has_phase(PhaseSet s, int p) { return (s >> p) & 1U; }
std::string phase_string(PhaseSet s);

struct UnbalancedBus {
    BusId id = 0;
    PhaseSet phases = kPhaseABC;
    PhaseArray load_p{}, load_q{};
    PhaseArray cap_q{};  // fixed shunt capacitor injection
    double v_min_sq = 0.81;
    double v_max_sq = 1.1025;
};

/// Phases follow the receiving bus; entries for absent phases are ignored.
struct UnbalancedLine {
    BusId from = 0;
    BusId to = 0;
    PhaseMatrix r{};
    PhaseMatrix x{};
    double i_rated_sq = std::numeric_limits<double>::infinity();
};

struct UnbalancedDer {
    BusId bus = 0;
    int phase = 0;  // 0, 1, 2 for a, b, c
    double p_d = 0.0;
    double s_rating = 0.0;
};

struct UnbalancedFeeder {
    std::vector<UnbalancedBus> buses;
    std::vector<UnbalancedLine> lines;
    std::vector<UnbalancedDer> ders;
    BusId root = 0;
    PhaseArray v_root_sq{1.0, 1.0, 1.0};
    double base_mva = 1.0;
    double base_kv = 4.16;

    const UnbalancedBus& bus(BusId id) const;
    /// Topology-only single-phase view used for indexing and partitioning.
    Feeder skeleton() const;
};

/// Throws ValidationError for inconsistent phase sets, bad impedances, or DERs on absent phases.
void validate_unbalanced(const UnbalancedFeeder& f);

UnbalancedFeeder load_unbalanced_feeder(std::istream& in);
UnbalancedFeeder load_unbalanced_feeder_file(const std::string& path);
std::string unbalanced_feeder_to_json(const UnbalancedFeeder& f);

/// Per-phase view of a balanced single-phase feeder (diagonal impedance, equal phases).
UnbalancedFeeder balanced_from_single_phase(const Feeder& f);

struct UnbalancedSolution {
    std::vector<PhaseArray> v_sq;  // per bus
    std::vector<PhaseArray> p_flow, q_flow, l_sq;  // per line, sending end, phase pp
    std::vector<double> q_d;
    PhaseArray source_p{}, source_q{};
    double objective = 0.0;  // sum of r^pp l^pp
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
    double kkt_residual = 0.0;
    OpfStatus status = OpfStatus::Optimal;
};

/// Per-phase backward/forward sweep with mutual-impedance coupling.
///
/// Voltage phasors sit at the nominal 0/-120/+120 degree offsets and so do the
/// current-angle differences, so cross-phase products use fixed angles; the
/// unknowns per line and phase are P, Q and l.
class UnbalancedModel {
public:
    explicit UnbalancedModel(const UnbalancedFeeder& f);
    UnbalancedSolution run(std::span<const double> q_d, double tol = kPowerFlowTol,
                           int max_iter = kPowerFlowMaxIter) const;
    const UnbalancedFeeder& feeder() const { return feeder_; }
    const RadialIndex& index() const { return index_; }

private:
    UnbalancedFeeder feeder_;
    RadialIndex index_;
};

/// Throws ConvergenceError on divergence.
UnbalancedSolution sweep_power_flow_3ph(const UnbalancedFeeder& f, std::span<const double> q_d,
                                        double tol = kPowerFlowTol, int max_iter = kPowerFlowMaxIter);

/// Largest residual of the per-phase balance, voltage and current equations.
double unbalanced_mismatch(const UnbalancedSolution& s, const UnbalancedFeeder& f, std::span<const double> q_d);

UnbalancedSolution solve_area_opf_3ph(const UnbalancedFeeder& area, const OpfOptions& opts = {});
inline UnbalancedSolution solve_copf_3ph(const UnbalancedFeeder& f, const OpfOptions& opts = {}) {
    return solve_area_opf_3ph(f, opts);
}

std::string unbalanced_solution_to_json(const UnbalancedSolution& s, const UnbalancedFeeder& f);

struct UnbalancedBoundaryState {
    PhaseArray y1{1.0, 1.0, 1.0};
    PhaseArray y2_p{}, y2_q{};
};
using UnbalancedBoundaryTable = std::map<BoundaryId, UnbalancedBoundaryState>;

struct UnbalancedAreaFeeder {
    AreaId area;
    UnbalancedFeeder feeder;
    std::vector<std::size_t> der_index;
    std::optional<BoundaryId> upstream;
    std::vector<BoundaryId> downstream;
};

/// Same construction as the single-phase build_area, per phase.
UnbalancedAreaFeeder build_area_3ph(const AreaPartition& p, const UnbalancedFeeder& f, const AreaId& area,
                                    const UnbalancedBoundaryTable& b);

UnbalancedBoundaryTable flat_start_3ph(const AreaPartition& p, const UnbalancedFeeder& f);

struct UnbalancedDopfResult {
    std::map<AreaId, UnbalancedSolution> areas;
    UnbalancedSolution solution;  // whole feeder at the assembled dispatch
    ConvergenceTrace trace;
    int macro_iterations = 0;
    bool converged = false;
};

struct UnbalancedEnappOptions {
    double tol = 1e-3;
    int max_iter = 50;
    bool sequential = false;
    std::size_t workers = 0;
    OpfOptions opf;
};

UnbalancedDopfResult run_enapp_3ph(const UnbalancedFeeder& f, const AreaPartition& p,
                                   const UnbalancedEnappOptions& opts = {}, Transport* transport = nullptr);

}  // namespace enapp
