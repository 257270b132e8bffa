#pragma once

#include <span>
#include <string>
#include <vector>

#include "enapp/feeder.hpp"

namespace enapp {

inline constexpr double kPowerFlowTol = 1e-10;
inline constexpr int kPowerFlowMaxIter = 200;

/// Branch-flow state. Bus vectors follow Feeder::buses, line vectors Feeder::lines.
struct PowerFlowSolution {
    std::vector<double> v_sq;
    std::vector<double> p_flow;  // sending end
    std::vector<double> q_flow;
    std::vector<double> l_sq;
    double source_p = 0.0;  // net power drawn from the root source
    double source_q = 0.0;
    bool converged = false;
    bool collapsed = false;
    int iterations = 0;
    double max_mismatch = 0.0;
};

/// Backward/forward sweep solver bound to one feeder.
///
/// The feeder topology is indexed once so repeated solves at different DER
/// dispatches (the OPF inner loop) do not revalidate the network.
class PowerFlowModel {
public:
    explicit PowerFlowModel(const Feeder& f);

    /// Never throws on divergence; inspect `converged` / `collapsed`.
    PowerFlowSolution run(std::span<const double> q_d, double tol = kPowerFlowTol,
                          int max_iter = kPowerFlowMaxIter) const;

    /// Parameter updates that keep the topology (used when boundary values are decision variables).
    void set_source_voltage(double v_root_sq) { feeder_.v_root_sq = v_root_sq; }
    void set_load(BusId bus, double p, double q);

    const Feeder& feeder() const { return feeder_; }
    const RadialIndex& index() const { return index_; }
    std::size_t der_count() const { return feeder_.ders.size(); }

private:
    Feeder feeder_;
    RadialIndex index_;
    std::vector<std::size_t> der_bus_;
};

/// Throws ConvergenceError when max_iter is exceeded and VoltageCollapseError
/// when a squared voltage becomes non-positive.
PowerFlowSolution sweep_power_flow(const Feeder& f, std::span<const double> q_d,
                                   double tol = kPowerFlowTol, int max_iter = kPowerFlowMaxIter);

/// Sum of r * l over all lines; throws Error on an unconverged solution.
double total_losses(const PowerFlowSolution& s, const Feeder& f);

struct LimitViolation {
    enum class Kind { Undervoltage, Overvoltage, Thermal };
    Kind kind;
    std::string element;
    double value = 0.0;
    double limit = 0.0;
    double magnitude() const { return value > limit ? value - limit : limit - value; }
};

/// Voltage and thermal limit violations; bounds are inclusive.
std::vector<LimitViolation> constraint_violations(const PowerFlowSolution& s, const Feeder& f);

/// Writes "bus,v_sq" rows followed by "line,from,to,p,q,l_sq" rows.
std::string power_flow_csv(const PowerFlowSolution& s, const Feeder& f);

}  // namespace enapp
