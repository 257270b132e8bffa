#include "enapp/distflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "enapp/error.hpp"

namespace enapp {

PowerFlowModel::PowerFlowModel(const Feeder& f) : feeder_(f), index_(f) {
    der_bus_.reserve(f.ders.size());
    for (const Der& d : f.ders) der_bus_.push_back(index_.position(d.bus));
}

void PowerFlowModel::set_load(BusId bus, double p, double q) {
    Bus& b = feeder_.buses[index_.position(bus)];
    b.load_p = p;
    b.load_q = q;
}

PowerFlowSolution PowerFlowModel::run(std::span<const double> q_d, double tol, int max_iter) const {
    const auto& buses = feeder_.buses;
    const auto& lines = feeder_.lines;
    const std::size_t nb = buses.size();
    const std::size_t nl = lines.size();
    if (q_d.size() != der_bus_.size()) {
        throw Error("power flow: expected " + std::to_string(der_bus_.size()) + " DER setpoints, got " +
                    std::to_string(q_d.size()));
    }

    std::vector<double> p_net(nb), q_net(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        p_net[b] = buses[b].load_p;
        q_net[b] = buses[b].load_q;
    }
    for (std::size_t k = 0; k < der_bus_.size(); ++k) {
        p_net[der_bus_[k]] -= feeder_.ders[k].p_d;
        q_net[der_bus_[k]] -= q_d[k];
    }

    PowerFlowSolution s;
    s.v_sq.assign(nb, feeder_.v_root_sq);
    s.p_flow.assign(nl, 0.0);
    s.q_flow.assign(nl, 0.0);
    s.l_sq.assign(nl, 0.0);

    const auto& order = index_.order();
    auto backward = [&] {
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const std::size_t line = index_.parent_line(*it);
            if (line == RadialIndex::npos) continue;
            double p = p_net[*it] + lines[line].r * s.l_sq[line];
            double q = q_net[*it] + lines[line].x * s.l_sq[line];
            for (std::size_t c : index_.child_lines(*it)) {
                p += s.p_flow[c];
                q += s.q_flow[c];
            }
            s.p_flow[line] = p;
            s.q_flow[line] = q;
        }
    };
    // Returns false on voltage collapse.
    auto forward = [&] {
        for (std::size_t b : order) {
            const std::size_t line = index_.parent_line(b);
            if (line == RadialIndex::npos) continue;
            const Line& ln = lines[line];
            s.v_sq[b] = s.v_sq[index_.line_from(line)] - 2.0 * (ln.r * s.p_flow[line] + ln.x * s.q_flow[line]) +
                        (ln.r * ln.r + ln.x * ln.x) * s.l_sq[line];
            if (!(s.v_sq[b] > 0.0)) return false;
        }
        return true;
    };

    for (int it = 1; it <= max_iter; ++it) {
        s.iterations = it;
        backward();
        const std::vector<double> v_prev = s.v_sq;
        if (!forward()) {
            s.collapsed = true;
            return s;
        }
        double delta = 0.0;
        for (std::size_t b = 0; b < nb; ++b) delta = std::max(delta, std::abs(s.v_sq[b] - v_prev[b]));
        for (std::size_t l = 0; l < nl; ++l) {
            const double sq = s.p_flow[l] * s.p_flow[l] + s.q_flow[l] * s.q_flow[l];
            const double next = sq / s.v_sq[index_.line_from(l)];
            delta = std::max(delta, std::abs(next - s.l_sq[l]));
            s.l_sq[l] = next;
        }
        if (!std::isfinite(delta)) break;
        if (delta < tol) {
            s.converged = true;
            break;
        }
    }
    if (!s.converged) return s;

    // Re-evaluate flows and voltages with the final currents so the balance and
    // voltage-drop equations hold exactly; only the current definition carries
    // the (sub-tolerance) fixed-point residual.
    backward();
    if (!forward()) {
        s.converged = false;
        s.collapsed = true;
        return s;
    }
    double mismatch = 0.0;
    for (std::size_t l = 0; l < nl; ++l) {
        const double lhs = s.v_sq[index_.line_from(l)] * s.l_sq[l];
        const double rhs = s.p_flow[l] * s.p_flow[l] + s.q_flow[l] * s.q_flow[l];
        mismatch = std::max(mismatch, std::abs(lhs - rhs));
    }
    s.max_mismatch = mismatch;

    const std::size_t root = index_.root();
    s.source_p = p_net[root];
    s.source_q = q_net[root];
    for (std::size_t c : index_.child_lines(root)) {
        s.source_p += s.p_flow[c];
        s.source_q += s.q_flow[c];
    }
    return s;
}

PowerFlowSolution sweep_power_flow(const Feeder& f, std::span<const double> q_d, double tol, int max_iter) {
    if (!(tol > 0.0)) throw Error("power flow tolerance must be positive");
    const PowerFlowModel model(f);
    auto s = model.run(q_d, tol, max_iter);
    if (s.collapsed) throw VoltageCollapseError("power flow: squared voltage became non-positive");
    if (!s.converged) {
        throw ConvergenceError("power flow did not converge in " + std::to_string(max_iter) + " iterations");
    }
    return s;
}

double total_losses(const PowerFlowSolution& s, const Feeder& f) {
    if (!s.converged) throw Error("total_losses: power flow solution is not converged");
    double loss = 0.0;
    for (std::size_t l = 0; l < f.lines.size(); ++l) loss += s.l_sq[l] * f.lines[l].r;
    return loss;
}

std::vector<LimitViolation> constraint_violations(const PowerFlowSolution& s, const Feeder& f) {
    std::vector<LimitViolation> out;
    for (std::size_t b = 0; b < f.buses.size(); ++b) {
        const Bus& bus = f.buses[b];
        const std::string name = "bus " + std::to_string(bus.id);
        if (s.v_sq[b] < bus.v_min_sq) {
            out.push_back({LimitViolation::Kind::Undervoltage, name, s.v_sq[b], bus.v_min_sq});
        } else if (s.v_sq[b] > bus.v_max_sq) {
            out.push_back({LimitViolation::Kind::Overvoltage, name, s.v_sq[b], bus.v_max_sq});
        }
    }
    for (std::size_t l = 0; l < f.lines.size(); ++l) {
        if (s.l_sq[l] > f.lines[l].i_rated_sq) {
            out.push_back({LimitViolation::Kind::Thermal,
                           "line " + std::to_string(f.lines[l].from) + "->" + std::to_string(f.lines[l].to),
                           s.l_sq[l], f.lines[l].i_rated_sq});
        }
    }
    return out;
}

std::string power_flow_csv(const PowerFlowSolution& s, const Feeder& f) {
    std::ostringstream os;
    char buf[256];
    os << "bus,v_sq\n";
    for (std::size_t b = 0; b < f.buses.size(); ++b) {
        std::snprintf(buf, sizeof buf, "%d,%.12e\n", f.buses[b].id, s.v_sq[b]);
        os << buf;
    }
    os << "line,from,to,p,q,l_sq\n";
    for (std::size_t l = 0; l < f.lines.size(); ++l) {
        std::snprintf(buf, sizeof buf, "%zu,%d,%d,%.12e,%.12e,%.12e\n", l, f.lines[l].from, f.lines[l].to,
                      s.p_flow[l], s.q_flow[l], s.l_sq[l]);
        os << buf;
    }
    return os.str();
}

}  // namespace enapp
