#include "enapp/coordinator.hpp"

#include <algorithm>
#include <cmath>

#include "enapp/error.hpp"
#include "enapp/parallel.hpp"

namespace enapp {

namespace {

std::size_t bus_index(const Feeder& f, BusId id, const std::string& what) {
    const std::size_t pos = f.bus_position(id);
    if (pos == Feeder::npos) throw Error(what + ": dummy bus " + std::to_string(id) + " absent");
    return pos;
}

}  // namespace

double psi1_update(const AreaFeeder& ua, const OpfSolution& ua_solution, const AreaPartition& p,
                   BoundaryId boundary) {
    const Boundary& b = p.boundary(boundary);
    const std::size_t pos = bus_index(ua.feeder, b.dummy_bus, "psi1");
    if (ua.feeder.root == b.dummy_bus) throw Error("psi1: dummy bus is the area source");
    return ua_solution.flow.v_sq.at(pos);
}

std::complex<double> psi2_update(const AreaFeeder& da, const OpfSolution& da_solution, const AreaPartition& p,
                                 BoundaryId boundary) {
    const Boundary& b = p.boundary(boundary);
    bus_index(da.feeder, b.dummy_bus, "psi2");
    if (da.feeder.root != b.dummy_bus) throw Error("psi2: dummy bus is not the area source");
    return {da_solution.flow.source_p, da_solution.flow.source_q};
}

AreaResult solve_area(const AreaPartition& p, const Feeder& f, const AreaId& area, const BoundaryTable& b,
                      const OpfOptions& opts) {
    AreaResult r{build_area(p, f, area, b), {}};
    r.solution = solve_area_opf(r.area.feeder, opts);
    return r;
}

AssembledSolution assemble_solution(const std::map<AreaId, AreaResult>& areas, const AreaPartition& p,
                                    const Feeder& f, const BoundaryTable& used, const OpfOptions& opts) {
    AssembledSolution out;
    OpfSolution& s = out.solution;
    s.q_d.assign(f.ders.size(), 0.0);
    s.status = OpfStatus::Optimal;
    for (const auto& [id, a] : areas) {
        for (std::size_t k = 0; k < a.area.der_index.size(); ++k) s.q_d[a.area.der_index[k]] = a.solution.q_d[k];
        s.kkt_residual = std::max(s.kkt_residual, a.solution.kkt_residual);
        s.iterations += a.solution.iterations;
        if (a.solution.status == OpfStatus::Infeasible) s.status = OpfStatus::Infeasible;
        else if (a.solution.status == OpfStatus::MaxIter && s.status == OpfStatus::Optimal)
            s.status = OpfStatus::MaxIter;
    }
    s.flow = sweep_power_flow(f, s.q_d, opts.pf_tol, opts.pf_max_iter);
    s.objective = total_losses(s.flow, f);
    for (const auto& v : constraint_violations(s.flow, f)) {
        if (v.magnitude() > opts.constraint_tol) s.violations.push_back(v);
    }

    AssemblyReport& r = out.report;
    for (const Boundary& b : p.boundaries) {
        const auto it = used.find(b.id);
        if (it == used.end()) throw Error("assembly: no boundary value for boundary " + std::to_string(b.id));
        const std::size_t j = f.bus_position(b.downstream_bus);
        const Line& line = f.lines[b.line];
        const double l = s.flow.l_sq[b.line];
        std::complex<double> drawn(s.flow.p_flow[b.line] - line.r * l, s.flow.q_flow[b.line] - line.x * l);
        // The entry-bus DER is dispatched by the upstream area, so it is not part of y2.
        for (std::size_t k = 0; k < f.ders.size(); ++k) {
            if (f.ders[k].bus == b.downstream_bus) drawn += std::complex<double>(f.ders[k].p_d, s.q_d[k]);
        }
        r.y1_mismatch.push_back(std::abs(it->second.y1 - s.flow.v_sq[j]));
        r.y2_mismatch.push_back(std::max(std::abs(it->second.y2.real() - drawn.real()),
                                         std::abs(it->second.y2.imag() - drawn.imag())));
        r.max_mismatch = std::max({r.max_mismatch, r.y1_mismatch.back(), r.y2_mismatch.back()});
    }
    return out;
}

ExchangeLayout enapp_layout(const AreaPartition& p) {
    ExchangeLayout layout;
    layout.order = p.topological_order();
    layout.boundaries = p.boundaries;
    layout.y1_width = 1;
    layout.y2_width = 2;
    layout.labels = {"y1", "y2_p", "y2_q"};
    return layout;
}

SharedValues to_shared(const BoundaryTable& t) {
    SharedValues v;
    for (const auto& [id, s] : t) {
        if (id != v.size()) throw Error("boundary table is not dense");
        v.push_back({s.y1, s.y2.real(), s.y2.imag()});
    }
    return v;
}

BoundaryTable to_table(const SharedValues& v) {
    BoundaryTable t;
    for (std::size_t b = 0; b < v.size(); ++b) t[b] = BoundaryState{b, v[b][0], {v[b][1], v[b][2]}};
    return t;
}

DopfResult run_enapp(const Feeder& f, const AreaPartition& p, const EnappOptions& opts, Transport* transport) {
    QueueTransport own;
    Transport& channel = transport ? *transport : own;
    const ExchangeLayout layout = enapp_layout(p);

    std::map<AreaId, AreaResult> latest;
    for (const auto& a : layout.order) latest[a];

    const AreaSolve solve = [&](const AreaId& area, const SharedValues& inputs) {
        AreaResult& slot = latest.at(area);
        slot = solve_area(p, f, area, to_table(inputs), opts.opf);
        AreaOutcome out;
        out.objective = slot.solution.objective;
        out.status = slot.solution.status;
        for (BoundaryId b : slot.area.downstream) out.voltage[b] = {psi1_update(slot.area, slot.solution, p, b)};
        if (slot.area.upstream) {
            const auto y2 = psi2_update(slot.area, slot.solution, p, *slot.area.upstream);
            out.power = std::vector<double>{y2.real(), y2.imag()};
        }
        return out;
    };

    ExchangeOptions ex;
    ex.tol = opts.tol;
    ex.max_iter = opts.max_iter;
    ex.sequential = opts.sequential;
    ex.workers = opts.workers ? opts.workers : worker_count();
    ExchangeResult run = run_exchange(layout, to_shared(flat_start(p, f)), solve, ex, channel);

    DopfResult res;
    auto assembled = assemble_solution(latest, p, f, to_table(run.last_inputs), opts.opf);
    res.areas = std::move(latest);
    res.solution = std::move(assembled.solution);
    res.assembly = std::move(assembled.report);
    res.trace = std::move(run.trace);
    res.boundaries = to_table(run.values);
    res.macro_iterations = run.iterations;
    res.converged = run.converged;
    res.parallel_seconds = run.parallel_seconds;
    res.coordinator_seconds = run.coordinator_seconds;
    return res;
}

}  // namespace enapp
