#include "enapp/local_opf.hpp"

#include <cmath>
#include <limits>

#include "enapp/error.hpp"

namespace enapp {

QBounds der_q_bounds(const Der& d) {
    if (d.p_d < 0.0 || d.p_d > d.s_rating) {
        throw ValidationError("DER at bus " + std::to_string(d.bus) + ": p_d outside [0, s_rating]");
    }
    const double hi = std::sqrt(d.s_rating * d.s_rating - d.p_d * d.p_d);
    return {-hi, hi};
}

std::string to_string(OpfStatus s) {
    switch (s) {
        case OpfStatus::Optimal: return "optimal";
        case OpfStatus::MaxIter: return "max_iter";
        case OpfStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

optim::BarrierOptions barrier_options(const OpfOptions& opts) {
    optim::BarrierOptions b;
    b.mu0 = opts.mu0;
    b.mu_factor = opts.mu_factor;
    b.stages = opts.barrier_stages;
    b.box.grad_tol = opts.kkt_tol;
    b.box.fd_step = opts.fd_step;
    b.box.max_iter = opts.max_iter;
    return b;
}

void opf_slacks(const PowerFlowSolution& s, const Feeder& f, const RadialIndex& index,
                std::vector<double>& slacks) {
    slacks.clear();
    for (std::size_t b = 0; b < f.buses.size(); ++b) {
        if (b == index.root()) continue;
        slacks.push_back(s.v_sq[b] - f.buses[b].v_min_sq);
        slacks.push_back(f.buses[b].v_max_sq - s.v_sq[b]);
    }
    for (std::size_t l = 0; l < f.lines.size(); ++l) {
        if (std::isfinite(f.lines[l].i_rated_sq)) slacks.push_back(f.lines[l].i_rated_sq - s.l_sq[l]);
    }
}

OpfSolution solve_area_opf(const Feeder& area, const OpfOptions& opts) {
    const PowerFlowModel model(area);
    const std::size_t n = area.ders.size();
    std::vector<double> lo(n), hi(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto qb = der_q_bounds(area.ders[k]);
        lo[k] = qb.lo;
        hi[k] = qb.hi;
    }

    OpfSolution out;
    std::vector<double> x0(n, 0.0);
    if (opts.q_init && opts.q_init->size() == n) x0 = *opts.q_init;

    if (n == 0) {
        out.flow = model.run(x0, opts.pf_tol, opts.pf_max_iter);
    } else {
        optim::ConstrainedProblem problem;
        problem.lo = lo;
        problem.hi = hi;
        problem.evaluate = [&](std::span<const double> q, std::vector<double>& slacks) {
            const auto s = model.run(q, opts.pf_tol, opts.pf_max_iter);
            if (!s.converged) return std::numeric_limits<double>::infinity();
            opf_slacks(s, area, model.index(), slacks);
            return total_losses(s, area);
        };
        const auto r = optim::solve_barrier(problem, x0, barrier_options(opts));
        out.q_d = r.x;
        out.kkt_residual = r.kkt_residual;
        out.iterations = r.iterations;
        out.status = r.status == optim::BarrierStatus::Optimal   ? OpfStatus::Optimal
                     : r.status == optim::BarrierStatus::MaxIter ? OpfStatus::MaxIter
                                                                 : OpfStatus::Infeasible;
        out.flow = model.run(out.q_d, opts.pf_tol, opts.pf_max_iter);
    }
    if (!out.flow.converged) {
        throw ConvergenceError("area OPF: power flow diverged at every trial point");
    }
    out.objective = total_losses(out.flow, area);

    // Bounds are checked with the constraint tolerance; anything beyond it is infeasible.
    for (auto& v : constraint_violations(out.flow, area)) {
        const bool root = v.element == "bus " + std::to_string(area.root);
        if (!root && v.magnitude() > opts.constraint_tol) out.violations.push_back(v);
    }
    if (!out.violations.empty()) out.status = OpfStatus::Infeasible;
    return out;
}

}  // namespace enapp
