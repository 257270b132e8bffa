#include "enapp/admm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "enapp/error.hpp"
#include "enapp/parallel.hpp"

namespace enapp {

namespace {

constexpr double kPowerBox = 10.0;

struct AreaWork {
    AreaFeeder area;
    std::vector<double> x;  // q_d, then y1 (downstream side), then y2_p, y2_q per downstream boundary
    OpfSolution solution;
    std::map<BoundaryId, std::vector<double>> copies;
    double seconds = 0.0;
};

double dot_penalty(const std::vector<double>& c, const std::vector<double>& z, const std::vector<double>& lambda,
                   double rho) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double d = c[i] - z[i];
        s += lambda[i] * d + 0.5 * rho * d * d;
    }
    return s;
}

void solve_admm_area(AreaWork& w, const AreaPartition& p, const AdmmState& st, const OpfOptions& opts) {
    const Feeder& area = w.area.feeder;
    const std::size_t nq = area.ders.size();
    const bool up = w.area.upstream.has_value();
    const auto& downs = w.area.downstream;

    if (!up && downs.empty()) {
        w.solution = solve_area_opf(area, opts);
        w.x = w.solution.q_d;
        return;
    }

    PowerFlowModel model(area);
    const std::size_t nx = nq + (up ? 1 : 0) + 2 * downs.size();
    std::vector<double> lo(nx), hi(nx);
    for (std::size_t k = 0; k < nq; ++k) {
        const auto qb = der_q_bounds(area.ders[k]);
        lo[k] = qb.lo;
        hi[k] = qb.hi;
    }
    std::size_t at = nq;
    if (up) {
        const Bus& entry = area.bus(area.root);
        lo[at] = entry.v_min_sq;
        hi[at] = entry.v_max_sq;
        ++at;
    }
    for (std::size_t j = 0; j < downs.size(); ++j, at += 2) {
        lo[at] = lo[at + 1] = -kPowerBox;
        hi[at] = hi[at + 1] = kPowerBox;
    }

    auto apply = [&](std::span<const double> x) {
        std::size_t i = nq;
        if (up) model.set_source_voltage(x[i++]);
        for (BoundaryId b : downs) {
            model.set_load(p.boundary(b).dummy_bus, x[i], x[i + 1]);
            i += 2;
        }
    };
    auto copies = [&](std::span<const double> x, const PowerFlowSolution& s) {
        std::map<BoundaryId, std::vector<double>> c;
        std::size_t i = nq;
        if (up) c[*w.area.upstream] = {x[i++], s.source_p, s.source_q};
        for (BoundaryId b : downs) {
            const std::size_t pos = model.index().position(p.boundary(b).dummy_bus);
            c[b] = {s.v_sq[pos], x[i], x[i + 1]};
            i += 2;
        }
        return c;
    };

    optim::ConstrainedProblem problem;
    problem.lo = lo;
    problem.hi = hi;
    problem.evaluate = [&](std::span<const double> x, std::vector<double>& slacks) {
        apply(x);
        const auto s = model.run(x.first(nq), opts.pf_tol, opts.pf_max_iter);
        if (!s.converged) return std::numeric_limits<double>::infinity();
        opf_slacks(s, model.feeder(), model.index(), slacks);
        double obj = total_losses(s, model.feeder());
        for (const auto& [b, c] : copies(x, s)) {
            const AdmmBoundary& ab = st.boundaries[b];
            const bool is_up_side = p.boundary(b).upstream == w.area.area;
            obj += dot_penalty(c, ab.z, is_up_side ? ab.upstream_lambda : ab.downstream_lambda, st.rho);
        }
        return obj;
    };

    const auto r = optim::solve_barrier(problem, w.x, barrier_options(opts));
    w.x = r.x;
    apply(w.x);
    OpfSolution& sol = w.solution;
    sol.q_d.assign(w.x.begin(), w.x.begin() + static_cast<long>(nq));
    sol.kkt_residual = r.kkt_residual;
    sol.iterations = r.iterations;
    sol.status = r.status == optim::BarrierStatus::Optimal   ? OpfStatus::Optimal
                 : r.status == optim::BarrierStatus::MaxIter ? OpfStatus::MaxIter
                                                             : OpfStatus::Infeasible;
    sol.flow = model.run(sol.q_d, opts.pf_tol, opts.pf_max_iter);
    if (!sol.flow.converged) throw ConvergenceError("ADMM area power flow diverged");
    sol.objective = total_losses(sol.flow, model.feeder());
    w.copies = copies(w.x, sol.flow);
}

}  // namespace

DopfResult run_admm(const Feeder& f, const AreaPartition& p, const AdmmOptions& opts, AdmmState* final_state) {
    if (!(opts.rho > 0.0)) throw ValidationError("rho must be positive");
    if (!(opts.tol > 0.0)) throw ValidationError("tolerance must be positive");
    if (opts.max_iter < 1) throw ValidationError("max_iter must be at least 1");
    using Clock = std::chrono::steady_clock;

    const auto order = p.topological_order();
    const BoundaryTable start = flat_start(p, f);
    AdmmState st;
    st.rho = opts.rho;
    for (const auto& [id, s] : start) {
        AdmmBoundary ab;
        ab.z = {s.y1, s.y2.real(), s.y2.imag()};
        ab.upstream_copy = ab.downstream_copy = ab.z;
        ab.upstream_lambda = ab.downstream_lambda = {0.0, 0.0, 0.0};
        st.boundaries.push_back(ab);
    }

    std::vector<AreaWork> work(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        work[i].area = build_area(p, f, order[i], start);
        work[i].x.assign(work[i].area.feeder.ders.size(), 0.0);
        if (work[i].area.upstream) work[i].x.push_back(start.at(*work[i].area.upstream).y1);
        for (BoundaryId b : work[i].area.downstream) {
            work[i].x.push_back(start.at(b).y2.real());
            work[i].x.push_back(start.at(b).y2.imag());
        }
    }

    DopfResult res;
    res.trace.labels = {"y1", "y2_p", "y2_q"};
    const std::size_t workers = opts.workers ? opts.workers : worker_count();

    for (int k = 1; k <= opts.max_iter; ++k) {
        IterationRecord rec;
        rec.k = k;
        parallel_for(work.size(), workers, [&](std::size_t i) {
            const auto t0 = Clock::now();
            solve_admm_area(work[i], p, st, opts.opf);
            work[i].seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        });
        const auto t1 = Clock::now();
        for (std::size_t i = 0; i < work.size(); ++i) {
            if (work[i].solution.status == OpfStatus::Infeasible)
                throw SubproblemError(order[i], k, "ADMM area subproblem infeasible");
            rec.objective += work[i].solution.objective;
            rec.status[order[i]] = work[i].solution.status;
            rec.max_area_seconds = std::max(rec.max_area_seconds, work[i].seconds);
            for (const auto& [b, c] : work[i].copies) {
                auto& ab = st.boundaries[b];
                (p.boundary(b).upstream == order[i] ? ab.upstream_copy : ab.downstream_copy) = c;
            }
        }

        double primal = 0.0, dual = 0.0;
        rec.values.resize(st.boundaries.size());
        rec.residual.resize(st.boundaries.size());
        for (auto& ab : st.boundaries) {
            const std::size_t b = static_cast<std::size_t>(&ab - st.boundaries.data());
            std::vector<double> z_old = ab.z;
            for (std::size_t c = 0; c < 3; ++c) {
                ab.z[c] = 0.5 * (ab.upstream_copy[c] + ab.upstream_lambda[c] / st.rho + ab.downstream_copy[c] +
                                 ab.downstream_lambda[c] / st.rho);
            }
            rec.residual[b].resize(3);
            for (std::size_t c = 0; c < 3; ++c) {
                const double ru = ab.upstream_copy[c] - ab.z[c];
                const double rd = ab.downstream_copy[c] - ab.z[c];
                ab.upstream_lambda[c] += st.rho * ru;
                ab.downstream_lambda[c] += st.rho * rd;
                primal = std::max({primal, std::abs(ru), std::abs(rd)});
                dual = std::max(dual, st.rho * std::abs(ab.z[c] - z_old[c]));
                rec.residual[b][c] = ab.upstream_copy[c] - ab.downstream_copy[c];
            }
            rec.values[b] = ab.z;
        }
        rec.primal_residual = primal;
        rec.dual_residual = dual;
        rec.epsilon = std::max(primal, dual);
        if (opts.residual_balancing) {
            if (primal > 10.0 * dual) st.rho *= 2.0;
            else if (dual > 10.0 * primal) st.rho /= 2.0;
        }
        rec.coordinator_seconds = std::chrono::duration<double>(Clock::now() - t1).count();
        res.parallel_seconds += rec.max_area_seconds;
        res.coordinator_seconds += rec.coordinator_seconds;
        res.trace.records.push_back(std::move(rec));
        res.macro_iterations = k;
        if (primal <= opts.tol && dual <= opts.tol) {
            res.converged = true;
            break;
        }
    }

    BoundaryTable used;
    for (std::size_t b = 0; b < st.boundaries.size(); ++b) {
        const auto& z = st.boundaries[b].z;
        used[b] = BoundaryState{b, z[0], {z[1], z[2]}};
    }
    for (std::size_t i = 0; i < order.size(); ++i) res.areas[order[i]] = AreaResult{work[i].area, work[i].solution};
    auto assembled = assemble_solution(res.areas, p, f, used, opts.opf);
    res.solution = std::move(assembled.solution);
    res.assembly = std::move(assembled.report);
    res.boundaries = used;
    if (final_state) *final_state = st;
    return res;
}

}  // namespace enapp
