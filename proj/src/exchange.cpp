#include "enapp/exchange.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "enapp/error.hpp"
#include "enapp/parallel.hpp"

namespace enapp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void post_outcome(const ExchangeLayout& layout, const AreaId& area, const AreaOutcome& out, int k,
                  Transport& transport) {
    for (const auto& b : layout.boundaries) {
        if (b.upstream == area) {
            auto it = out.voltage.find(b.id);
            if (it == out.voltage.end() || it->second.size() != layout.y1_width)
                throw Error("area " + area + " returned no voltage for boundary " + std::to_string(b.id));
            transport.send({k, area, b.downstream, b.id, Message::Kind::Voltage, it->second});
        }
    }
    for (const auto& b : layout.boundaries) {
        if (b.downstream == area) {
            if (!out.power || out.power->size() != layout.y2_width)
                throw Error("area " + area + " returned no power for boundary " + std::to_string(b.id));
            transport.send({k, area, b.upstream, b.id, Message::Kind::Power, *out.power});
        }
    }
}

void deliver(const ExchangeLayout& layout, const AreaId& to, Transport& transport, SharedValues& values) {
    for (const auto& m : transport.receive(to)) {
        const Boundary& b = layout.boundaries.at(m.boundary);
        auto& v = values[m.boundary];
        if (m.kind == Message::Kind::Voltage) {
            if (m.from != b.upstream || m.to != b.downstream) throw Error("voltage message off its boundary");
            std::copy(m.payload.begin(), m.payload.end(), v.begin());
        } else {
            if (m.from != b.downstream || m.to != b.upstream) throw Error("power message off its boundary");
            std::copy(m.payload.begin(), m.payload.end(), v.begin() + static_cast<long>(layout.y1_width));
        }
    }
}

void check_status(const AreaId& area, const AreaOutcome& out, int k) {
    if (out.status == OpfStatus::Infeasible) throw SubproblemError(area, k, "area subproblem infeasible");
}

}  // namespace

ExchangeResult run_exchange(const ExchangeLayout& layout, SharedValues initial, const AreaSolve& solve,
                            const ExchangeOptions& opts, Transport& transport) {
    if (!(opts.tol > 0.0)) throw ValidationError("tolerance must be positive");
    if (opts.max_iter < 1) throw ValidationError("max_iter must be at least 1");
    const std::size_t width = layout.y1_width + layout.y2_width;
    if (initial.size() != layout.boundaries.size()) throw ValidationError("initial values do not match boundaries");
    for (const auto& v : initial)
        if (v.size() != width) throw ValidationError("initial value width mismatch");

    ExchangeResult res;
    res.trace.labels = layout.labels;
    SharedValues hat = std::move(initial);
    const std::size_t n = layout.order.size();

    for (int k = 1; k <= opts.max_iter; ++k) {
        IterationRecord rec;
        rec.k = k;
        std::vector<AreaOutcome> outcomes(n);
        SharedValues next = hat;
        double coord = 0.0;

        if (opts.sequential) {
            for (std::size_t i = 0; i < n; ++i) {
                const AreaId& a = layout.order[i];
                const auto t0 = Clock::now();
                outcomes[i] = solve(a, next);
                outcomes[i].seconds = seconds_since(t0);
                check_status(a, outcomes[i], k);
                const auto t1 = Clock::now();
                post_outcome(layout, a, outcomes[i], k, transport);
                for (const auto& b : layout.boundaries) {
                    if (b.upstream == a) deliver(layout, b.downstream, transport, next);
                    if (b.downstream == a) deliver(layout, b.upstream, transport, next);
                }
                coord += seconds_since(t1);
            }
        } else {
            parallel_for(n, opts.workers, [&](std::size_t i) {
                const auto t0 = Clock::now();
                outcomes[i] = solve(layout.order[i], hat);
                outcomes[i].seconds = seconds_since(t0);
            });
            for (std::size_t i = 0; i < n; ++i) check_status(layout.order[i], outcomes[i], k);
            const auto t1 = Clock::now();
            for (std::size_t i = 0; i < n; ++i) post_outcome(layout, layout.order[i], outcomes[i], k, transport);
            for (const auto& a : layout.order) deliver(layout, a, transport, next);
            coord += seconds_since(t1);
        }

        const auto t2 = Clock::now();
        rec.residual.resize(next.size());
        for (std::size_t b = 0; b < next.size(); ++b) {
            rec.residual[b].resize(width);
            for (std::size_t c = 0; c < width; ++c) {
                rec.residual[b][c] = next[b][c] - hat[b][c];
                rec.epsilon = std::max(rec.epsilon, std::abs(rec.residual[b][c]));
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            rec.objective += outcomes[i].objective;
            rec.status[layout.order[i]] = outcomes[i].status;
            rec.max_area_seconds = std::max(rec.max_area_seconds, outcomes[i].seconds);
        }
        if (opts.sequential) {
            rec.max_area_seconds = 0.0;
            for (const auto& o : outcomes) rec.max_area_seconds += o.seconds;
        }
        res.last_inputs = hat;
        hat = next;
        rec.values = hat;
        rec.coordinator_seconds = coord + seconds_since(t2);
        res.parallel_seconds += rec.max_area_seconds;
        res.coordinator_seconds += rec.coordinator_seconds;
        res.trace.records.push_back(std::move(rec));
        res.iterations = k;
        if (res.trace.records.back().epsilon <= opts.tol) {
            res.converged = true;
            break;
        }
    }
    res.values = hat;
    return res;
}

std::string trace_csv(const ConvergenceTrace& trace, std::size_t boundaries) {
    std::ostringstream os;
    os << "k,epsilon,objective";
    for (std::size_t b = 0; b < boundaries; ++b) {
        for (const auto& l : trace.labels) os << ",b" << b << "_" << l;
        for (const auto& l : trace.labels) os << ",b" << b << "_r_" << l;
    }
    os << "\n";
    char buf[64];
    for (const auto& r : trace.records) {
        std::snprintf(buf, sizeof buf, "%d,%.12e,%.12e", r.k, r.epsilon, r.objective);
        os << buf;
        for (std::size_t b = 0; b < boundaries; ++b) {
            for (double v : r.values.at(b)) {
                std::snprintf(buf, sizeof buf, ",%.12e", v);
                os << buf;
            }
            for (double v : r.residual.at(b)) {
                std::snprintf(buf, sizeof buf, ",%.12e", v);
                os << buf;
            }
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace enapp
