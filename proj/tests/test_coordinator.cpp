#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "enapp/central_opf.hpp"
#include "enapp/coordinator.hpp"
#include "enapp/error.hpp"
#include "enapp/generator.hpp"
#include "oracles.hpp"

using namespace enapp;

namespace {

const std::string kSixBus = std::string(ENAPP_SOURCE_DIR) + "/feeders/six_bus.json";
const std::string kSixBusPartition = std::string(ENAPP_SOURCE_DIR) + "/feeders/six_bus_partition.json";

struct Case {
    Feeder f;
    AreaPartition p;
};

Case six_bus() {
    Case c{load_feeder_file(kSixBus), {}};
    c.p = partition(c.f, load_partition_spec_file(kSixBusPartition));
    return c;
}

Case generated(int buses, int areas, std::uint64_t seed) {
    GeneratorOptions g;
    g.buses = buses;
    g.areas = areas;
    g.seed = seed;
    auto gen = generate_feeder(g);
    Case c{gen.feeder, {}};
    c.p = partition(c.f, gen.partition);
    return c;
}

// Chain 1 - 2 - 3 with line impedances (r1, x1) and (r2, x2).
Feeder chain(double r1, double x1, double r2, double x2, double p2, double q2, double p3, double q3) {
    Feeder f;
    f.root = 1;
    f.buses = {Bus{1}, Bus{2, p2, q2}, Bus{3, p3, q3}};
    f.lines = {Line{1, 2, r1, x1}, Line{2, 3, r2, x2}};
    return f;
}

AreaPartition split(const Feeder& f, std::vector<BusId> a1, std::vector<BusId> a2) {
    PartitionSpec spec;
    spec.areas["A1"] = std::move(a1);
    spec.areas["A2"] = std::move(a2);
    return partition(f, spec);
}

double psi1_of(const Feeder& f, const AreaPartition& p, std::complex<double> y2) {
    const BoundaryTable t{{0, BoundaryState{0, f.v_root_sq, y2}}};
    const AreaResult r = solve_area(p, f, "A1", t);
    return psi1_update(r.area, r.solution, p, 0);
}

std::complex<double> psi2_of(const Feeder& f, const AreaPartition& p, double y1) {
    const BoundaryTable t{{0, BoundaryState{0, y1, {}}}};
    const AreaResult r = solve_area(p, f, "A2", t);
    return psi2_update(r.area, r.solution, p, 0);
}

}  // namespace

TEST(Psi1, NoDropWithoutFlow) {
    const Feeder f = chain(0.01, 0.02, 0.01, 0.02, 0.0, 0.0, 0.1, 0.05);
    const auto p = split(f, {1, 2}, {3});
    EXPECT_EQ(psi1_of(f, p, {0.0, 0.0}), f.v_root_sq);
}

TEST(Psi1, TwoBusScalarOracle) {
    const Feeder f = chain(0.01, 0.02, 0.01, 0.02, 0.0, 0.0, 0.0, 0.0);
    const auto p = split(f, {1}, {2, 3});
    EXPECT_NEAR(psi1_of(f, p, {0.1, 0.05}), oracle::two_bus_v(1.0, 0.01, 0.02, 0.1, 0.05), 1e-12);
}

TEST(Psi1, DecreasesWithBoundaryLoad) {
    const Feeder f = chain(0.01, 0.02, 0.01, 0.02, 0.05, 0.02, 0.0, 0.0);
    const auto p = split(f, {1, 2}, {3});
    double previous = 2.0;
    for (double load = 0.0; load <= 0.5; load += 0.05) {
        const double v = psi1_of(f, p, {load, 0.02});
        EXPECT_LT(v, previous);
        previous = v;
    }
}

TEST(Psi1, MissingBoundaryThrows) {
    const Feeder f = chain(0.01, 0.02, 0.01, 0.02, 0.0, 0.0, 0.1, 0.05);
    const auto p = split(f, {1, 2}, {3});
    const AreaResult r = solve_area(p, f, "A1", flat_start(p, f));
    EXPECT_THROW(psi1_update(r.area, r.solution, p, 5), std::exception);
}

TEST(Psi2, EmptyAreaDrawsNothing) {
    const Feeder f = chain(0.01, 0.02, 0.01, 0.02, 0.1, 0.05, 0.0, 0.0);
    const auto p = split(f, {1, 2}, {3});
    const auto y2 = psi2_of(f, p, 1.0);
    EXPECT_EQ(y2, std::complex<double>(0.0, 0.0));
}

TEST(Psi2, SingleLoadAtDummyBus) {
    const Feeder f = chain(0.01, 0.02, 0.01, 0.02, 0.0, 0.0, 0.1, 0.05);
    const auto p = split(f, {1, 2}, {3});
    const auto y2 = psi2_of(f, p, 0.98);
    EXPECT_NEAR(y2.real(), 0.1, 1e-15);
    EXPECT_NEAR(y2.imag(), 0.05, 1e-15);
}

TEST(Psi2, TwoBusScalarOracle) {
    const Feeder f = chain(0.01, 0.02, 0.015, 0.025, 0.0, 0.0, 0.12, 0.06);
    const auto p = split(f, {1}, {2, 3});
    for (double y1 : {0.95, 1.0, 1.05}) {
        const auto y2 = psi2_of(f, p, y1);
        const auto ref = oracle::two_bus_sending(y1, 0.015, 0.025, 0.12, 0.06);
        EXPECT_NEAR(y2.real(), ref.real(), 1e-12);
        EXPECT_NEAR(y2.imag(), ref.imag(), 1e-12);
    }
}

TEST(RunEnapp, SingleAreaEqualsCentral) {
    const Feeder f = load_feeder_file(kSixBus);
    const auto p = partition(f, single_area_spec(f));
    const auto r = run_enapp(f, p);
    const auto c = solve_copf(f);
    EXPECT_EQ(r.macro_iterations, 1);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.solution.q_d, c.q_d);
    EXPECT_EQ(r.solution.objective, c.objective);
    EXPECT_EQ(r.assembly.max_mismatch, 0.0);
}

TEST(RunEnapp, SixBusConverges) {
    const auto c = six_bus();
    const auto r = run_enapp(c.f, c.p);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.macro_iterations, 10);
    EXPECT_LE(r.trace.records.back().epsilon, 1e-3);
    EXPECT_LE(r.assembly.max_mismatch, 10 * 1e-3);
    EXPECT_EQ(r.solution.status, OpfStatus::Optimal);
    // every area solved to optimality at every iteration
    for (const auto& rec : r.trace.records)
        for (const auto& [a, s] : rec.status) EXPECT_EQ(s, OpfStatus::Optimal) << a;
}

TEST(RunEnapp, StaleBoundaryIsReported) {
    const auto c = six_bus();
    EnappOptions o;
    o.max_iter = 1;
    const auto r = run_enapp(c.f, c.p, o);
    EXPECT_FALSE(r.converged);
    EXPECT_GT(r.assembly.max_mismatch, o.tol);
}

// Algorithm 1 written out by hand for two areas: solve, exchange, residual, update.
TEST(RunEnapp, ParallelModeMatchesManualLoop) {
    const auto c = six_bus();
    BoundaryTable y = flat_start(c.p, c.f);
    int k = 0;
    for (k = 1; k <= 50; ++k) {
        const AreaResult ua = solve_area(c.p, c.f, "A1", y);
        const AreaResult da = solve_area(c.p, c.f, "A2", y);
        BoundaryState next = y.at(0);
        next.y1 = psi1_update(ua.area, ua.solution, c.p, 0);
        next.y2 = psi2_update(da.area, da.solution, c.p, 0);
        const double eps = std::max({std::abs(next.y1 - y.at(0).y1), std::abs(next.y2.real() - y.at(0).y2.real()),
                                     std::abs(next.y2.imag() - y.at(0).y2.imag())});
        y[0] = next;
        if (eps <= 1e-3) break;
    }
    const auto r = run_enapp(c.f, c.p);
    EXPECT_EQ(r.macro_iterations, k);
    EXPECT_NEAR(r.boundaries.at(0).y1, y.at(0).y1, 1e-12);
    EXPECT_NEAR(r.boundaries.at(0).y2.real(), y.at(0).y2.real(), 1e-12);
    EXPECT_NEAR(r.boundaries.at(0).y2.imag(), y.at(0).y2.imag(), 1e-12);
}

// Block-coordinate form: the downstream area sees the voltage produced in the same round.
TEST(RunEnapp, SequentialModeMatchesManualBcd) {
    const auto c = six_bus();
    BoundaryTable y = flat_start(c.p, c.f);
    int k = 0;
    std::vector<double> q_a1, q_a2;
    for (k = 1; k <= 50; ++k) {
        const BoundaryState before = y.at(0);
        const AreaResult ua = solve_area(c.p, c.f, "A1", y);
        y[0].y1 = psi1_update(ua.area, ua.solution, c.p, 0);
        const AreaResult da = solve_area(c.p, c.f, "A2", y);
        y[0].y2 = psi2_update(da.area, da.solution, c.p, 0);
        q_a1 = ua.solution.q_d;
        q_a2 = da.solution.q_d;
        const double eps = std::max({std::abs(y.at(0).y1 - before.y1), std::abs(y.at(0).y2.real() - before.y2.real()),
                                     std::abs(y.at(0).y2.imag() - before.y2.imag())});
        if (eps <= 1e-3) break;
    }
    EnappOptions o;
    o.sequential = true;
    const auto r = run_enapp(c.f, c.p, o);
    EXPECT_EQ(r.macro_iterations, k);
    EXPECT_NEAR(r.boundaries.at(0).y1, y.at(0).y1, 1e-12);
    EXPECT_NEAR(r.boundaries.at(0).y2.real(), y.at(0).y2.real(), 1e-12);
    EXPECT_NEAR(r.boundaries.at(0).y2.imag(), y.at(0).y2.imag(), 1e-12);
    ASSERT_EQ(r.areas.at("A1").solution.q_d.size(), q_a1.size());
    for (std::size_t i = 0; i < q_a1.size(); ++i) EXPECT_NEAR(r.areas.at("A1").solution.q_d[i], q_a1[i], 1e-12);
    for (std::size_t i = 0; i < q_a2.size(); ++i) EXPECT_NEAR(r.areas.at("A2").solution.q_d[i], q_a2[i], 1e-12);
}

TEST(RunEnapp, TransportCarriesThreeScalarsBetweenNeighbors) {
    const auto c = generated(30, 4, 7);
    RecordingTransport t;
    const auto r = run_enapp(c.f, c.p, {}, &t);
    const auto log = t.log();
    std::map<std::pair<int, BoundaryId>, std::size_t> scalars;
    for (const auto& m : log) {
        const Boundary& b = c.p.boundary(m.boundary);
        if (m.kind == Message::Kind::Voltage) {
            EXPECT_EQ(m.from, b.upstream);
            EXPECT_EQ(m.to, b.downstream);
            EXPECT_EQ(m.payload.size(), 1u);
        } else {
            EXPECT_EQ(m.from, b.downstream);
            EXPECT_EQ(m.to, b.upstream);
            EXPECT_EQ(m.payload.size(), 2u);
        }
        scalars[{m.iteration, m.boundary}] += m.payload.size();
    }
    EXPECT_EQ(scalars.size(), static_cast<std::size_t>(r.macro_iterations) * c.p.boundaries.size());
    for (const auto& [key, n] : scalars) EXPECT_EQ(n, 3u);
}

TEST(RunEnapp, DeterministicAcrossRunsAndWorkers) {
    const auto c = generated(30, 4, 3);
    EnappOptions one;
    one.workers = 1;
    EnappOptions many;
    many.workers = 4;
    const auto a = run_enapp(c.f, c.p, one);
    const auto b = run_enapp(c.f, c.p, many);
    const auto again = run_enapp(c.f, c.p, many);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        EXPECT_EQ(a.trace.records[i].values, b.trace.records[i].values);
        EXPECT_EQ(a.trace.records[i].values, again.trace.records[i].values);
    }
    EXPECT_EQ(a.solution.q_d, b.solution.q_d);
    EXPECT_EQ(trace_csv(b.trace, c.p.boundaries.size()), trace_csv(again.trace, c.p.boundaries.size()));
}

TEST(RunEnapp, InfeasibleAreaRaisesSubproblemError) {
    auto c = six_bus();
    for (auto& b : c.f.buses)
        if (b.id == 6) b.v_min_sq = 0.9999;
    try {
        run_enapp(c.f, c.p);
        FAIL() << "expected SubproblemError";
    } catch (const SubproblemError& e) {
        EXPECT_EQ(e.area(), "A2");
        EXPECT_EQ(e.iteration(), 1);
    }
}

TEST(RunEnapp, TraceCsvHasOneRowPerIteration) {
    const auto c = six_bus();
    const auto r = run_enapp(c.f, c.p);
    const auto csv = trace_csv(r.trace, c.p.boundaries.size());
    std::size_t lines = 0;
    for (char ch : csv) lines += ch == '\n';
    EXPECT_EQ(lines, static_cast<std::size_t>(r.macro_iterations) + 1);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,epsilon,objective,b0_y1,b0_y2_p,b0_y2_q,b0_r_y1,b0_r_y2_p,b0_r_y2_q");
}

TEST(Assembly, SingleAreaIsIdentity) {
    const Feeder f = load_feeder_file(kSixBus);
    const auto p = partition(f, single_area_spec(f));
    std::map<AreaId, AreaResult> areas;
    areas["A1"] = solve_area(p, f, "A1", {});
    const auto a = assemble_solution(areas, p, f, {});
    EXPECT_EQ(a.solution.q_d, areas["A1"].solution.q_d);
    EXPECT_EQ(a.solution.flow.v_sq, areas["A1"].solution.flow.v_sq);
    EXPECT_EQ(a.report.max_mismatch, 0.0);
}

TEST(Exchange, ResidualIsReceivedMinusInput) {
    // Two scripted areas: the upstream one halves the distance of y1 to 0.9,
    // the downstream one reports a constant power.
    ExchangeLayout layout;
    layout.order = {"U", "D"};
    layout.boundaries = {Boundary{0, "U", "D", 99, 1, 2, 0}};
    layout.labels = {"y1", "y2_p", "y2_q"};
    const AreaSolve solve = [](const AreaId& a, const SharedValues& in) {
        AreaOutcome o;
        if (a == "U") o.voltage[0] = {0.9 + 0.5 * (in[0][0] - 0.9)};
        else o.power = std::vector<double>{0.2, 0.1};
        return o;
    };
    QueueTransport t;
    ExchangeOptions opts;
    opts.tol = 1e-6;
    const auto r = run_exchange(layout, {{1.0, 0.0, 0.0}}, solve, opts, t);
    ASSERT_TRUE(r.converged);
    const auto& first = r.trace.records.front();
    EXPECT_NEAR(first.residual[0][0], -0.05, 1e-15);
    EXPECT_NEAR(first.residual[0][1], 0.2, 1e-15);
    EXPECT_NEAR(first.epsilon, 0.2, 1e-15);
    for (std::size_t k = 2; k < r.trace.size(); ++k)
        EXPECT_NEAR(r.trace.records[k].epsilon / r.trace.records[k - 1].epsilon, 0.5, 1e-9);
    EXPECT_NEAR(r.values[0][0], 0.9, 1e-6);
}

TEST(Exchange, RejectsBadOptions) {
    ExchangeLayout layout;
    QueueTransport t;
    ExchangeOptions opts;
    opts.tol = 0.0;
    EXPECT_THROW(run_exchange(layout, {}, {}, opts, t), ValidationError);
}
