#include <gtest/gtest.h>

#include <sstream>

#include "enapp/central_opf.hpp"
#include "enapp/error.hpp"
#include "enapp/unbalanced.hpp"
#include "oracles.hpp"

using namespace enapp;

namespace {

const std::string kDir = std::string(ENAPP_SOURCE_DIR) + "/feeders/";

UnbalancedFeeder balanced() { return load_unbalanced_feeder_file(kDir + "three_phase_balanced.json"); }
UnbalancedFeeder unbalanced() { return load_unbalanced_feeder_file(kDir + "three_phase_unbalanced.json"); }
AreaPartition split(const UnbalancedFeeder& f, const std::string& name) {
    return partition(f.skeleton(), load_partition_spec_file(kDir + name));
}

PhaseMatrix coupled(double self, double mutual) {
    return {PhaseArray{self, mutual, mutual}, PhaseArray{mutual, self, mutual}, PhaseArray{mutual, mutual, self}};
}

// 1 -abc- 2 -abc- 3, 2 -bc- 4 with mutual coupling on every line.
UnbalancedFeeder four_bus() {
    UnbalancedFeeder f;
    f.root = 1;
    f.v_root_sq = {1.0, 1.02, 0.99};
    UnbalancedBus b1{1, kPhaseABC};
    UnbalancedBus b2{2, kPhaseABC, {0.05, 0.03, 0.04}, {0.02, 0.015, 0.01}};
    UnbalancedBus b3{3, kPhaseABC, {0.02, 0.06, 0.03}, {0.01, 0.02, 0.012}};
    UnbalancedBus b4{4, kPhaseB | kPhaseC, {0.0, 0.04, 0.05}, {0.0, 0.02, 0.015}};
    f.buses = {b1, b2, b3, b4};
    f.lines = {UnbalancedLine{1, 2, coupled(0.02, 0.008), coupled(0.04, 0.015)},
               UnbalancedLine{2, 3, coupled(0.03, 0.01), coupled(0.05, 0.02)},
               UnbalancedLine{2, 4, coupled(0.025, 0.009), coupled(0.045, 0.018)}};
    f.ders = {UnbalancedDer{3, 1, 0.02, 0.05}};
    return f;
}

}  // namespace

TEST(Unbalanced, BalancedSweepEqualsSinglePhase) {
    const Feeder single = load_feeder_file(kDir + "six_bus.json");
    const std::vector<double> q{0.02, -0.01};
    const auto s1 = sweep_power_flow(single, q);
    for (const auto& f3 : {balanced(), balanced_from_single_phase(single)}) {
        std::vector<double> q3;
        for (const auto& d : f3.ders) q3.push_back(d.bus == 3 ? q[0] : q[1]);
        const auto s3 = sweep_power_flow_3ph(f3, q3);
        for (std::size_t b = 0; b < single.buses.size(); ++b)
            for (int p = 0; p < 3; ++p) EXPECT_NEAR(s3.v_sq[b][p], s1.v_sq[b], 1e-9);
        for (std::size_t l = 0; l < single.lines.size(); ++l)
            for (int p = 0; p < 3; ++p) {
                EXPECT_NEAR(s3.p_flow[l][p], s1.p_flow[l], 1e-9);
                EXPECT_NEAR(s3.l_sq[l][p], s1.l_sq[l], 1e-9);
            }
        EXPECT_NEAR(s3.objective, 3.0 * total_losses(s1, single), 1e-9);
    }
}

TEST(Unbalanced, ZeroLoadsFlatProfile) {
    UnbalancedFeeder f = four_bus();
    for (auto& b : f.buses) b.load_p = b.load_q = PhaseArray{};
    f.ders.clear();
    const auto s = sweep_power_flow_3ph(f, {});
    for (std::size_t b = 0; b < f.buses.size(); ++b)
        for (int p = 0; p < 3; ++p) EXPECT_EQ(s.v_sq[b][p], f.v_root_sq[p]);
    EXPECT_EQ(s.objective, 0.0);
}

TEST(Unbalanced, CoupledFeederMatchesJacobiOracle) {
    const UnbalancedFeeder f = four_bus();
    for (double q : {-0.03, 0.0, 0.04}) {
        const auto ref = oracle::power_flow_3ph(f, {q});
        ASSERT_TRUE(ref.converged);
        const auto s = sweep_power_flow_3ph(f, std::vector<double>{q});
        for (std::size_t b = 0; b < f.buses.size(); ++b)
            for (int p = 0; p < 3; ++p)
                if (has_phase(f.buses[b].phases, p)) EXPECT_NEAR(s.v_sq[b][p], ref.v_sq[b][p], 1e-8);
        for (std::size_t l = 0; l < f.lines.size(); ++l)
            for (int p = 0; p < 3; ++p) {
                EXPECT_NEAR(s.p_flow[l][p], ref.p[l][p], 1e-8);
                EXPECT_NEAR(s.q_flow[l][p], ref.q[l][p], 1e-8);
            }
        EXPECT_NEAR(s.objective, oracle::losses_3ph(ref, f), 1e-10);
        EXPECT_LT(s.max_mismatch, 1e-10);
    }
}

TEST(Unbalanced, FixtureMismatch) {
    const auto f = unbalanced();
    const auto s = sweep_power_flow_3ph(f, std::vector<double>(f.ders.size(), 0.0));
    EXPECT_LT(s.max_mismatch, 1e-10);
    EXPECT_LT(unbalanced_mismatch(s, f, std::vector<double>(f.ders.size(), 0.0)), 1e-10);
}

TEST(Unbalanced, ValidationRejectsDerOnAbsentPhase) {
    UnbalancedFeeder f = four_bus();
    f.ders.push_back(UnbalancedDer{4, 0, 0.0, 0.01});
    EXPECT_THROW(validate_unbalanced(f), ValidationError);
    EXPECT_THROW(sweep_power_flow_3ph(f, std::vector<double>{0.0, 0.0}), ValidationError);
}

TEST(Unbalanced, JsonRoundTrip) {
    const auto f = unbalanced();
    const auto text = unbalanced_feeder_to_json(f);
    std::istringstream in(text);
    EXPECT_EQ(unbalanced_feeder_to_json(load_unbalanced_feeder(in)), text);
}

TEST(UnbalancedOpf, NoDersIsPlainLosses) {
    UnbalancedFeeder f = four_bus();
    f.ders.clear();
    EXPECT_NEAR(solve_area_opf_3ph(f).objective, sweep_power_flow_3ph(f, {}).objective, 1e-12);
}

TEST(UnbalancedOpf, BalancedDispatchIsSymmetric) {
    UnbalancedFeeder f = balanced();
    f.ders.resize(3);  // the three phases of the bus-3 inverter
    const auto s = solve_copf_3ph(f);
    ASSERT_EQ(s.status, OpfStatus::Optimal);
    EXPECT_NEAR(s.q_d[0], s.q_d[1], 1e-6);
    EXPECT_NEAR(s.q_d[0], s.q_d[2], 1e-6);
}

TEST(UnbalancedOpf, BalancedCentralEqualsSinglePhase) {
    const Feeder single = load_feeder_file(kDir + "six_bus.json");
    const auto c1 = solve_copf(single);
    const auto c3 = solve_copf_3ph(balanced());
    EXPECT_NEAR(c3.objective, 3.0 * c1.objective, 1e-9);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(c3.q_d[k], c1.q_d[0], 1e-6);
        EXPECT_NEAR(c3.q_d[3 + k], c1.q_d[1], 1e-6);
    }
}

TEST(UnbalancedOpf, SinglePhaseDerMatchesGrid) {
    const UnbalancedFeeder f = four_bus();
    const double h = std::sqrt(0.05 * 0.05 - 0.02 * 0.02);
    const auto grid = oracle::grid_opf(
        [&](const std::vector<double>& q) {
            const auto s = oracle::power_flow_3ph(f, q, 1e-14);
            for (std::size_t b = 1; b < f.buses.size(); ++b)
                for (int p = 0; p < 3; ++p)
                    if (has_phase(f.buses[b].phases, p) &&
                        (s.v_sq[b][p] < f.buses[b].v_min_sq || s.v_sq[b][p] > f.buses[b].v_max_sq))
                        return std::numeric_limits<double>::infinity();
            return oracle::losses_3ph(s, f);
        },
        {{-h, h}}, 1e-3, 1e-5);
    const auto s = solve_area_opf_3ph(f);
    ASSERT_EQ(s.status, OpfStatus::Optimal);
    EXPECT_NEAR(s.objective, grid.objective, 1e-6);
    EXPECT_LE(s.objective, grid.objective + 1e-10);
}

TEST(UnbalancedEnapp, SingleAreaEqualsCentral) {
    const auto f = unbalanced();
    const auto p = partition(f.skeleton(), single_area_spec(f.skeleton()));
    const auto r = run_enapp_3ph(f, p);
    const auto c = solve_copf_3ph(f);
    EXPECT_EQ(r.macro_iterations, 1);
    EXPECT_EQ(r.solution.q_d, c.q_d);
    EXPECT_EQ(r.solution.objective, c.objective);
}

TEST(UnbalancedEnapp, TwoAreaFixturesConverge) {
    for (const auto& [f, name] : {std::pair{balanced(), std::string("six_bus_partition.json")},
                                  std::pair{unbalanced(), std::string("three_phase_unbalanced_partition.json")}}) {
        const auto p = split(f, name);
        const auto r = run_enapp_3ph(f, p);
        EXPECT_TRUE(r.converged) << name;
        EXPECT_LE(r.macro_iterations, 4) << name;
        EXPECT_LT(r.solution.max_mismatch, 1e-9) << name;
        EXPECT_EQ(r.trace.labels.size(), 9u);
    }
}

TEST(UnbalancedEnapp, SequentialAgreesWithParallelOnBalancedFixture) {
    const auto f = balanced();
    const auto p = split(f, "six_bus_partition.json");
    UnbalancedEnappOptions o;
    o.sequential = true;
    const auto a = run_enapp_3ph(f, p);
    const auto b = run_enapp_3ph(f, p, o);
    EXPECT_TRUE(b.converged);
    EXPECT_NEAR(a.solution.objective, b.solution.objective, 1e-6);
}
