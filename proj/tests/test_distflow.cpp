#include <gtest/gtest.h>

#include <random>

#include "enapp/distflow.hpp"
#include "enapp/error.hpp"
#include "oracles.hpp"

using namespace enapp;

namespace {

const std::string kSixBus = std::string(ENAPP_SOURCE_DIR) + "/feeders/six_bus.json";

// v_1^2 and l for v0 = 1, r = 0.01, x = 0.02, load (0.1, 0.05), from oracle::two_bus_v.
constexpr double kTwoBusV = 0.99599372486006288;
constexpr double kTwoBusL = 0.012550279874259445;

Feeder two_bus(double v0 = 1.0, double p = 0.1, double q = 0.05) {
    Feeder f;
    f.root = 1;
    f.v_root_sq = v0;
    f.buses = {Bus{1}, Bus{2, p, q}};
    f.lines = {Line{1, 2, 0.01, 0.02}};
    return f;
}

}  // namespace

TEST(SweepPowerFlow, NoLoadFlatProfile) {
    Feeder f = load_feeder_file(kSixBus);
    for (auto& b : f.buses) b.load_p = b.load_q = 0.0;
    for (auto& d : f.ders) d.p_d = 0.0;
    const auto s = sweep_power_flow(f, std::vector<double>(2, 0.0));
    EXPECT_EQ(s.iterations, 1);
    for (double v : s.v_sq) EXPECT_EQ(v, f.v_root_sq);
    for (std::size_t l = 0; l < f.lines.size(); ++l) {
        EXPECT_EQ(s.p_flow[l], 0.0);
        EXPECT_EQ(s.q_flow[l], 0.0);
        EXPECT_EQ(s.l_sq[l], 0.0);
    }
    EXPECT_EQ(total_losses(s, f), 0.0);
    EXPECT_TRUE(constraint_violations(s, f).empty());
}

TEST(SweepPowerFlow, TwoBusGolden) {
    const double oracle_v = oracle::two_bus_v(1.0, 0.01, 0.02, 0.1, 0.05);
    EXPECT_NEAR(oracle_v, kTwoBusV, 1e-15);
    const Feeder f = two_bus();
    const auto s = sweep_power_flow(f, {});
    EXPECT_NEAR(s.v_sq[1], kTwoBusV, 1e-12);
    EXPECT_NEAR(s.l_sq[0], kTwoBusL, 1e-12);
    EXPECT_NEAR(total_losses(s, f), 0.01 * kTwoBusL, 1e-14);
}

TEST(SweepPowerFlow, SixBusBalance) {
    const Feeder f = load_feeder_file(kSixBus);
    const auto s = sweep_power_flow(f, std::vector<double>(2, 0.0));
    EXPECT_LT(s.max_mismatch, 1e-10);
    double load = 0.0;
    for (const auto& b : f.buses) load += b.load_p;
    for (const auto& d : f.ders) load -= d.p_d;
    EXPECT_NEAR(s.source_p, load + total_losses(s, f), 1e-9);
}

TEST(SweepPowerFlow, MatchesJacobiOracle) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Feeder f = oracle::random_feeder(rng, 2, 10, 2);
        std::vector<double> q(f.ders.size());
        for (std::size_t k = 0; k < q.size(); ++k) q[k] = 0.01 * static_cast<double>(k + 1);
        const auto ref = oracle::power_flow(f, q);
        ASSERT_TRUE(ref.converged);
        const auto s = sweep_power_flow(f, q);
        for (std::size_t b = 0; b < f.buses.size(); ++b) EXPECT_NEAR(s.v_sq[b], ref.v_sq[b], 1e-10);
        for (std::size_t l = 0; l < f.lines.size(); ++l) {
            EXPECT_NEAR(s.p_flow[l], ref.p[l], 1e-10);
            EXPECT_NEAR(s.l_sq[l], ref.l[l], 1e-10);
        }
    }
}

TEST(SweepPowerFlow, ConservationIdentity) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Feeder f = oracle::random_feeder(rng, 2, 12, 3);
        const auto s = sweep_power_flow(f, std::vector<double>(f.ders.size(), 0.0));
        double net = 0.0;
        for (const auto& b : f.buses) net += b.load_p;
        for (const auto& d : f.ders) net -= d.p_d;
        EXPECT_NEAR(total_losses(s, f), s.source_p - net, 1e-9);
    }
}

TEST(SweepPowerFlow, ModelReuseMatchesFreeFunction) {
    const Feeder f = load_feeder_file(kSixBus);
    const PowerFlowModel model(f);
    const std::vector<double> q{0.01, -0.02};
    const auto a = model.run(q);
    const auto b = sweep_power_flow(f, q);
    EXPECT_EQ(a.v_sq, b.v_sq);
    EXPECT_EQ(a.l_sq, b.l_sq);
}

TEST(SweepPowerFlow, CollapseAndNonConvergence) {
    EXPECT_THROW(sweep_power_flow(two_bus(1.0, 20.0, 10.0), {}), ConvergenceError);
    EXPECT_THROW(sweep_power_flow(two_bus(), {}, 1e-16, 1), ConvergenceError);
    const auto s = PowerFlowModel(two_bus(1.0, 20.0, 10.0)).run({});
    EXPECT_FALSE(s.converged);
}

TEST(SweepPowerFlow, WrongDispatchLength) {
    const Feeder f = load_feeder_file(kSixBus);
    EXPECT_THROW(sweep_power_flow(f, std::vector<double>(1, 0.0)), Error);
}

TEST(TotalLosses, UnconvergedSolutionThrows) {
    PowerFlowSolution s;
    EXPECT_THROW(total_losses(s, two_bus()), Error);
}

TEST(ConstraintViolations, UpperBoundIsInclusive) {
    Feeder f = two_bus(1.05 * 1.05, 0.0, 0.0);
    const auto s = sweep_power_flow(f, {});
    EXPECT_TRUE(constraint_violations(s, f).empty());
}

TEST(ConstraintViolations, HeavyLoadNamesBus) {
    // Load sized with the oracle so bus 3 lands between 0.85 and 0.9 pu.
    Feeder f;
    f.root = 1;
    f.buses = {Bus{1}, Bus{2, 0.2, 0.1}, Bus{3, 0.5, 0.25}};
    f.lines = {Line{1, 2, 0.05, 0.1}, Line{2, 3, 0.05, 0.1}};
    const auto ref = oracle::power_flow(f, {});
    ASSERT_TRUE(ref.converged);
    ASSERT_LT(ref.v_sq[2], 0.81);
    ASSERT_GT(ref.v_sq[2], 0.85 * 0.85);
    const auto s = sweep_power_flow(f, {});
    const auto v = constraint_violations(s, f);
    ASSERT_FALSE(v.empty());
    bool named = false;
    for (const auto& x : v)
        if (x.kind == LimitViolation::Kind::Undervoltage && x.element.find('3') != std::string::npos) named = true;
    EXPECT_TRUE(named);
}

TEST(ConstraintViolations, ThermalLimit) {
    Feeder f = two_bus();
    f.lines[0].i_rated_sq = 0.01;
    const auto s = sweep_power_flow(f, {});
    const auto v = constraint_violations(s, f);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, LimitViolation::Kind::Thermal);
    EXPECT_NEAR(v[0].magnitude(), kTwoBusL - 0.01, 1e-12);
}

TEST(PowerFlowCsv, HasEveryBusAndLine) {
    const Feeder f = load_feeder_file(kSixBus);
    const auto csv = power_flow_csv(sweep_power_flow(f, std::vector<double>(2, 0.0)), f);
    std::size_t rows = 0;
    for (char c : csv) rows += c == '\n';
    EXPECT_GE(rows, f.buses.size() + f.lines.size());
}
