#include <gtest/gtest.h>

#include "enapp/admm.hpp"
#include "enapp/central_opf.hpp"

using namespace enapp;

namespace {

const std::string kSixBus = std::string(ENAPP_SOURCE_DIR) + "/feeders/six_bus.json";
const std::string kSixBusPartition = std::string(ENAPP_SOURCE_DIR) + "/feeders/six_bus_partition.json";

}  // namespace

TEST(RunAdmm, SingleAreaEqualsCentral) {
    const Feeder f = load_feeder_file(kSixBus);
    const auto p = partition(f, single_area_spec(f));
    const auto r = run_admm(f, p);
    const auto c = solve_copf(f);
    EXPECT_EQ(r.macro_iterations, 1);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.solution.q_d, c.q_d);
    EXPECT_EQ(r.solution.objective, c.objective);
}

TEST(RunAdmm, SixBusReachesCentralObjective) {
    const Feeder f = load_feeder_file(kSixBus);
    const auto p = partition(f, load_partition_spec_file(kSixBusPartition));
    AdmmState state;
    const auto r = run_admm(f, p, {}, &state);
    const auto c = solve_copf(f);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(std::abs(r.solution.objective - c.objective) / c.objective, 0.01);
    EXPECT_GT(r.macro_iterations, 1);
    EXPECT_EQ(static_cast<int>(r.trace.size()), r.macro_iterations);
    const auto& last = r.trace.records.back();
    EXPECT_LE(last.primal_residual, 1e-3);
    EXPECT_LE(last.dual_residual, 1e-3);
    ASSERT_EQ(state.boundaries.size(), 1u);
    for (std::size_t c2 = 0; c2 < 3; ++c2) {
        EXPECT_NEAR(state.boundaries[0].upstream_copy[c2], state.boundaries[0].z[c2], 1e-3);
        EXPECT_NEAR(state.boundaries[0].downstream_copy[c2], state.boundaries[0].z[c2], 1e-3);
    }
}

TEST(RunAdmm, PenaltyAndBalancingStillConverge) {
    const Feeder f = load_feeder_file(kSixBus);
    const auto p = partition(f, load_partition_spec_file(kSixBusPartition));
    const double target = solve_copf(f).objective;
    for (double rho : {0.1, 10.0}) {
        AdmmOptions o;
        o.rho = rho;
        const auto r = run_admm(f, p, o);
        EXPECT_TRUE(r.converged) << rho;
        EXPECT_NEAR(r.solution.objective, target, 0.01 * target) << rho;
    }
    AdmmOptions o;
    o.residual_balancing = true;
    AdmmState state;
    const auto r = run_admm(f, p, o, &state);
    EXPECT_TRUE(r.converged);
    EXPECT_GT(state.rho, 0.0);
}

TEST(RunAdmm, IterationCapIsReported) {
    const Feeder f = load_feeder_file(kSixBus);
    const auto p = partition(f, load_partition_spec_file(kSixBusPartition));
    AdmmOptions o;
    o.max_iter = 3;
    const auto r = run_admm(f, p, o);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.macro_iterations, 3);
}

TEST(RunAdmm, Deterministic) {
    const Feeder f = load_feeder_file(kSixBus);
    const auto p = partition(f, load_partition_spec_file(kSixBusPartition));
    AdmmOptions a;
    a.workers = 1;
    AdmmOptions b;
    b.workers = 3;
    const auto x = run_admm(f, p, a);
    const auto y = run_admm(f, p, b);
    EXPECT_EQ(x.macro_iterations, y.macro_iterations);
    EXPECT_EQ(x.solution.q_d, y.solution.q_d);
}
