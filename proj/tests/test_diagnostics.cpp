#include <gtest/gtest.h>

#include <random>

#include "enapp/coordinator.hpp"
#include "enapp/diagnostics.hpp"
#include "enapp/error.hpp"
#include "oracles.hpp"

using namespace enapp;

namespace {

const std::string kSixBus = std::string(ENAPP_SOURCE_DIR) + "/feeders/six_bus.json";
const std::string kSixBusPartition = std::string(ENAPP_SOURCE_DIR) + "/feeders/six_bus_partition.json";

// Evaluated by hand: C1 = 1 - 2(0.005 + 0.005) + 2e-4 * 0.5, C2 = 2 * 0.5 * (2e-4 * 0.01 - 2e-4).
constexpr double kGoldenC1 = 0.9801;
constexpr double kGoldenC2 = -0.000198;

}  // namespace

TEST(GammaAnalysis, NoDownstreamImpedance) {
    const auto g = gamma_analysis(1.0, 0.02, 0.04, 0.0, 0.0, 0.4, 0.2);
    EXPECT_EQ(g.c2, 0.0);
    EXPECT_EQ(g.gamma, 0.0);
    const auto seq = fpi_sequence(g, 1.0, 5);
    for (std::size_t k = 2; k < seq.v.size(); ++k) EXPECT_EQ(seq.v[k], seq.v[1]);
}

TEST(GammaAnalysis, GoldenValues) {
    const auto g = gamma_analysis(1.0, 0.01, 0.01, 0.01, 0.01, 0.5, 0.5);
    EXPECT_NEAR(g.c1, kGoldenC1, 1e-15);
    EXPECT_NEAR(g.c2, kGoldenC2, 1e-15);
    EXPECT_NEAR(g.gamma, kGoldenC2 / kGoldenC1, 1e-15);
    EXPECT_TRUE(g.warnings.empty());
    EXPECT_FALSE(g.singular);
}

TEST(GammaAnalysis, BoundedOnPracticalGrid) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
        const double v0 = 0.81 + 0.4 * u(rng);
        const double zu = 0.1 * u(rng), au = 1.5 * u(rng);
        const double zd = 0.1 * u(rng), ad = 1.5 * u(rng);
        const double s = u(rng), phi = 1.2 * u(rng);
        const auto g = gamma_analysis(v0, zu * std::cos(au), zu * std::sin(au), zd * std::cos(ad), zd * std::sin(ad),
                                      s * std::cos(phi), s * std::sin(phi));
        ASSERT_TRUE(g.warnings.empty());
        EXPECT_LE(std::abs(g.gamma), 0.1);
        ++checked;
    }
    EXPECT_EQ(checked, 10000);
}

TEST(GammaAnalysis, OutOfRegimeWarns) {
    EXPECT_FALSE(gamma_analysis(1.0, 0.2, 0.2, 0.01, 0.01, 0.5, 0.5).warnings.empty());
    EXPECT_FALSE(gamma_analysis(1.0, 0.01, 0.01, 0.01, 0.01, 2.0, 0.5).warnings.empty());
    EXPECT_FALSE(gamma_analysis(0.5, 0.01, 0.01, 0.01, 0.01, 0.5, 0.5).warnings.empty());
}

TEST(FpiSequence, RatiosFollowGamma) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const auto g = gamma_analysis(0.9 + 0.2 * u(rng), 0.07 * u(rng), 0.07 * u(rng), 0.07 * u(rng), 0.07 * u(rng),
                                      u(rng) * 0.7, u(rng) * 0.7);
        const auto seq = fpi_sequence(g, 1.0, 8);
        ASSERT_EQ(seq.ratios.size(), seq.predicted.size());
        int compared = 0;
        for (std::size_t k = 0; k < seq.ratios.size(); ++k) {
            const double independent = std::abs(g.gamma) / std::abs(seq.v[k] + g.gamma);
            EXPECT_NEAR(seq.predicted[k], independent, 1e-12);
            // below this step size the differences are dominated by rounding
            if (std::abs(seq.v[k + 1] - seq.v[k]) < 1e-5) continue;
            EXPECT_NEAR(seq.ratios[k], seq.predicted[k], 1e-10);
            ++compared;
        }
        EXPECT_GE(compared, 1);
    }
}

TEST(FpiSequence, LimitIsLargerQuadraticRoot) {
    const auto g = gamma_analysis(1.0, 0.03, 0.06, 0.02, 0.03, 0.6, 0.3);
    const double root = oracle::quadratic_root(g.c1, g.c2);
    EXPECT_NEAR(fpi_limit(g), root, 1e-14);
    const auto seq = fpi_sequence(g, 1.0, 40);
    EXPECT_NEAR(seq.v.back(), root, 1e-13);
    EXPECT_NEAR(root * root - g.c1 * root - g.c2, 0.0, 1e-15);
}

TEST(FpiSequence, RejectsNonPositiveStart) {
    const auto g = gamma_analysis(1.0, 0.01, 0.01, 0.01, 0.01, 0.5, 0.5);
    EXPECT_THROW(fpi_sequence(g, 0.0, 3), ValidationError);
}

TEST(Lemma1, ZeroImpedanceIsExact) {
    const auto r = lemma1_check(1.0, 0.0, 0.0, 0.5, 0.3);
    EXPECT_EQ(r.relative_error, 0.0);
}

TEST(Lemma1, SmallOnPracticalGrid) {
    double worst = 0.0;
    for (double v0 : {0.9, 1.0, 1.1})
        for (int zi = 1; zi <= 10; ++zi)
            for (int si = 1; si <= 10; ++si)
                for (double a : {0.3, 0.8, 1.2}) {
                    const double z = 0.0099 * zi, s = 0.099 * si;
                    const auto r = lemma1_check(v0, z * std::cos(a), z * std::sin(a), 0.9 * s, 0.43 * s);
                    EXPECT_TRUE(r.warnings.empty());
                    worst = std::max(worst, r.relative_error);
                }
    EXPECT_LT(worst, 0.05);
}

TEST(Lemma1, LargeImpedanceWarns) {
    EXPECT_FALSE(lemma1_check(1.0, 0.12, 0.16, 0.5, 0.2).warnings.empty());
}

TEST(ReduceToTwoArea, FirstLineBoundary) {
    Feeder f;
    f.root = 1;
    f.buses = {Bus{1}, Bus{2, 0.2, 0.1}};
    f.lines = {Line{1, 2, 0.02, 0.05}};
    PartitionSpec spec;
    spec.areas["A1"] = {1};
    spec.areas["A2"] = {2};
    const auto t = reduce_to_two_area(f, partition(f, spec), 0);
    EXPECT_EQ(t.r_u, 0.02);
    EXPECT_EQ(t.x_u, 0.05);
    EXPECT_EQ(t.r_d, 0.0);
    EXPECT_EQ(t.x_d, 0.0);
    EXPECT_EQ(t.p_l, 0.2);
    EXPECT_EQ(t.q_l, 0.1);
}

TEST(ReduceToTwoArea, SixBusByHand) {
    const Feeder f = load_feeder_file(kSixBus);
    const auto p = partition(f, load_partition_spec_file(kSixBusPartition));
    const auto t = reduce_to_two_area(f, p, 0);
    EXPECT_NEAR(t.r_u, 0.032, 1e-15);
    EXPECT_NEAR(t.x_u, 0.064, 1e-15);
    EXPECT_NEAR(t.p_l, 0.12 + 0.09 + 0.07 - 0.02, 1e-15);
    EXPECT_NEAR(t.q_l, 0.06 + 0.045 + 0.03, 1e-15);
    // |S|-weighted mean path impedance: bus 4 has zero path, bus 5 (0.015, 0.025), bus 6 (0.012, 0.020).
    const double s4 = std::hypot(0.12, 0.06), s5 = std::hypot(0.09, 0.045), s6 = std::hypot(0.07, 0.03);
    EXPECT_NEAR(t.r_d, (0.015 * s5 + 0.012 * s6) / (s4 + s5 + s6), 1e-15);
    EXPECT_NEAR(t.x_d, (0.025 * s5 + 0.020 * s6) / (s4 + s5 + s6), 1e-15);
    EXPECT_THROW(reduce_to_two_area(f, p, 3), ValidationError);
}

TEST(ReduceToTwoArea, PredictionBoundsObservedTail) {
    const Feeder f = load_feeder_file(kSixBus);
    const auto p = partition(f, load_partition_spec_file(kSixBusPartition));
    const auto g = gamma_analysis(reduce_to_two_area(f, p, 0));
    const auto r = run_enapp(f, p);
    std::vector<double> eps;
    for (const auto& rec : r.trace.records) eps.push_back(rec.epsilon);
    const auto tail = tail_ratios(eps);
    ASSERT_FALSE(tail.empty());
    const double predicted = g.predicted_ratio_at(r.boundaries.at(0).y1);
    for (double ratio : tail) EXPECT_LE(ratio, predicted + 0.15);
}

TEST(TailRatios, SkipsFirstStep) {
    EXPECT_EQ(tail_ratios({1.0, 0.1, 0.05, 0.025}), (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(tail_ratios({1.0, 0.1}), (std::vector<double>{0.1}));
    EXPECT_TRUE(tail_ratios({1.0}).empty());
}

TEST(GammaReport, JsonHasCoefficients) {
    const auto js = gamma_report_to_json(gamma_analysis(1.0, 0.01, 0.01, 0.01, 0.01, 0.5, 0.5));
    EXPECT_NE(js.find("\"c1\""), std::string::npos);
    EXPECT_NE(js.find("\"gamma\""), std::string::npos);
}
