#pragma once

#include <string>
#include <vector>

#include "enapp/feeder.hpp"
#include "enapp/partition.hpp"

namespace enapp {

/// Two-branch equivalent of one boundary: stiff source v0, upstream impedance
/// z_u to the boundary bus, downstream impedance z_d to the lumped load S_L.
struct GammaReport {
    double v0 = 1.0;
    double r_u = 0.0, x_u = 0.0, r_d = 0.0, x_d = 0.0;
    double z_u = 0.0, z_d = 0.0;  // magnitudes
    double p_l = 0.0, q_l = 0.0, s_l = 0.0;
    double c1 = 0.0, c2 = 0.0, gamma = 0.0;
    bool singular = false;  // C1 == 0
    std::vector<std::string> warnings;

    /// |gamma| / |v + gamma|: contraction of successive boundary-voltage differences.
    double predicted_ratio_at(double v) const;
};

/// Parameters outside the practical regime (|z| > 0.1, S_L > 1, v0 outside
/// [0.81, 1.21]) produce warnings, never errors.
GammaReport gamma_analysis(double v0, double r_u, double x_u, double r_d, double x_d, double p_l, double q_l);

struct FpiSequence {
    std::vector<double> v;          // v[0] = v_init, v[k] = C1 + C2 / v[k-1]
    std::vector<double> ratios;     // |v[k+2]-v[k+1]| / |v[k+1]-v[k]|, nonzero denominators only
    std::vector<double> predicted;  // |gamma| / |v[k] + gamma| for the same k
    bool nonpositive = false;       // stopped at an iterate <= 0
};

/// Throws ValidationError when v_init <= 0.
FpiSequence fpi_sequence(const GammaReport& r, double v_init, int n);

/// Larger root of v^2 - C1 v - C2 = 0.
double fpi_limit(const GammaReport& r);

struct Lemma1Result {
    double exact = 0.0;        // (P0^2 + Q0^2) / v0 from the exact two-bus branch flow
    double approximate = 0.0;  // (Pu^2 + Qu^2) / (v0 - 2 (r_u Pu + x_u Qu))
    double relative_error = 0.0;
    std::vector<std::string> warnings;
};

Lemma1Result lemma1_check(double v0, double r_u, double x_u, double p_u, double q_u);

struct TwoAreaReduction {
    double v0 = 1.0;
    double r_u = 0.0, x_u = 0.0;  // series sum from the source to the boundary bus
    double r_d = 0.0, x_d = 0.0;  // load-weighted mean path impedance inside the downstream side
    double p_l = 0.0, q_l = 0.0;  // net load at and below the boundary bus
};

/// Throws ValidationError for an unknown boundary.
TwoAreaReduction reduce_to_two_area(const Feeder& f, const AreaPartition& p, BoundaryId boundary);

inline GammaReport gamma_analysis(const TwoAreaReduction& t) {
    return gamma_analysis(t.v0, t.r_u, t.x_u, t.r_d, t.x_d, t.p_l, t.q_l);
}

std::string gamma_report_to_json(const GammaReport& r);

/// Ratios eps[k+1] / eps[k] after the first macro-iteration (the first step
/// off the flat start is excluded when at least three residuals exist).
std::vector<double> tail_ratios(const std::vector<double>& eps);

}  // namespace enapp
