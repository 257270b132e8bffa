#include "enapp/diagnostics.hpp"

#include <cmath>
#include <json.hpp>

#include "enapp/error.hpp"

namespace enapp {

double GammaReport::predicted_ratio_at(double v) const { return std::abs(gamma) / std::abs(v + gamma); }

GammaReport gamma_analysis(double v0, double r_u, double x_u, double r_d, double x_d, double p_l, double q_l) {
    GammaReport r;
    r.v0 = v0;
    r.r_u = r_u;
    r.x_u = x_u;
    r.r_d = r_d;
    r.x_d = x_d;
    r.p_l = p_l;
    r.q_l = q_l;
    r.z_u = std::hypot(r_u, x_u);
    r.z_d = std::hypot(r_d, x_d);
    r.s_l = std::hypot(p_l, q_l);
    const double zu2 = r.z_u * r.z_u;
    const double sl2 = r.s_l * r.s_l;

    r.c1 = v0 - 2.0 * (r_u * p_l + x_u * q_l) + zu2 * sl2 / v0;
    r.c2 = 2.0 * sl2 * (zu2 * (r_d * p_l + x_d * q_l) / v0 - (r_u * r_d + x_u * x_d));
    if (r.c1 == 0.0) {
        r.singular = true;
        r.warnings.push_back("C1 is zero; gamma undefined");
    } else {
        r.gamma = r.c2 / r.c1;
    }

    if (r.z_u > 0.1) r.warnings.push_back("upstream impedance above 0.1 pu");
    if (r.z_d > 0.1) r.warnings.push_back("downstream impedance above 0.1 pu");
    if (r.s_l > 1.0) r.warnings.push_back("aggregate load above 1 pu");
    if (v0 < 0.81 || v0 > 1.21) r.warnings.push_back("source voltage outside [0.9, 1.1] pu");
    return r;
}

FpiSequence fpi_sequence(const GammaReport& r, double v_init, int n) {
    if (!(v_init > 0.0)) throw ValidationError("fpi_sequence: v_init must be positive");
    FpiSequence s;
    s.v.push_back(v_init);
    for (int k = 0; k < n; ++k) {
        const double next = r.c1 + r.c2 / s.v.back();
        s.v.push_back(next);
        if (!(next > 0.0)) {
            s.nonpositive = true;
            break;
        }
    }
    for (std::size_t k = 0; k + 2 < s.v.size(); ++k) {
        const double d0 = s.v[k + 1] - s.v[k];
        if (d0 == 0.0) continue;
        s.ratios.push_back(std::abs(s.v[k + 2] - s.v[k + 1]) / std::abs(d0));
        s.predicted.push_back(r.predicted_ratio_at(s.v[k]));
    }
    return s;
}

double fpi_limit(const GammaReport& r) { return 0.5 * (r.c1 + std::sqrt(r.c1 * r.c1 + 4.0 * r.c2)); }

Lemma1Result lemma1_check(double v0, double r_u, double x_u, double p_u, double q_u) {
    Lemma1Result out;
    const double z2 = r_u * r_u + x_u * x_u;
    const double s2 = p_u * p_u + q_u * q_u;
    const double a = v0 - 2.0 * (r_u * p_u + x_u * q_u);
    out.approximate = s2 / a;
    // l satisfies l (a - z^2 l) = Su^2; the physical root is the smaller one.
    const double l = z2 == 0.0 ? s2 / a : 2.0 * s2 / (a + std::sqrt(a * a - 4.0 * z2 * s2));
    const double p0 = p_u + r_u * l;
    const double q0 = q_u + x_u * l;
    out.exact = (p0 * p0 + q0 * q0) / v0;
    out.relative_error = out.exact == 0.0 ? 0.0 : std::abs(out.approximate - out.exact) / out.exact;
    if (std::sqrt(z2) > 0.1) out.warnings.push_back("upstream impedance above 0.1 pu");
    if (std::sqrt(s2) > 1.0) out.warnings.push_back("load above 1 pu");
    return out;
}

TwoAreaReduction reduce_to_two_area(const Feeder& f, const AreaPartition& p, BoundaryId boundary) {
    if (boundary >= p.boundaries.size())
        throw ValidationError("boundary " + std::to_string(boundary) + " not found");
    const Boundary& b = p.boundary(boundary);
    const RadialIndex index(f);
    TwoAreaReduction t;
    t.v0 = f.v_root_sq;

    const std::size_t entry = index.position(b.downstream_bus);
    for (std::size_t l : index.path_lines(entry)) {
        t.r_u += f.lines[l].r;
        t.x_u += f.lines[l].x;
    }

    double weight = 0.0;
    const auto below = index.subtree(entry);
    std::vector<bool> inside(f.buses.size(), false);
    for (std::size_t c : below) inside[c] = true;
    for (std::size_t c : below) {
        const Bus& bus = f.buses[c];
        t.p_l += bus.load_p;
        t.q_l += bus.load_q;
        double r = 0.0, x = 0.0;
        for (std::size_t l : index.path_lines(c)) {
            if (!inside[index.line_to(l)] || index.line_to(l) == entry) continue;
            r += f.lines[l].r;
            x += f.lines[l].x;
        }
        const double w = std::hypot(bus.load_p, bus.load_q);
        t.r_d += w * r;
        t.x_d += w * x;
        weight += w;
    }
    if (weight > 0.0) {
        t.r_d /= weight;
        t.x_d /= weight;
    }
    for (const Der& d : f.ders) {
        if (inside[index.position(d.bus)]) t.p_l -= d.p_d;
    }
    return t;
}

std::string gamma_report_to_json(const GammaReport& r) {
    nlohmann::json j;
    j["v0"] = r.v0;
    j["r_u"] = r.r_u;
    j["x_u"] = r.x_u;
    j["r_d"] = r.r_d;
    j["x_d"] = r.x_d;
    j["z_u"] = r.z_u;
    j["z_d"] = r.z_d;
    j["p_l"] = r.p_l;
    j["q_l"] = r.q_l;
    j["s_l"] = r.s_l;
    j["c1"] = r.c1;
    j["c2"] = r.c2;
    j["gamma"] = r.gamma;
    j["singular"] = r.singular;
    j["predicted_ratio_at_1"] = r.predicted_ratio_at(1.0);
    j["warnings"] = r.warnings;
    return j.dump(2);
}

std::vector<double> tail_ratios(const std::vector<double>& eps) {
    std::vector<double> out;
    const std::size_t first = eps.size() >= 3 ? 1 : 0;
    for (std::size_t k = first; k + 1 < eps.size(); ++k) {
        if (eps[k] > 0.0) out.push_back(eps[k + 1] / eps[k]);
    }
    return out;
}

}  // namespace enapp
