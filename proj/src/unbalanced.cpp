#include "enapp/unbalanced.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "enapp/error.hpp"
#include "enapp/parallel.hpp"

namespace enapp {

using nlohmann::json;
using cplx = std::complex<double>;

namespace {

constexpr std::array<double, 3> kAngle{0.0, -2.0 * std::numbers::pi / 3.0, 2.0 * std::numbers::pi / 3.0};

cplx unit(double a) { return std::polar(1.0, a); }

cplx z_of(const UnbalancedLine& l, int p, int q) { return {l.r[p][q], l.x[p][q]}; }

PhaseSet parse_phases(const std::string& s, const std::string& where) {
    PhaseSet out = 0;
    for (char c : s) {
        if (c == 'a' || c == 'A') out |= kPhaseA;
        else if (c == 'b' || c == 'B') out |= kPhaseB;
        else if (c == 'c' || c == 'C') out |= kPhaseC;
        else throw ParseError(where + ": unknown phase '" + std::string(1, c) + "'");
    }
    if (!out) throw ParseError(where + ": empty phase set");
    return out;
}

PhaseArray phase_array(const json& obj, const char* key, const std::string& where) {
    PhaseArray a{};
    const auto it = obj.find(key);
    if (it == obj.end()) return a;
    if (!it->is_array() || it->size() != 3) throw ParseError(where + ": '" + key + "' must hold 3 numbers");
    for (std::size_t p = 0; p < 3; ++p) {
        if (!(*it)[p].is_number()) throw ParseError(where + ": '" + key + "' must hold 3 numbers");
        a[p] = (*it)[p].get<double>();
    }
    return a;
}

PhaseMatrix phase_matrix(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_array() || it->size() != 3)
        throw ParseError(where + ": '" + key + "' must be a 3x3 matrix");
    PhaseMatrix m{};
    for (std::size_t p = 0; p < 3; ++p) {
        const json& row = (*it)[p];
        if (!row.is_array() || row.size() != 3) throw ParseError(where + ": '" + key + "' must be a 3x3 matrix");
        for (std::size_t q = 0; q < 3; ++q) {
            if (!row[q].is_number()) throw ParseError(where + ": '" + key + "' must be a 3x3 matrix");
            m[p][q] = row[q].get<double>();
        }
    }
    return m;
}

double number(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) throw ParseError(where + ": missing number '" + key + "'");
    return it->get<double>();
}

}  // namespace

std::string phase_string(PhaseSet s) {
    std::string out;
    for (int p = 0; p < 3; ++p)
        if (has_phase(s, p)) out += static_cast<char>('a' + p);
    return out;
}

const UnbalancedBus& UnbalancedFeeder::bus(BusId id) const {
    for (const auto& b : buses)
        if (b.id == id) return b;
    throw ValidationError("unknown bus " + std::to_string(id));
}

Feeder UnbalancedFeeder::skeleton() const {
    Feeder f;
    f.root = root;
    f.v_root_sq = v_root_sq[0];
    f.base_mva = base_mva;
    f.base_kv = base_kv;
    for (const auto& b : buses) {
        Bus s;
        s.id = b.id;
        s.v_min_sq = b.v_min_sq;
        s.v_max_sq = b.v_max_sq;
        for (int p = 0; p < 3; ++p) {
            s.load_p += b.load_p[static_cast<std::size_t>(p)];
            s.load_q += b.load_q[static_cast<std::size_t>(p)] - b.cap_q[static_cast<std::size_t>(p)];
        }
        f.buses.push_back(s);
    }
    for (const auto& l : lines) {
        Line s;
        s.from = l.from;
        s.to = l.to;
        s.r = s.x = 0.0;
        for (int p = 0; p < 3; ++p) {
            s.r = std::max(s.r, l.r[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)]);
            s.x = std::max(s.x, l.x[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)]);
        }
        f.lines.push_back(s);
    }
    return f;
}

void validate_unbalanced(const UnbalancedFeeder& f) {
    const Feeder sk = f.skeleton();
    const auto report = validate_radial(sk);
    if (!report.ok()) throw ValidationError("unbalanced feeder: " + report.summary());
    std::map<BusId, PhaseSet> phases;
    for (const auto& b : f.buses) {
        if (b.phases == 0 || b.phases > kPhaseABC)
            throw ValidationError("bus " + std::to_string(b.id) + ": invalid phase set");
        for (int p = 0; p < 3; ++p) {
            const auto i = static_cast<std::size_t>(p);
            const bool finite = std::isfinite(b.load_p[i]) && std::isfinite(b.load_q[i]) && std::isfinite(b.cap_q[i]);
            if (!finite) throw ValidationError("bus " + std::to_string(b.id) + ": non-finite load");
            if (!has_phase(b.phases, p) && (b.load_p[i] != 0.0 || b.load_q[i] != 0.0 || b.cap_q[i] != 0.0))
                throw ValidationError("bus " + std::to_string(b.id) + ": load on absent phase");
        }
        phases[b.id] = b.phases;
    }
    if (phases.at(f.root) != kPhaseABC) throw ValidationError("root bus must carry all three phases");
    for (const auto& l : f.lines) {
        const PhaseSet child = phases.at(l.to);
        if ((child & phases.at(l.from)) != child)
            throw ValidationError("line " + std::to_string(l.from) + "->" + std::to_string(l.to) +
                                  ": child phases not a subset of parent phases");
        for (int p = 0; p < 3; ++p) {
            if (!has_phase(child, p)) continue;
            const auto i = static_cast<std::size_t>(p);
            if (!(l.r[i][i] > 0.0) || !(l.x[i][i] >= 0.0))
                throw ValidationError("line " + std::to_string(l.from) + "->" + std::to_string(l.to) +
                                      ": invalid self impedance on phase " + phase_string(1U << p));
            for (int q = 0; q < 3; ++q) {
                const auto j = static_cast<std::size_t>(q);
                if (!std::isfinite(l.r[i][j]) || !std::isfinite(l.x[i][j]))
                    throw ValidationError("line impedance not finite");
            }
        }
    }
    for (const auto& d : f.ders) {
        if (d.phase < 0 || d.phase > 2 || !phases.count(d.bus) || !has_phase(phases.at(d.bus), d.phase))
            throw ValidationError("DER at bus " + std::to_string(d.bus) + ": phase absent");
        der_q_bounds(Der{d.bus, d.p_d, d.s_rating});
    }
}

UnbalancedFeeder load_unbalanced_feeder(std::istream& in) {
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(std::string("feeder: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("feeder: top level must be an object");
    if (!doc.contains("base_mva")) throw UnitError("feeder: missing base_mva");
    UnbalancedFeeder f;
    f.base_mva = number(doc, "base_mva", "feeder");
    if (!(f.base_mva > 0.0)) throw UnitError("feeder: base_mva must be positive");
    if (doc.contains("base_kv")) f.base_kv = number(doc, "base_kv", "feeder");
    if (!doc.contains("root") || !doc["root"].is_number_integer()) throw ParseError("feeder: missing root");
    f.root = doc["root"].get<int>();
    if (doc.contains("v_root_sq")) {
        if (doc["v_root_sq"].is_number()) f.v_root_sq.fill(doc["v_root_sq"].get<double>());
        else f.v_root_sq = phase_array(doc, "v_root_sq", "feeder");
    }
    for (const json& b : doc.value("buses", json::array())) {
        UnbalancedBus bus;
        bus.id = b.at("id").get<int>();
        const std::string where = "bus " + std::to_string(bus.id);
        bus.phases = parse_phases(b.value("phases", std::string("abc")), where);
        bus.load_p = phase_array(b, "p_load", where);
        bus.load_q = phase_array(b, "q_load", where);
        bus.cap_q = phase_array(b, "q_cap", where);
        if (b.contains("v_min")) bus.v_min_sq = std::pow(number(b, "v_min", where), 2);
        if (b.contains("v_max")) bus.v_max_sq = std::pow(number(b, "v_max", where), 2);
        f.buses.push_back(bus);
    }
    for (const json& l : doc.value("lines", json::array())) {
        UnbalancedLine line;
        line.from = l.at("from").get<int>();
        line.to = l.at("to").get<int>();
        const std::string where = "line " + std::to_string(line.from) + "->" + std::to_string(line.to);
        line.r = phase_matrix(l, "r", where);
        line.x = phase_matrix(l, "x", where);
        if (l.contains("i_rated")) line.i_rated_sq = std::pow(number(l, "i_rated", where), 2);
        f.lines.push_back(line);
    }
    for (const json& d : doc.value("ders", json::array())) {
        UnbalancedDer der;
        der.bus = d.at("bus").get<int>();
        const std::string where = "DER at bus " + std::to_string(der.bus);
        const PhaseSet ph = parse_phases(d.value("phase", std::string("a")), where);
        if (ph != kPhaseA && ph != kPhaseB && ph != kPhaseC) throw ParseError(where + ": one phase per DER entry");
        der.phase = ph == kPhaseA ? 0 : ph == kPhaseB ? 1 : 2;
        der.p_d = number(d, "p_d", where);
        der.s_rating = number(d, "s_rating", where);
        f.ders.push_back(der);
    }
    validate_unbalanced(f);
    return f;
}

UnbalancedFeeder load_unbalanced_feeder_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open feeder file '" + path + "'");
    return load_unbalanced_feeder(in);
}

std::string unbalanced_feeder_to_json(const UnbalancedFeeder& f) {
    json doc;
    doc["base_mva"] = f.base_mva;
    doc["base_kv"] = f.base_kv;
    doc["root"] = f.root;
    doc["v_root_sq"] = f.v_root_sq;
    json buses = json::array();
    for (const auto& b : f.buses) {
        buses.push_back({{"id", b.id},
                         {"phases", phase_string(b.phases)},
                         {"p_load", b.load_p},
                         {"q_load", b.load_q},
                         {"q_cap", b.cap_q},
                         {"v_min", std::sqrt(b.v_min_sq)},
                         {"v_max", std::sqrt(b.v_max_sq)}});
    }
    json lines = json::array();
    for (const auto& l : f.lines) {
        json jl{{"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}};
        if (std::isfinite(l.i_rated_sq)) jl["i_rated"] = std::sqrt(l.i_rated_sq);
        lines.push_back(std::move(jl));
    }
    json ders = json::array();
    for (const auto& d : f.ders)
        ders.push_back({{"bus", d.bus}, {"phase", phase_string(1U << d.phase)}, {"p_d", d.p_d}, {"s_rating", d.s_rating}});
    doc["buses"] = std::move(buses);
    doc["lines"] = std::move(lines);
    doc["ders"] = std::move(ders);
    return doc.dump(2) + "\n";
}

UnbalancedFeeder balanced_from_single_phase(const Feeder& f) {
    UnbalancedFeeder u;
    u.root = f.root;
    u.v_root_sq.fill(f.v_root_sq);
    u.base_mva = f.base_mva;
    u.base_kv = f.base_kv;
    for (const Bus& b : f.buses) {
        UnbalancedBus ub;
        ub.id = b.id;
        ub.load_p.fill(b.load_p);
        ub.load_q.fill(b.load_q);
        ub.v_min_sq = b.v_min_sq;
        ub.v_max_sq = b.v_max_sq;
        u.buses.push_back(ub);
    }
    for (const Line& l : f.lines) {
        UnbalancedLine ul;
        ul.from = l.from;
        ul.to = l.to;
        for (std::size_t p = 0; p < 3; ++p) {
            ul.r[p][p] = l.r;
            ul.x[p][p] = l.x;
        }
        ul.i_rated_sq = l.i_rated_sq;
        u.lines.push_back(ul);
    }
    for (const Der& d : f.ders)
        for (int p = 0; p < 3; ++p) u.ders.push_back(UnbalancedDer{d.bus, p, d.p_d, d.s_rating});
    return u;
}

UnbalancedModel::UnbalancedModel(const UnbalancedFeeder& f) : feeder_(f), index_(f.skeleton()) {
    validate_unbalanced(f);
}

namespace {

// Net per-phase demand at each bus position.
void net_injections(const UnbalancedFeeder& f, const RadialIndex& index, std::span<const double> q_d,
                    std::vector<PhaseArray>& p_net, std::vector<PhaseArray>& q_net) {
    if (q_d.size() != f.ders.size())
        throw Error("power flow: expected " + std::to_string(f.ders.size()) + " DER setpoints, got " +
                    std::to_string(q_d.size()));
    const std::size_t nb = f.buses.size();
    p_net.assign(nb, PhaseArray{});
    q_net.assign(nb, PhaseArray{});
    for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t p = 0; p < 3; ++p) {
            p_net[b][p] = f.buses[b].load_p[p];
            q_net[b][p] = f.buses[b].load_q[p] - f.buses[b].cap_q[p];
        }
    }
    for (std::size_t k = 0; k < f.ders.size(); ++k) {
        const std::size_t b = index.position(f.ders[k].bus);
        const auto p = static_cast<std::size_t>(f.ders[k].phase);
        p_net[b][p] -= f.ders[k].p_d;
        q_net[b][p] -= q_d[k];
    }
}

// Complex series loss of phase p: sum_q z^{pq} I^q conj(I^p) at nominal angles.
cplx phase_loss(const UnbalancedLine& line, PhaseSet ph, const PhaseArray& l, int p) {
    cplx s{};
    for (int q = 0; q < 3; ++q) {
        if (!has_phase(ph, q)) continue;
        const double mag = std::sqrt(l[static_cast<std::size_t>(q)] * l[static_cast<std::size_t>(p)]);
        s += z_of(line, p, q) * mag * unit(kAngle[static_cast<std::size_t>(q)] - kAngle[static_cast<std::size_t>(p)]);
    }
    return s;
}

// Receiving-end squared voltage of phase p.
double phase_voltage(const UnbalancedLine& line, PhaseSet ph, const PhaseArray& v_from, const PhaseArray& p_flow,
                     const PhaseArray& q_flow, const PhaseArray& l, int p) {
    const auto pi = static_cast<std::size_t>(p);
    double drop = 0.0;
    cplx zi{};
    for (int q = 0; q < 3; ++q) {
        if (!has_phase(ph, q)) continue;
        const auto qi = static_cast<std::size_t>(q);
        // S^{pq} = V_i^p conj(I^q) = S^{qq} sqrt(v^p / v^q) at the nominal angle offset.
        const cplx s_pq = cplx(p_flow[qi], q_flow[qi]) * std::sqrt(v_from[pi] / v_from[qi]) *
                          unit(kAngle[pi] - kAngle[qi]);
        drop += 2.0 * (s_pq * std::conj(z_of(line, p, q))).real();
        zi += z_of(line, p, q) * std::sqrt(l[qi]) * unit(kAngle[qi]);
    }
    return v_from[pi] - drop + std::norm(zi);
}

}  // namespace

UnbalancedSolution UnbalancedModel::run(std::span<const double> q_d, double tol, int max_iter) const {
    const auto& f = feeder_;
    const std::size_t nb = f.buses.size(), nl = f.lines.size();
    std::vector<PhaseArray> p_net, q_net;
    net_injections(f, index_, q_d, p_net, q_net);

    UnbalancedSolution s;
    s.q_d.assign(q_d.begin(), q_d.end());
    s.v_sq.assign(nb, f.v_root_sq);
    s.p_flow.assign(nl, PhaseArray{});
    s.q_flow.assign(nl, PhaseArray{});
    s.l_sq.assign(nl, PhaseArray{});
    const auto& order = index_.order();

    for (int it = 1; it <= max_iter; ++it) {
        s.iterations = it;
        for (auto b = order.rbegin(); b != order.rend(); ++b) {
            const std::size_t line = index_.parent_line(*b);
            if (line == RadialIndex::npos) continue;
            const PhaseSet ph = f.buses[*b].phases;
            for (int p = 0; p < 3; ++p) {
                const auto pi = static_cast<std::size_t>(p);
                if (!has_phase(ph, p)) continue;
                const cplx loss = phase_loss(f.lines[line], ph, s.l_sq[line], p);
                double pp = p_net[*b][pi] + loss.real(), qq = q_net[*b][pi] + loss.imag();
                for (std::size_t c : index_.child_lines(*b)) {
                    pp += s.p_flow[c][pi];
                    qq += s.q_flow[c][pi];
                }
                s.p_flow[line][pi] = pp;
                s.q_flow[line][pi] = qq;
            }
        }
        double change = 0.0;
        bool collapsed = false;
        for (std::size_t b : order) {
            const std::size_t line = index_.parent_line(b);
            if (line == RadialIndex::npos) continue;
            const std::size_t from = index_.line_from(line);
            const PhaseSet ph = f.buses[b].phases;
            PhaseArray l_new{};
            for (int p = 0; p < 3; ++p) {
                const auto pi = static_cast<std::size_t>(p);
                if (!has_phase(ph, p)) continue;
                const double v = phase_voltage(f.lines[line], ph, s.v_sq[from], s.p_flow[line], s.q_flow[line],
                                               s.l_sq[line], p);
                if (!(v > 0.0)) collapsed = true;
                change = std::max(change, std::abs(v - s.v_sq[b][pi]));
                s.v_sq[b][pi] = v;
                l_new[pi] = (s.p_flow[line][pi] * s.p_flow[line][pi] + s.q_flow[line][pi] * s.q_flow[line][pi]) /
                            s.v_sq[from][pi];
                change = std::max(change, std::abs(l_new[pi] - s.l_sq[line][pi]));
            }
            s.l_sq[line] = l_new;
        }
        if (collapsed || !std::isfinite(change)) break;
        if (change <= tol) {
            s.converged = true;
            break;
        }
    }
    if (s.converged) {
        // Refresh flows with the final currents so the balance equations close.
        for (auto b = order.rbegin(); b != order.rend(); ++b) {
            const std::size_t line = index_.parent_line(*b);
            if (line == RadialIndex::npos) continue;
            const PhaseSet ph = f.buses[*b].phases;
            for (int p = 0; p < 3; ++p) {
                const auto pi = static_cast<std::size_t>(p);
                if (!has_phase(ph, p)) continue;
                const cplx loss = phase_loss(f.lines[line], ph, s.l_sq[line], p);
                double pp = p_net[*b][pi] + loss.real(), qq = q_net[*b][pi] + loss.imag();
                for (std::size_t c : index_.child_lines(*b)) {
                    pp += s.p_flow[c][pi];
                    qq += s.q_flow[c][pi];
                }
                s.p_flow[line][pi] = pp;
                s.q_flow[line][pi] = qq;
            }
        }
        const std::size_t root = index_.root();
        for (std::size_t p = 0; p < 3; ++p) {
            s.source_p[p] = p_net[root][p];
            s.source_q[p] = q_net[root][p];
            for (std::size_t c : index_.child_lines(root)) {
                s.source_p[p] += s.p_flow[c][p];
                s.source_q[p] += s.q_flow[c][p];
            }
        }
        for (std::size_t l = 0; l < nl; ++l)
            for (std::size_t p = 0; p < 3; ++p) s.objective += f.lines[l].r[p][p] * s.l_sq[l][p];
        s.max_mismatch = unbalanced_mismatch(s, f, q_d);
    }
    return s;
}

double unbalanced_mismatch(const UnbalancedSolution& s, const UnbalancedFeeder& f, std::span<const double> q_d) {
    const RadialIndex index(f.skeleton());
    std::vector<PhaseArray> p_net, q_net;
    net_injections(f, index, q_d, p_net, q_net);
    double worst = 0.0;
    for (std::size_t line = 0; line < f.lines.size(); ++line) {
        const std::size_t j = index.line_to(line), i = index.line_from(line);
        const PhaseSet ph = f.buses[j].phases;
        for (int p = 0; p < 3; ++p) {
            if (!has_phase(ph, p)) continue;
            const auto pi = static_cast<std::size_t>(p);
            const cplx loss = phase_loss(f.lines[line], ph, s.l_sq[line], p);
            double rp = s.p_flow[line][pi] - loss.real() - p_net[j][pi];
            double rq = s.q_flow[line][pi] - loss.imag() - q_net[j][pi];
            for (std::size_t c : index.child_lines(j)) {
                rp -= s.p_flow[c][pi];
                rq -= s.q_flow[c][pi];
            }
            const double rv = s.v_sq[j][pi] - phase_voltage(f.lines[line], ph, s.v_sq[i], s.p_flow[line],
                                                            s.q_flow[line], s.l_sq[line], p);
            const double rl = s.v_sq[i][pi] * s.l_sq[line][pi] -
                              (s.p_flow[line][pi] * s.p_flow[line][pi] + s.q_flow[line][pi] * s.q_flow[line][pi]);
            worst = std::max({worst, std::abs(rp), std::abs(rq), std::abs(rv), std::abs(rl)});
        }
    }
    return worst;
}

UnbalancedSolution sweep_power_flow_3ph(const UnbalancedFeeder& f, std::span<const double> q_d, double tol,
                                        int max_iter) {
    auto s = UnbalancedModel(f).run(q_d, tol, max_iter);
    if (!s.converged) throw ConvergenceError("three-phase power flow did not converge");
    return s;
}

namespace {

void slacks_3ph(const UnbalancedSolution& s, const UnbalancedFeeder& f, const RadialIndex& index,
                std::vector<double>& out) {
    out.clear();
    for (std::size_t b = 0; b < f.buses.size(); ++b) {
        if (b == index.root()) continue;
        for (int p = 0; p < 3; ++p) {
            if (!has_phase(f.buses[b].phases, p)) continue;
            const double v = s.v_sq[b][static_cast<std::size_t>(p)];
            out.push_back(v - f.buses[b].v_min_sq);
            out.push_back(f.buses[b].v_max_sq - v);
        }
    }
    for (std::size_t l = 0; l < f.lines.size(); ++l) {
        if (!std::isfinite(f.lines[l].i_rated_sq)) continue;
        const PhaseSet ph = f.buses[index.line_to(l)].phases;
        for (int p = 0; p < 3; ++p)
            if (has_phase(ph, p)) out.push_back(f.lines[l].i_rated_sq - s.l_sq[l][static_cast<std::size_t>(p)]);
    }
}

}  // namespace

UnbalancedSolution solve_area_opf_3ph(const UnbalancedFeeder& area, const OpfOptions& opts) {
    const UnbalancedModel model(area);
    const std::size_t n = area.ders.size();
    std::vector<double> lo(n), hi(n), x0(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const auto qb = der_q_bounds(Der{area.ders[k].bus, area.ders[k].p_d, area.ders[k].s_rating});
        lo[k] = qb.lo;
        hi[k] = qb.hi;
    }
    if (opts.q_init && opts.q_init->size() == n) x0 = *opts.q_init;

    UnbalancedSolution out;
    if (n == 0) {
        out = model.run(x0, opts.pf_tol, opts.pf_max_iter);
    } else {
        optim::ConstrainedProblem problem;
        problem.lo = lo;
        problem.hi = hi;
        problem.evaluate = [&](std::span<const double> q, std::vector<double>& slacks) {
            const auto s = model.run(q, opts.pf_tol, opts.pf_max_iter);
            if (!s.converged) return std::numeric_limits<double>::infinity();
            slacks_3ph(s, area, model.index(), slacks);
            return s.objective;
        };
        const auto r = optim::solve_barrier(problem, x0, barrier_options(opts));
        out = model.run(r.x, opts.pf_tol, opts.pf_max_iter);
        out.kkt_residual = r.kkt_residual;
        out.status = r.status == optim::BarrierStatus::Optimal   ? OpfStatus::Optimal
                     : r.status == optim::BarrierStatus::MaxIter ? OpfStatus::MaxIter
                                                                 : OpfStatus::Infeasible;
    }
    if (!out.converged) throw ConvergenceError("three-phase area OPF: power flow diverged");
    std::vector<double> slacks;
    slacks_3ph(out, area, model.index(), slacks);
    for (double s : slacks)
        if (s < -opts.constraint_tol) out.status = OpfStatus::Infeasible;
    return out;
}

std::string unbalanced_solution_to_json(const UnbalancedSolution& s, const UnbalancedFeeder& f) {
    json doc;
    doc["objective_pu"] = s.objective;
    doc["objective_kw"] = s.objective * f.base_mva * 1000.0;
    doc["converged"] = s.converged;
    doc["status"] = to_string(s.status);
    doc["max_mismatch"] = s.max_mismatch;
    json buses = json::array();
    for (std::size_t b = 0; b < f.buses.size(); ++b)
        buses.push_back({{"id", f.buses[b].id}, {"phases", phase_string(f.buses[b].phases)}, {"v_sq", s.v_sq[b]}});
    json lines = json::array();
    for (std::size_t l = 0; l < f.lines.size(); ++l)
        lines.push_back({{"from", f.lines[l].from},
                         {"to", f.lines[l].to},
                         {"p", s.p_flow[l]},
                         {"q", s.q_flow[l]},
                         {"l_sq", s.l_sq[l]}});
    json ders = json::array();
    for (std::size_t k = 0; k < f.ders.size() && k < s.q_d.size(); ++k)
        ders.push_back({{"bus", f.ders[k].bus}, {"phase", phase_string(1U << f.ders[k].phase)}, {"q_d", s.q_d[k]}});
    doc["buses"] = std::move(buses);
    doc["lines"] = std::move(lines);
    doc["ders"] = std::move(ders);
    return doc.dump(2) + "\n";
}

UnbalancedAreaFeeder build_area_3ph(const AreaPartition& p, const UnbalancedFeeder& f, const AreaId& area,
                                    const UnbalancedBoundaryTable& table) {
    const auto area_it = p.areas.find(area);
    if (area_it == p.areas.end()) throw ValidationError("unknown area " + area);
    const std::set<BusId> members(area_it->second.begin(), area_it->second.end());
    auto lookup = [&](BoundaryId id) -> const UnbalancedBoundaryState& {
        const auto it = table.find(id);
        if (it == table.end())
            throw ValidationError("missing boundary value for dummy bus " + std::to_string(p.boundaries.at(id).dummy_bus));
        return it->second;
    };

    UnbalancedAreaFeeder out;
    out.area = area;
    out.upstream = p.upstream_boundary(area);
    out.downstream = p.downstream_boundaries(area);
    UnbalancedFeeder& sub = out.feeder;
    sub.base_mva = f.base_mva;
    sub.base_kv = f.base_kv;
    BusId rename_from = f.root, rename_to = f.root;
    if (out.upstream) {
        const Boundary& ub = p.boundary(*out.upstream);
        rename_from = ub.downstream_bus;
        rename_to = ub.dummy_bus;
        sub.root = ub.dummy_bus;
        sub.v_root_sq = lookup(ub.id).y1;
    } else {
        sub.root = f.root;
        sub.v_root_sq = f.v_root_sq;
    }
    auto renamed = [&](BusId id) { return id == rename_from ? rename_to : id; };

    for (const auto& b : f.buses) {
        if (!members.count(b.id)) continue;
        UnbalancedBus copy = b;
        copy.id = renamed(b.id);
        sub.buses.push_back(copy);
    }
    // A downstream area rooted at a partial-phase bus still needs a three-phase source.
    if (out.upstream) {
        for (auto& b : sub.buses)
            if (b.id == sub.root) b.phases = kPhaseABC;
    }
    for (const auto& l : f.lines) {
        if (members.count(l.from) && members.count(l.to)) {
            UnbalancedLine copy = l;
            copy.from = renamed(l.from);
            copy.to = renamed(l.to);
            sub.lines.push_back(copy);
        }
    }
    for (std::size_t k = 0; k < f.ders.size(); ++k) {
        const auto& d = f.ders[k];
        if (members.count(d.bus) && !(out.upstream && d.bus == rename_from)) {
            sub.ders.push_back(d);
            out.der_index.push_back(k);
        }
    }
    for (BoundaryId id : out.downstream) {
        const Boundary& bd = p.boundary(id);
        const auto& state = lookup(id);
        const UnbalancedBus& original = f.bus(bd.downstream_bus);
        UnbalancedBus dummy;
        dummy.id = bd.dummy_bus;
        dummy.phases = original.phases;
        for (std::size_t ph = 0; ph < 3; ++ph) {
            if (!has_phase(original.phases, static_cast<int>(ph))) continue;
            dummy.load_p[ph] = state.y2_p[ph];
            dummy.load_q[ph] = state.y2_q[ph];
        }
        dummy.v_min_sq = original.v_min_sq;
        dummy.v_max_sq = original.v_max_sq;
        sub.buses.push_back(dummy);
        UnbalancedLine line = f.lines[bd.line];
        line.from = renamed(line.from);
        line.to = bd.dummy_bus;
        sub.lines.push_back(line);
        for (std::size_t k = 0; k < f.ders.size(); ++k) {
            if (f.ders[k].bus == bd.downstream_bus) {
                UnbalancedDer d = f.ders[k];
                d.bus = bd.dummy_bus;
                sub.ders.push_back(d);
                out.der_index.push_back(k);
            }
        }
    }
    return out;
}

UnbalancedBoundaryTable flat_start_3ph(const AreaPartition& p, const UnbalancedFeeder& f) {
    const RadialIndex index(f.skeleton());
    UnbalancedBoundaryTable table;
    for (const Boundary& bd : p.boundaries) {
        UnbalancedBoundaryState st;
        st.y1 = f.v_root_sq;
        std::set<BusId> ids;
        for (std::size_t b : index.subtree(index.position(bd.downstream_bus))) {
            ids.insert(f.buses[b].id);
            for (std::size_t ph = 0; ph < 3; ++ph) {
                st.y2_p[ph] += f.buses[b].load_p[ph];
                st.y2_q[ph] += f.buses[b].load_q[ph] - f.buses[b].cap_q[ph];
            }
        }
        for (const auto& d : f.ders)
            if (ids.count(d.bus) && d.bus != bd.downstream_bus) st.y2_p[static_cast<std::size_t>(d.phase)] -= d.p_d;
        table[bd.id] = st;
    }
    return table;
}

UnbalancedDopfResult run_enapp_3ph(const UnbalancedFeeder& f, const AreaPartition& p,
                                   const UnbalancedEnappOptions& opts, Transport* transport) {
    QueueTransport own;
    Transport& channel = transport ? *transport : own;
    ExchangeLayout layout;
    layout.order = p.topological_order();
    layout.boundaries = p.boundaries;
    layout.y1_width = 3;
    layout.y2_width = 6;
    layout.labels = {"y1_a", "y1_b", "y1_c", "y2_p_a", "y2_p_b", "y2_p_c", "y2_q_a", "y2_q_b", "y2_q_c"};

    auto to_table = [](const SharedValues& v) {
        UnbalancedBoundaryTable t;
        for (std::size_t b = 0; b < v.size(); ++b) {
            UnbalancedBoundaryState st;
            for (std::size_t ph = 0; ph < 3; ++ph) {
                st.y1[ph] = v[b][ph];
                st.y2_p[ph] = v[b][3 + ph];
                st.y2_q[ph] = v[b][6 + ph];
            }
            t[b] = st;
        }
        return t;
    };
    SharedValues initial;
    for (const auto& [id, st] : flat_start_3ph(p, f)) {
        std::vector<double> v(st.y1.begin(), st.y1.end());
        v.insert(v.end(), st.y2_p.begin(), st.y2_p.end());
        v.insert(v.end(), st.y2_q.begin(), st.y2_q.end());
        initial.push_back(std::move(v));
    }

    std::map<AreaId, std::pair<UnbalancedAreaFeeder, UnbalancedSolution>> latest;
    for (const auto& a : layout.order) latest[a];
    const AreaSolve solve = [&](const AreaId& area, const SharedValues& inputs) {
        auto& slot = latest.at(area);
        slot.first = build_area_3ph(p, f, area, to_table(inputs));
        slot.second = solve_area_opf_3ph(slot.first.feeder, opts.opf);
        const UnbalancedFeeder& sub = slot.first.feeder;
        AreaOutcome out;
        out.objective = slot.second.objective;
        out.status = slot.second.status;
        for (BoundaryId b : slot.first.downstream) {
            const BusId dummy = p.boundary(b).dummy_bus;
            std::size_t pos = 0;
            while (sub.buses[pos].id != dummy) ++pos;
            const PhaseArray& v = slot.second.v_sq[pos];
            out.voltage[b] = {v[0], v[1], v[2]};
        }
        if (slot.first.upstream) {
            const auto& s = slot.second;
            out.power = std::vector<double>{s.source_p[0], s.source_p[1], s.source_p[2],
                                            s.source_q[0], s.source_q[1], s.source_q[2]};
        }
        return out;
    };

    ExchangeOptions ex;
    ex.tol = opts.tol;
    ex.max_iter = opts.max_iter;
    ex.sequential = opts.sequential;
    ex.workers = opts.workers ? opts.workers : worker_count();
    ExchangeResult run = run_exchange(layout, std::move(initial), solve, ex, channel);

    UnbalancedDopfResult res;
    std::vector<double> q(f.ders.size(), 0.0);
    for (auto& [area, slot] : latest) {
        for (std::size_t k = 0; k < slot.first.der_index.size(); ++k) q[slot.first.der_index[k]] = slot.second.q_d[k];
        res.areas[area] = slot.second;
    }
    res.solution = sweep_power_flow_3ph(f, q, opts.opf.pf_tol, opts.opf.pf_max_iter);
    res.trace = std::move(run.trace);
    res.macro_iterations = run.iterations;
    res.converged = run.converged;
    return res;
}

}  // namespace enapp
