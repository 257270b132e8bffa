#include "enapp/io.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "enapp/error.hpp"

namespace enapp {

using nlohmann::json;

std::string opf_solution_to_json(const OpfSolution& s, const Feeder& f) {
    json doc;
    doc["status"] = to_string(s.status);
    doc["objective"] = s.objective;
    doc["objective_kw"] = to_kw(s.objective, f);
    doc["kkt_residual"] = s.kkt_residual;
    doc["iterations"] = s.iterations;
    doc["q_d"] = s.q_d;
    json ders = json::array();
    for (std::size_t k = 0; k < f.ders.size() && k < s.q_d.size(); ++k) {
        ders.push_back({{"bus", f.ders[k].bus}, {"q_d", s.q_d[k]}});
    }
    doc["ders"] = std::move(ders);
    json buses = json::array();
    for (std::size_t b = 0; b < f.buses.size(); ++b) {
        buses.push_back({{"id", f.buses[b].id}, {"v_sq", s.flow.v_sq[b]}});
    }
    json lines = json::array();
    for (std::size_t l = 0; l < f.lines.size(); ++l) {
        lines.push_back({{"from", f.lines[l].from},
                         {"to", f.lines[l].to},
                         {"p", s.flow.p_flow[l]},
                         {"q", s.flow.q_flow[l]},
                         {"l_sq", s.flow.l_sq[l]}});
    }
    doc["buses"] = std::move(buses);
    doc["lines"] = std::move(lines);
    json violations = json::array();
    for (const auto& v : s.violations) {
        violations.push_back({{"element", v.element}, {"value", v.value}, {"limit", v.limit}});
    }
    doc["violations"] = std::move(violations);
    return doc.dump(2) + "\n";
}

namespace {

json parse(std::istream& in, const char* what) {
    try {
        json doc;
        in >> doc;
        return doc;
    } catch (const json::exception& e) {
        throw ParseError(std::string(what) + ": malformed JSON: " + e.what());
    }
}

}  // namespace

PowerFlowSolution load_branch_flow_state(std::istream& in, const Feeder& f) {
    const json doc = parse(in, "solution");
    PowerFlowSolution s;
    s.v_sq.assign(f.buses.size(), 0.0);
    s.p_flow.assign(f.lines.size(), 0.0);
    s.q_flow.assign(f.lines.size(), 0.0);
    s.l_sq.assign(f.lines.size(), 0.0);
    try {
        std::map<BusId, double> v;
        for (const auto& b : doc.at("buses")) v[b.at("id").get<BusId>()] = b.at("v_sq").get<double>();
        for (std::size_t b = 0; b < f.buses.size(); ++b) {
            const auto it = v.find(f.buses[b].id);
            if (it == v.end()) throw ParseError("solution: no v_sq for bus " + std::to_string(f.buses[b].id));
            s.v_sq[b] = it->second;
        }
        std::map<std::pair<BusId, BusId>, const json*> lines;
        for (const auto& l : doc.at("lines")) lines[{l.at("from").get<BusId>(), l.at("to").get<BusId>()}] = &l;
        for (std::size_t l = 0; l < f.lines.size(); ++l) {
            const auto it = lines.find({f.lines[l].from, f.lines[l].to});
            if (it == lines.end()) {
                throw ParseError("solution: no flow for line " + std::to_string(f.lines[l].from) + "->" +
                                 std::to_string(f.lines[l].to));
            }
            s.p_flow[l] = it->second->at("p").get<double>();
            s.q_flow[l] = it->second->at("q").get<double>();
            s.l_sq[l] = it->second->at("l_sq").get<double>();
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("solution: ") + e.what());
    }
    s.converged = true;
    return s;
}

std::vector<double> load_dispatch(std::istream& in) {
    const json doc = parse(in, "solution");
    try {
        return doc.at("q_d").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("solution: ") + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << content;
}

}  // namespace enapp
