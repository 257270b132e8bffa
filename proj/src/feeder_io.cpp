#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "enapp/error.hpp"
#include "enapp/feeder.hpp"

namespace enapp {

using nlohmann::json;

namespace {

double number(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
    if (!it->is_number()) throw ParseError(where + ": field '" + key + "' is not a number");
    return it->get<double>();
}

int integer(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
    if (!it->is_number_integer()) throw ParseError(where + ": field '" + key + "' is not an integer");
    return it->get<int>();
}

// Reads `key` in per-unit, or `key_suffix` in kW/kvar/kVA divided by the base.
double power_field(const json& obj, const std::string& key, const std::string& suffix,
                   double base_kva, bool required, const std::string& where) {
    const bool has_pu = obj.contains(key);
    const bool has_phys = obj.contains(key + suffix);
    if (has_pu && has_phys) throw ParseError(where + ": both '" + key + "' and '" + key + suffix + "'");
    if (has_pu) return number(obj, key.c_str(), where);
    if (has_phys) {
        if (!(base_kva > 0.0)) {
            throw UnitError(where + ": '" + key + suffix + "' needs a positive base_mva");
        }
        return number(obj, (key + suffix).c_str(), where) / base_kva;
    }
    if (required) throw ParseError(where + ": missing field '" + key + "'");
    return 0.0;
}

const json& array_field(const json& obj, const char* key, bool required) {
    static const json empty = json::array();
    const auto it = obj.find(key);
    if (it == obj.end()) {
        if (required) throw ParseError(std::string("feeder: missing array '") + key + "'");
        return empty;
    }
    if (!it->is_array()) throw ParseError(std::string("feeder: '") + key + "' is not an array");
    return *it;
}

}  // namespace

Feeder load_feeder(std::istream& in) {
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(std::string("feeder: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("feeder: top level must be an object");

    Feeder f;
    if (!doc.contains("base_mva")) throw UnitError("feeder: missing base_mva");
    f.base_mva = number(doc, "base_mva", "feeder");
    if (!(f.base_mva > 0.0)) throw UnitError("feeder: base_mva must be positive");
    f.base_kv = doc.contains("base_kv") ? number(doc, "base_kv", "feeder") : 0.0;
    f.root = integer(doc, "root", "feeder");
    f.v_root_sq = doc.contains("v_root_sq") ? number(doc, "v_root_sq", "feeder") : 1.0;
    const double base_kva = f.base_mva * 1000.0;

    for (const json& b : array_field(doc, "buses", true)) {
        const std::string where = "bus";
        Bus bus;
        bus.id = integer(b, "id", where);
        const std::string named = where + " " + std::to_string(bus.id);
        bus.load_p = power_field(b, "p_load", "_kw", base_kva, false, named);
        bus.load_q = power_field(b, "q_load", "_kvar", base_kva, false, named);
        if (b.contains("v_min")) {
            const double v = number(b, "v_min", named);
            bus.v_min_sq = v * v;
        }
        if (b.contains("v_max")) {
            const double v = number(b, "v_max", named);
            bus.v_max_sq = v * v;
        }
        f.buses.push_back(bus);
    }
    for (const json& l : array_field(doc, "lines", true)) {
        Line line;
        line.from = integer(l, "from", "line");
        line.to = integer(l, "to", "line");
        const std::string named = "line " + std::to_string(line.from) + "->" + std::to_string(line.to);
        line.r = number(l, "r", named);
        line.x = number(l, "x", named);
        if (l.contains("i_rated")) {
            const double i = number(l, "i_rated", named);
            line.i_rated_sq = i * i;
        }
        f.lines.push_back(line);
    }
    for (const json& d : array_field(doc, "ders", false)) {
        Der der;
        der.bus = integer(d, "bus", "der");
        const std::string named = "DER at bus " + std::to_string(der.bus);
        der.p_d = power_field(d, "p_d", "_kw", base_kva, true, named);
        der.s_rating = power_field(d, "s_rating", "_kva", base_kva, true, named);
        f.ders.push_back(der);
    }

    const auto report = validate_radial(f);
    if (!report.ok()) throw ValidationError("feeder validation failed:\n" + report.summary());
    return f;
}

Feeder load_feeder_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open feeder file '" + path + "'");
    return load_feeder(in);
}

std::string feeder_to_json(const Feeder& f) {
    json doc;
    doc["base_mva"] = f.base_mva;
    doc["base_kv"] = f.base_kv;
    doc["root"] = f.root;
    doc["v_root_sq"] = f.v_root_sq;
    json buses = json::array();
    for (const Bus& b : f.buses) {
        json jb{{"id", b.id}, {"p_load", b.load_p}, {"q_load", b.load_q}};
        if (b.v_min_sq != kDefaultVMin * kDefaultVMin) jb["v_min"] = std::sqrt(b.v_min_sq);
        if (b.v_max_sq != kDefaultVMax * kDefaultVMax) jb["v_max"] = std::sqrt(b.v_max_sq);
        buses.push_back(std::move(jb));
    }
    json lines = json::array();
    for (const Line& l : f.lines) {
        json jl{{"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}};
        if (std::isfinite(l.i_rated_sq)) jl["i_rated"] = std::sqrt(l.i_rated_sq);
        lines.push_back(std::move(jl));
    }
    json ders = json::array();
    for (const Der& d : f.ders) ders.push_back({{"bus", d.bus}, {"p_d", d.p_d}, {"s_rating", d.s_rating}});
    doc["buses"] = std::move(buses);
    doc["lines"] = std::move(lines);
    doc["ders"] = std::move(ders);
    return doc.dump(2) + "\n";
}

}  // namespace enapp
