#include "enapp/partition.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "enapp/error.hpp"

namespace enapp {

std::vector<AreaId> AreaPartition::area_ids() const {
    std::vector<AreaId> ids;
    for (const auto& [id, buses] : areas) ids.push_back(id);
    return ids;
}

std::optional<BoundaryId> AreaPartition::upstream_boundary(const AreaId& area) const {
    for (const Boundary& b : boundaries) {
        if (b.downstream == area) return b.id;
    }
    return std::nullopt;
}

std::vector<BoundaryId> AreaPartition::downstream_boundaries(const AreaId& area) const {
    std::vector<BoundaryId> out;
    for (const Boundary& b : boundaries) {
        if (b.upstream == area) out.push_back(b.id);
    }
    return out;
}

std::vector<AreaId> AreaPartition::topological_order() const {
    std::vector<AreaId> order{root_area};
    for (std::size_t k = 0; k < order.size(); ++k) {
        for (BoundaryId b : downstream_boundaries(order[k])) order.push_back(boundaries[b].downstream);
    }
    return order;
}

AreaPartition partition(const Feeder& f, const PartitionSpec& spec) {
    const RadialIndex index(f);
    std::vector<const AreaId*> owner(f.buses.size(), nullptr);

    AreaPartition p;
    for (const auto& [area, buses] : spec.areas) {
        if (buses.empty()) throw ValidationError("area " + area + " is empty");
        for (BusId id : buses) {
            const auto pos = index.position(id);
            if (pos == RadialIndex::npos) {
                throw ValidationError("area " + area + " lists unknown bus " + std::to_string(id));
            }
            if (owner[pos]) {
                throw ValidationError("bus " + std::to_string(id) + " assigned to both " + *owner[pos] +
                                      " and " + area);
            }
            owner[pos] = &area;
        }
        p.areas[area] = buses;
    }
    for (std::size_t b = 0; b < owner.size(); ++b) {
        if (!owner[b]) throw ValidationError("bus " + std::to_string(f.buses[b].id) + " is unassigned");
    }

    // A subset of a tree is connected iff exactly one of its buses has its
    // parent outside the subset.
    std::map<AreaId, int> entries;
    for (std::size_t b = 0; b < owner.size(); ++b) {
        const auto pl = index.parent_line(b);
        if (pl == RadialIndex::npos || *owner[index.line_from(pl)] != *owner[b]) ++entries[*owner[b]];
    }
    for (const auto& [area, count] : entries) {
        if (count != 1) throw ValidationError("area " + area + " is not connected");
    }

    p.root_area = *owner[index.root()];
    BusId next_dummy = 0;
    for (const Bus& b : f.buses) next_dummy = std::max(next_dummy, b.id);
    ++next_dummy;

    for (std::size_t l = 0; l < f.lines.size(); ++l) {
        const auto& up = *owner[index.line_from(l)];
        const auto& down = *owner[index.line_to(l)];
        if (up == down) continue;
        Boundary bd;
        bd.id = p.boundaries.size();
        bd.upstream = up;
        bd.downstream = down;
        bd.dummy_bus = next_dummy++;
        bd.upstream_bus = f.lines[l].from;
        bd.downstream_bus = f.lines[l].to;
        bd.line = l;
        p.boundaries.push_back(bd);
        if (!p.area_parent.emplace(down, up).second) {
            throw ValidationError("area " + down + " has more than one upstream area");
        }
    }

    // Walk each area to the root area; a repeat means the areas form a cycle.
    for (const auto& [area, buses] : p.areas) {
        std::set<AreaId> seen{area};
        for (auto it = p.area_parent.find(area); it != p.area_parent.end();
             it = p.area_parent.find(it->second)) {
            if (!seen.insert(it->second).second) throw ValidationError("partition induces an area cycle");
        }
    }
    return p;
}

AreaFeeder build_area(const AreaPartition& p, const Feeder& f, const AreaId& area,
                      const BoundaryTable& table) {
    const auto area_it = p.areas.find(area);
    if (area_it == p.areas.end()) throw ValidationError("unknown area " + area);
    const std::set<BusId> members(area_it->second.begin(), area_it->second.end());

    auto lookup = [&](BoundaryId id) -> const BoundaryState& {
        const auto it = table.find(id);
        if (it == table.end()) {
            throw ValidationError("missing boundary value for dummy bus " +
                                  std::to_string(p.boundaries.at(id).dummy_bus));
        }
        return it->second;
    };

    AreaFeeder out;
    out.area = area;
    out.upstream = p.upstream_boundary(area);
    out.downstream = p.downstream_boundaries(area);
    Feeder& sub = out.feeder;
    sub.base_mva = f.base_mva;
    sub.base_kv = f.base_kv;

    BusId entry = f.root;
    BusId rename_from = f.root, rename_to = f.root;
    if (out.upstream) {
        const Boundary& ub = p.boundaries[*out.upstream];
        entry = ub.downstream_bus;
        rename_from = ub.downstream_bus;
        rename_to = ub.dummy_bus;
        sub.root = ub.dummy_bus;
        sub.v_root_sq = lookup(ub.id).y1;
    } else {
        sub.root = f.root;
        sub.v_root_sq = f.v_root_sq;
    }
    auto renamed = [&](BusId id) { return id == rename_from ? rename_to : id; };

    for (const Bus& b : f.buses) {
        if (!members.count(b.id)) continue;
        Bus copy = b;
        copy.id = renamed(b.id);
        sub.buses.push_back(copy);
    }
    for (const Line& l : f.lines) {
        if (members.count(l.from) && members.count(l.to)) {
            Line copy = l;
            copy.from = renamed(l.from);
            copy.to = renamed(l.to);
            sub.lines.push_back(copy);
        }
    }
    for (std::size_t k = 0; k < f.ders.size(); ++k) {
        const Der& d = f.ders[k];
        if (members.count(d.bus) && !(out.upstream && d.bus == entry)) {
            sub.ders.push_back(d);
            out.der_index.push_back(k);
        }
    }
    for (BoundaryId id : out.downstream) {
        const Boundary& bd = p.boundaries[id];
        const BoundaryState& state = lookup(id);
        const Bus& original = f.bus(bd.downstream_bus);
        Bus dummy;
        dummy.id = bd.dummy_bus;
        dummy.load_p = state.y2.real();
        dummy.load_q = state.y2.imag();
        dummy.v_min_sq = original.v_min_sq;
        dummy.v_max_sq = original.v_max_sq;
        sub.buses.push_back(dummy);
        Line line = f.lines[bd.line];
        line.from = renamed(line.from);
        line.to = bd.dummy_bus;
        sub.lines.push_back(line);
        for (std::size_t k = 0; k < f.ders.size(); ++k) {
            if (f.ders[k].bus == bd.downstream_bus) {
                Der d = f.ders[k];
                d.bus = bd.dummy_bus;
                sub.ders.push_back(d);
                out.der_index.push_back(k);
            }
        }
    }
    return out;
}

BoundaryTable flat_start(const AreaPartition& p, const Feeder& f) {
    const RadialIndex index(f);
    BoundaryTable table;
    for (const Boundary& bd : p.boundaries) {
        const auto below = index.subtree(index.position(bd.downstream_bus));
        std::set<BusId> ids;
        std::complex<double> load{};
        for (std::size_t b : below) {
            ids.insert(f.buses[b].id);
            load += std::complex<double>(f.buses[b].load_p, f.buses[b].load_q);
        }
        // Net of fixed DER output, except at the entry bus whose DER sits upstream.
        for (const Der& d : f.ders) {
            if (ids.count(d.bus) && d.bus != bd.downstream_bus) load -= d.p_d;
        }
        table[bd.id] = BoundaryState{bd.id, f.v_root_sq, load};
    }
    return table;
}

PartitionSpec load_partition_spec(std::istream& in) {
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("partition: malformed JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("areas") || !doc["areas"].is_object()) {
        throw ParseError("partition: expected {\"areas\": {area_id: [bus ids]}}");
    }
    PartitionSpec spec;
    for (const auto& [area, buses] : doc["areas"].items()) {
        if (!buses.is_array()) throw ParseError("partition: area " + area + " is not an array");
        auto& list = spec.areas[area];
        for (const auto& b : buses) {
            if (!b.is_number_integer()) throw ParseError("partition: area " + area + " has a non-integer bus id");
            list.push_back(b.get<BusId>());
        }
    }
    return spec;
}

PartitionSpec load_partition_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open partition file '" + path + "'");
    return load_partition_spec(in);
}

std::string partition_spec_to_json(const PartitionSpec& spec) {
    nlohmann::json areas = nlohmann::json::object();
    for (const auto& [area, buses] : spec.areas) areas[area] = buses;
    return nlohmann::json{{"areas", areas}}.dump(2) + "\n";
}

PartitionSpec single_area_spec(const Feeder& f) {
    PartitionSpec spec;
    auto& list = spec.areas["A1"];
    for (const Bus& b : f.buses) list.push_back(b.id);
    return spec;
}

}  // namespace enapp
