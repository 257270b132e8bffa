#include "enapp/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <sstream>

#include "enapp/error.hpp"

namespace enapp {

std::size_t Feeder::bus_position(BusId id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) return i;
    }
    return npos;
}

const Bus& Feeder::bus(BusId id) const {
    const auto pos = bus_position(id);
    if (pos == npos) throw ValidationError("unknown bus " + std::to_string(id));
    return buses[pos];
}

bool ValidationReport::contains(const std::string& kind) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& v : violations) {
        os << v.kind << " [" << v.element << "]";
        if (!v.detail.empty()) os << ": " << v.detail;
        os << '\n';
    }
    return os.str();
}

namespace {

std::string line_name(const Line& l) {
    return "line " + std::to_string(l.from) + "->" + std::to_string(l.to);
}

std::string bus_name(BusId id) { return "bus " + std::to_string(id); }

}  // namespace

ValidationReport validate_radial(const Feeder& f) {
    ValidationReport report;
    auto add = [&](std::string kind, std::string element, std::string detail = {}) {
        report.violations.push_back({std::move(kind), std::move(element), std::move(detail)});
    };

    std::map<BusId, std::size_t> pos;
    for (std::size_t i = 0; i < f.buses.size(); ++i) {
        const Bus& b = f.buses[i];
        if (!pos.emplace(b.id, i).second) add("duplicate bus id", bus_name(b.id));
        if (!std::isfinite(b.load_p) || !std::isfinite(b.load_q) || !std::isfinite(b.v_min_sq) ||
            !std::isfinite(b.v_max_sq)) {
            add("non-finite value", bus_name(b.id));
        } else if (!(b.v_min_sq < b.v_max_sq) || b.v_min_sq <= 0.0) {
            add("invalid voltage bounds", bus_name(b.id));
        }
    }
    if (!pos.count(f.root)) add("root missing", bus_name(f.root));
    if (!(f.v_root_sq > 0.0) || !std::isfinite(f.v_root_sq)) {
        add("invalid source voltage", bus_name(f.root));
    }

    if (f.buses.size() != f.lines.size() + 1) {
        add("bus count", "feeder",
            std::to_string(f.buses.size()) + " buses, " + std::to_string(f.lines.size()) +
                " lines; radial requires |N| = |E| + 1");
    }

    std::set<std::pair<BusId, BusId>> seen_pairs;
    std::map<BusId, int> parents;
    std::map<BusId, std::vector<BusId>> children;
    for (const Line& l : f.lines) {
        const bool known = pos.count(l.from) && pos.count(l.to);
        if (!known) {
            add("unknown bus", line_name(l));
            continue;
        }
        if (l.from == l.to) add("self loop", line_name(l));
        const auto key = std::minmax(l.from, l.to);
        if (!seen_pairs.insert(key).second) add("parallel edge", line_name(l));
        if (!std::isfinite(l.r) || !std::isfinite(l.x) || l.r < 0.0 || l.r * l.r + l.x * l.x <= 0.0) {
            add("invalid impedance", line_name(l));
        }
        if (!(l.i_rated_sq > 0.0) || std::isnan(l.i_rated_sq)) add("invalid rating", line_name(l));
        if (++parents[l.to] > 1) add("multiple parents", bus_name(l.to));
        if (l.to == f.root) add("line into root", line_name(l));
        children[l.from].push_back(l.to);
    }

    for (const Der& d : f.ders) {
        if (!pos.count(d.bus)) {
            add("unknown bus", "DER at " + bus_name(d.bus));
        } else if (!std::isfinite(d.p_d) || !std::isfinite(d.s_rating) || d.p_d < 0.0 ||
                   d.p_d > d.s_rating) {
            add("invalid DER", "DER at " + bus_name(d.bus), "requires 0 <= p_d <= s_rating");
        }
    }

    if (pos.count(f.root)) {
        std::set<BusId> reached{f.root};
        std::deque<BusId> queue{f.root};
        while (!queue.empty()) {
            const BusId b = queue.front();
            queue.pop_front();
            for (BusId c : children[b]) {
                if (!reached.insert(c).second) {
                    add("cycle", bus_name(c));
                    continue;
                }
                queue.push_back(c);
            }
        }
        for (const Bus& b : f.buses) {
            if (!reached.count(b.id)) add("unreachable from root", bus_name(b.id));
        }
    }
    return report;
}

RadialIndex::RadialIndex(const Feeder& f) {
    const auto report = validate_radial(f);
    if (!report.ok()) throw ValidationError("feeder is not a valid radial network:\n" + report.summary());

    for (std::size_t i = 0; i < f.buses.size(); ++i) position_.emplace(f.buses[i].id, i);
    parent_line_.assign(f.buses.size(), npos);
    child_lines_.assign(f.buses.size(), {});
    line_from_.resize(f.lines.size());
    line_to_.resize(f.lines.size());
    for (std::size_t l = 0; l < f.lines.size(); ++l) {
        line_from_[l] = position_.at(f.lines[l].from);
        line_to_[l] = position_.at(f.lines[l].to);
        parent_line_[line_to_[l]] = l;
        child_lines_[line_from_[l]].push_back(l);
    }
    order_.reserve(f.buses.size());
    order_.push_back(position_.at(f.root));
    for (std::size_t k = 0; k < order_.size(); ++k) {
        for (std::size_t l : child_lines_[order_[k]]) order_.push_back(line_to_[l]);
    }
}

std::size_t RadialIndex::position(BusId id) const {
    const auto it = position_.find(id);
    return it == position_.end() ? npos : it->second;
}

std::vector<std::size_t> RadialIndex::subtree(std::size_t b) const {
    std::vector<std::size_t> out{b};
    for (std::size_t k = 0; k < out.size(); ++k) {
        for (std::size_t l : child_lines_[out[k]]) out.push_back(line_to_[l]);
    }
    return out;
}

std::vector<std::size_t> RadialIndex::path_lines(std::size_t b) const {
    std::vector<std::size_t> path;
    for (std::size_t cur = b; parent_line_[cur] != npos; cur = line_from_[parent_line_[cur]]) {
        path.push_back(parent_line_[cur]);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace enapp
