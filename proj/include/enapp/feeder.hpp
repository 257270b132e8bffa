#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

namespace enapp {

using BusId = int;

inline constexpr double kDefaultVMin = 0.90;
inline constexpr double kDefaultVMax = 1.05;

struct Bus {
    BusId id = 0;
    double load_p = 0.0;  // per-unit, negative values model injections
    double load_q = 0.0;
    double v_min_sq = kDefaultVMin * kDefaultVMin;
    double v_max_sq = kDefaultVMax * kDefaultVMax;
};

struct Line {
    BusId from = 0;
    BusId to = 0;
    double r = 0.0;
    double x = 0.0;
    double i_rated_sq = std::numeric_limits<double>::infinity();
};

/// Inverter-interfaced DER: fixed active output, dispatchable reactive power.
struct Der {
    BusId bus = 0;
    double p_d = 0.0;
    double s_rating = 0.0;
};

/// Radial feeder in per-unit on a single system base.
struct Feeder {
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Der> ders;
    BusId root = 0;
    double v_root_sq = 1.0;
    double base_mva = 1.0;
    double base_kv = 1.0;

    /// Position of `id` in `buses`, or npos.
    std::size_t bus_position(BusId id) const;
    const Bus& bus(BusId id) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

struct Violation {
    std::string kind;     // e.g. "parallel edge", "unreachable from root"
    std::string element;  // offending bus / line / DER
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool contains(const std::string& kind) const;
    std::string summary() const;
};

/// Checks every Feeder invariant; never throws.
ValidationReport validate_radial(const Feeder& f);

/// Index-based view of a validated feeder, oriented away from the root.
///
/// Buses and lines keep the positions they have in the Feeder vectors; `order`
/// lists bus positions breadth-first from the root so a reverse traversal
/// visits children before parents.
class RadialIndex {
public:
    /// Throws ValidationError when `f` is not a valid radial feeder.
    explicit RadialIndex(const Feeder& f);

    std::size_t bus_count() const { return parent_line_.size(); }
    std::size_t line_count() const { return line_from_.size(); }
    std::size_t root() const { return order_.front(); }

    const std::vector<std::size_t>& order() const { return order_; }
    std::size_t position(BusId id) const;
    /// Line feeding bus `b`, or npos for the root.
    std::size_t parent_line(std::size_t b) const { return parent_line_[b]; }
    const std::vector<std::size_t>& child_lines(std::size_t b) const { return child_lines_[b]; }
    std::size_t line_from(std::size_t l) const { return line_from_[l]; }
    std::size_t line_to(std::size_t l) const { return line_to_[l]; }
    /// Bus positions in the subtree rooted at `b` (including `b`).
    std::vector<std::size_t> subtree(std::size_t b) const;
    /// Lines from the root down to bus `b`, root side first.
    std::vector<std::size_t> path_lines(std::size_t b) const;

    static constexpr std::size_t npos = Feeder::npos;

private:
    std::unordered_map<BusId, std::size_t> position_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> parent_line_;
    std::vector<std::vector<std::size_t>> child_lines_;
    std::vector<std::size_t> line_from_;
    std::vector<std::size_t> line_to_;
};

/// Reads the JSON feeder format; converts `_kw`/`_kvar`/`_kva` fields to per-unit.
///
/// Throws ParseError, UnitError, or ValidationError.
Feeder load_feeder(std::istream& in);
Feeder load_feeder_file(const std::string& path);

/// Serializes to the same JSON format (all fields per-unit).
std::string feeder_to_json(const Feeder& f);

}  // namespace enapp
