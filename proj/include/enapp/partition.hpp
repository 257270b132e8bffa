#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "enapp/feeder.hpp"

namespace enapp {

using AreaId = std::string;
using BoundaryId = std::size_t;

/// User-supplied assignment of buses to areas.
struct PartitionSpec {
    std::map<AreaId, std::vector<BusId>> areas;
};

/// One UA/DA pair. The dummy bus sits at the downstream end of the boundary
/// line, so the line impedance belongs to the upstream area.
struct Boundary {
    BoundaryId id = 0;
    AreaId upstream;
    AreaId downstream;
    BusId dummy_bus = 0;
    BusId upstream_bus = 0;    // sending end of the boundary line (in the UA)
    BusId downstream_bus = 0;  // entry bus of the DA
    std::size_t line = 0;      // index into Feeder::lines
};

struct AreaPartition {
    std::map<AreaId, std::vector<BusId>> areas;
    std::vector<Boundary> boundaries;
    std::map<AreaId, AreaId> area_parent;  // absent for the root area
    AreaId root_area;

    std::vector<AreaId> area_ids() const;
    /// Boundary through which `area` is supplied, if it is not the root area.
    std::optional<BoundaryId> upstream_boundary(const AreaId& area) const;
    std::vector<BoundaryId> downstream_boundaries(const AreaId& area) const;
    /// Areas ordered root first, each after its parent.
    std::vector<AreaId> topological_order() const;
    const Boundary& boundary(BoundaryId id) const { return boundaries.at(id); }
};

/// Shared (complicating) variables of one boundary.
struct BoundaryState {
    BoundaryId boundary = 0;
    double y1 = 1.0;               // squared voltage at the dummy bus
    std::complex<double> y2{};     // complex power drawn by the downstream area
};

using BoundaryTable = std::map<BoundaryId, BoundaryState>;

/// Splits `f` along area borders and inserts one dummy bus per boundary line.
/// Throws ValidationError for unassigned buses, disconnected areas, or area cycles.
AreaPartition partition(const Feeder& f, const PartitionSpec& spec);

/// A standalone area network plus the bookkeeping needed to map results back.
struct AreaFeeder {
    AreaId area;
    Feeder feeder;
    std::vector<std::size_t> der_index;  // subfeeder DER k is feeder DER der_index[k]
    std::optional<BoundaryId> upstream;
    std::vector<BoundaryId> downstream;
};

/// Builds the area network seen with boundaries held fixed.
///
/// A non-root area is rooted at its upstream dummy bus with v_root_sq = y1; the
/// entry bus is merged into that dummy bus and any DER there is assigned to the
/// upstream area, where the boundary influences losses. Each downstream dummy
/// bus carries a fixed load equal to y2 of its boundary.
AreaFeeder build_area(const AreaPartition& p, const Feeder& f, const AreaId& area,
                      const BoundaryTable& b);

inline Feeder area_subfeeder(const AreaPartition& p, const Feeder& f, const AreaId& area,
                             const BoundaryTable& b) {
    return build_area(p, f, area, b).feeder;
}

/// Flat start: y1 = source voltage, y2 = nominal net load strictly below the boundary.
BoundaryTable flat_start(const AreaPartition& p, const Feeder& f);

PartitionSpec load_partition_spec(std::istream& in);
PartitionSpec load_partition_spec_file(const std::string& path);
std::string partition_spec_to_json(const PartitionSpec& spec);

/// Spec with every bus in a single area named "A1".
PartitionSpec single_area_spec(const Feeder& f);

}  // namespace enapp
