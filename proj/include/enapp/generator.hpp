#pragma once

#include <cstdint>

#include "enapp/feeder.hpp"
#include "enapp/partition.hpp"

namespace enapp {

struct GeneratorOptions {
    int buses = 30;
    int areas = 4;
    double der_fraction = 0.2;  // DER count over load-bus count
    double rx_scale = 1.0;      // multiplies every line impedance
    std::uint64_t seed = 0;
};

struct GeneratedFeeder {
    Feeder feeder;
    PartitionSpec partition;
};

/// Random radial feeder plus a balanced partition into `areas` areas.
///
/// Loads are drawn in [0.1, 1.0] / buses per-unit on a 1 MVA base, impedances
/// scale with 1/buses so the end-of-line drop stays near a few percent.
/// Output depends only on the options (the random stream is platform independent).
GeneratedFeeder generate_feeder(const GeneratorOptions& opts);

/// Partition obtained by cutting lines one at a time, each cut splitting the
/// currently largest area as evenly as possible. Cuts are reused, so the
/// partition into k areas refines the partition into any j < k areas.
PartitionSpec nested_partition(const Feeder& f, int areas);

}  // namespace enapp
