#include "enapp/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <limits>
#include <set>

#include "enapp/error.hpp"

namespace enapp {

namespace {

// std:: distributions are implementation defined; draw from the raw engine instead.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

private:
    std::mt19937_64 engine_;
};

}  // namespace

GeneratedFeeder generate_feeder(const GeneratorOptions& opts) {
    if (opts.buses < 2) throw ValidationError("generator: at least 2 buses required");
    if (opts.areas < 1 || opts.buses < 2 * opts.areas)
        throw ValidationError("generator: need buses >= 2 * areas");
    if (!(opts.der_fraction >= 0.0 && opts.der_fraction <= 1.0))
        throw ValidationError("generator: der_fraction must lie in [0, 1]");
    if (!(opts.rx_scale > 0.0) || !std::isfinite(opts.rx_scale))
        throw ValidationError("generator: rx_scale must be positive");

    Stream rng(opts.seed);
    const int n = opts.buses;
    GeneratedFeeder g;
    Feeder& f = g.feeder;
    f.base_mva = 1.0;
    f.base_kv = 12.47;
    f.root = 1;
    f.v_root_sq = 1.0;

    f.buses.push_back(Bus{1, 0.0, 0.0});
    for (int i = 2; i <= n; ++i) {
        const double p = rng.uniform(0.1, 1.0) / n;
        f.buses.push_back(Bus{i, p, p * rng.uniform(0.3, 0.6)});
        // Parent among the last few buses: long trunks with short laterals.
        const int lo = std::max(1, i - 3);
        const int parent = lo + static_cast<int>(rng.index(static_cast<std::size_t>(i - lo)));
        const double r = opts.rx_scale * rng.uniform(0.5, 1.5) * 0.1 / n;
        f.lines.push_back(Line{parent, i, r, r * rng.uniform(1.5, 2.5)});
    }

    std::vector<int> candidates(static_cast<std::size_t>(n - 1));
    std::iota(candidates.begin(), candidates.end(), 2);
    const auto count = static_cast<std::size_t>(std::lround(opts.der_fraction * (n - 1)));
    for (std::size_t k = 0; k < count; ++k) {
        std::swap(candidates[k], candidates[k + rng.index(candidates.size() - k)]);
    }
    std::sort(candidates.begin(), candidates.begin() + static_cast<long>(count));
    for (std::size_t k = 0; k < count; ++k) {
        const Bus& b = f.bus(candidates[k]);
        // Inverter sized 20% above its rated active output, which matches the local load.
        f.ders.push_back(Der{b.id, b.load_p, 1.2 * b.load_p});
    }

    const auto report = validate_radial(f);
    if (!report.ok()) throw ValidationError("generator produced an invalid feeder: " + report.summary());
    g.partition = nested_partition(f, opts.areas);
    return g;
}

PartitionSpec nested_partition(const Feeder& f, int areas) {
    const RadialIndex index(f);
    const std::size_t n = index.bus_count();
    if (areas < 1 || static_cast<std::size_t>(areas) > n)
        throw ValidationError("partition: area count out of range");

    // Area label per bus position; area roots are the buses entered through a cut line.
    std::vector<int> label(n, 0);
    std::vector<std::size_t> area_root{index.root()};

    auto area_size = [&](int a) { return static_cast<std::size_t>(std::count(label.begin(), label.end(), a)); };
    // Size of b's subtree restricted to b's area.
    auto local_subtree = [&](std::size_t b) {
        std::size_t s = 0;
        for (std::size_t c : index.subtree(b)) s += label[c] == label[b];
        return s;
    };

    for (int cut = 1; cut < areas; ++cut) {
        std::vector<int> by_size(area_root.size());
        std::iota(by_size.begin(), by_size.end(), 0);
        std::stable_sort(by_size.begin(), by_size.end(),
                         [&](int a, int b) { return area_size(a) > area_size(b); });
        bool done = false;
        for (int a : by_size) {
            const std::size_t total = area_size(a);
            std::size_t best = n, best_score = n;
            for (std::size_t b : index.order()) {
                if (label[b] != a || b == area_root[static_cast<std::size_t>(a)]) continue;
                const std::size_t s = local_subtree(b);
                if (s < 2 || total - s < 2) continue;
                const std::size_t score = s * 2 > total ? s * 2 - total : total - s * 2;
                if (score < best_score) {
                    best_score = score;
                    best = b;
                }
            }
            if (best == n) continue;
            const int fresh = static_cast<int>(area_root.size());
            for (std::size_t c : index.subtree(best)) {
                if (label[c] == a) label[c] = fresh;
            }
            area_root.push_back(best);
            done = true;
            break;
        }
        if (!done) throw ValidationError("partition: cannot split feeder into " + std::to_string(areas) + " areas");
    }

    // Name areas A1.. in order of their smallest bus id.
    std::vector<std::pair<BusId, int>> first(area_root.size(), {std::numeric_limits<BusId>::max(), 0});
    for (std::size_t b = 0; b < n; ++b) {
        auto& e = first[static_cast<std::size_t>(label[b])];
        e.first = std::min(e.first, f.buses[b].id);
        e.second = label[b];
    }
    std::sort(first.begin(), first.end());
    PartitionSpec spec;
    for (std::size_t k = 0; k < first.size(); ++k) {
        auto& list = spec.areas["A" + std::to_string(k + 1)];
        for (std::size_t b = 0; b < n; ++b) {
            if (label[b] == first[k].second) list.push_back(f.buses[b].id);
        }
        std::sort(list.begin(), list.end());
    }
    return spec;
}

}  // namespace enapp
