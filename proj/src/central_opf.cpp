#include "enapp/central_opf.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "enapp/error.hpp"
#include "enapp/io.hpp"

namespace enapp {

OpfSolution solve_copf(const Feeder& f, const OpfOptions& opts) { return solve_area_opf(f, opts); }

ExactnessReport exactness_residuals(const PowerFlowSolution& s, const Feeder& f) {
    const RadialIndex index(f);
    ExactnessReport r;
    r.residual.resize(f.lines.size());
    for (std::size_t l = 0; l < f.lines.size(); ++l) {
        const double v_from = s.v_sq[index.line_from(l)];
        r.residual[l] = v_from * s.l_sq[l] - (s.p_flow[l] * s.p_flow[l] + s.q_flow[l] * s.q_flow[l]);
        r.max_abs = std::max(r.max_abs, std::abs(r.residual[l]));
    }
    return r;
}

std::string exactness_csv(const ExactnessReport& r, const Feeder& f) {
    std::ostringstream os;
    os << "line,from,to,residual\n";
    char buf[128];
    for (std::size_t l = 0; l < f.lines.size(); ++l) {
        std::snprintf(buf, sizeof buf, "%zu,%d,%d,%.12e\n", l, f.lines[l].from, f.lines[l].to, r.residual[l]);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "max_abs,,,%.12e\n", r.max_abs);
    os << buf;
    return os.str();
}

std::string feeder_hash(const Feeder& f) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : feeder_to_json(f)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

OpfSolution solve_copf_cached(const Feeder& f, const std::string& cache_dir, const OpfOptions& opts) {
    namespace fs = std::filesystem;
    const fs::path path = fs::path(cache_dir) / ("copf_" + feeder_hash(f) + ".json");
    if (fs::exists(path)) {
        std::ifstream in(path);
        const auto q_d = load_dispatch(in);
        if (q_d.size() == f.ders.size()) {
            OpfSolution s;
            s.q_d = q_d;
            s.flow = PowerFlowModel(f).run(q_d, opts.pf_tol, opts.pf_max_iter);
            if (s.flow.converged) {
                s.objective = total_losses(s.flow, f);
                return s;
            }
        }
    }
    auto s = solve_copf(f, opts);
    fs::create_directories(cache_dir);
    write_text_file(path.string(), opf_solution_to_json(s, f));
    return s;
}

}  // namespace enapp
