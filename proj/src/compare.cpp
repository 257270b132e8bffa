#include "enapp/compare.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "enapp/central_opf.hpp"
#include "enapp/error.hpp"
#include "enapp/io.hpp"

namespace enapp {

using nlohmann::json;

std::string dopf_result_to_json(const DopfResult& r, const Feeder& f) {
    json doc = json::parse(opf_solution_to_json(r.solution, f));
    doc["converged"] = r.converged;
    doc["macro_iterations"] = r.macro_iterations;
    doc["final_epsilon"] = r.trace.records.empty() ? 0.0 : r.trace.records.back().epsilon;
    doc["assembly_max_mismatch"] = r.assembly.max_mismatch;
    json boundaries = json::array();
    for (const auto& [id, s] : r.boundaries)
        boundaries.push_back({{"id", id}, {"y1", s.y1}, {"y2_p", s.y2.real()}, {"y2_q", s.y2.imag()}});
    doc["boundaries"] = std::move(boundaries);
    json areas = json::object();
    for (const auto& [id, a] : r.areas) {
        areas[id] = {{"objective", a.solution.objective},
                     {"status", to_string(a.solution.status)},
                     {"q_d", a.solution.q_d}};
    }
    doc["areas"] = std::move(areas);
    return doc.dump(2) + "\n";
}

std::vector<CompareRow> compare(const Feeder& f, const AreaPartition& p, const std::vector<std::string>& methods,
                                const CompareOptions& opts) {
    using Clock = std::chrono::steady_clock;
    std::vector<CompareRow> rows;
    std::optional<PowerFlowSolution> reference;
    double reference_obj = 0.0;

    for (const auto& m : methods) {
        CompareRow row;
        row.method = m;
        const auto t0 = Clock::now();
        try {
            PowerFlowSolution flow;
            if (m == "copf") {
                const auto s = solve_copf(f, opts.copf);
                row.objective = s.objective;
                row.converged = s.status == OpfStatus::Optimal;
                row.macro_iterations = 1;
                flow = s.flow;
                reference = s.flow;
                reference_obj = s.objective;
            } else if (m == "enapp" || m == "admm") {
                const DopfResult r = m == "enapp" ? run_enapp(f, p, opts.enapp) : run_admm(f, p, opts.admm);
                row.objective = r.solution.objective;
                row.converged = r.converged;
                row.macro_iterations = r.macro_iterations;
                row.parallel_seconds = r.parallel_seconds;
                row.coordinator_seconds = r.coordinator_seconds;
                flow = r.solution.flow;
            } else {
                throw ValidationError("unknown method '" + m + "'");
            }
            row.ok = true;
            row.objective_kw = to_kw(row.objective, f);
            if (reference) {
                row.loss_gap = (row.objective - reference_obj) / reference_obj;
                for (std::size_t b = 0; b < flow.v_sq.size(); ++b) {
                    const double ref = std::sqrt(reference->v_sq[b]);
                    row.max_voltage_dev = std::max(row.max_voltage_dev, std::abs(std::sqrt(flow.v_sq[b]) - ref) / ref);
                }
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        row.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
    std::ostringstream os;
    os << "method,ok,converged,objective_pu,objective_kw,macro_iterations,loss_gap,max_voltage_dev,"
          "wall_s,parallel_s,coordinator_s,error\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%.12e,%.6f,%d,%.6e,%.6e,%.6f,%.6f,%.6f,", r.method.c_str(), r.ok,
                      r.converged, r.objective, r.objective_kw, r.macro_iterations, r.loss_gap, r.max_voltage_dev,
                      r.wall_seconds, r.parallel_seconds, r.coordinator_seconds);
        os << buf << '"' << r.error << "\"\n";
    }
    return os.str();
}

std::string compare_table(const std::vector<CompareRow>& rows) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-6s %12s %10s %8s %10s %10s %9s\n", "method", "loss (kW)", "iters", "conv",
                  "gap", "max dV", "time (s)");
    os << buf;
    for (const auto& r : rows) {
        if (!r.ok) {
            os << r.method << "  failed: " << r.error << "\n";
            continue;
        }
        std::snprintf(buf, sizeof buf, "%-6s %12.4f %10d %8s %9.3f%% %9.4f%% %9.3f\n", r.method.c_str(),
                      r.objective_kw, r.macro_iterations, r.converged ? "yes" : "no", 100.0 * r.loss_gap,
                      100.0 * r.max_voltage_dev, r.wall_seconds);
        os << buf;
    }
    return os.str();
}

}  // namespace enapp
