#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "enapp/admm.hpp"
#include "enapp/central_opf.hpp"
#include "enapp/compare.hpp"
#include "enapp/coordinator.hpp"
#include "enapp/diagnostics.hpp"
#include "enapp/error.hpp"
#include "enapp/generator.hpp"
#include "enapp/io.hpp"
#include "enapp/unbalanced.hpp"

using namespace enapp;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNonConvergence = 3;

struct NotConverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void emit(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") std::cout << content;
    else write_text_file(path, content);
}

std::vector<double> read_dispatch(const std::string& path, std::size_t n) {
    if (path.empty()) return std::vector<double>(n, 0.0);
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dispatch file '" + path + "'");
    auto q = load_dispatch(in);
    if (q.size() != n) throw ValidationError("dispatch has " + std::to_string(q.size()) + " entries, feeder has " +
                                             std::to_string(n) + " DERs");
    return q;
}

BoundaryTable read_boundaries(const std::string& path, const AreaPartition& p, const Feeder& f) {
    BoundaryTable t = flat_start(p, f);
    if (path.empty()) return t;
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open boundary file '" + path + "'");
    json doc;
    try {
        in >> doc;
        for (const auto& b : doc.at("boundaries")) {
            const auto id = b.at("id").get<BoundaryId>();
            if (id >= p.boundaries.size()) throw ValidationError("unknown boundary " + std::to_string(id));
            t[id] = BoundaryState{id, b.at("y1").get<double>(), {b.at("y2_p").get<double>(), b.at("y2_q").get<double>()}};
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("boundary file: ") + e.what());
    }
    return t;
}

std::string unbalanced_trace_csv(const UnbalancedDopfResult& r, std::size_t boundaries) {
    return trace_csv(r.trace, boundaries);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed optimal power flow for radial feeders"};
    app.require_subcommand(1);

    std::string feeder, part, out, trace, dispatch, boundary_file, area, cache_dir, exact_out, methods = "copf,enapp";
    std::string table_out, partition_out;
    bool three_phase = false, sequential = false, balance = false;
    double tol = 1e-3, pf_tol = kPowerFlowTol, rho = 1.0;
    int max_iter = 50, admm_max_iter = 2000, pf_max_iter = kPowerFlowMaxIter;
    std::size_t boundary = 0;
    GeneratorOptions gen;

    auto* pf = app.add_subcommand("powerflow", "Backward/forward sweep at a fixed dispatch");
    pf->add_option("--feeder", feeder, "Feeder JSON")->required();
    pf->add_option("--dispatch", dispatch, "Solution JSON with q_d (default: zero)");
    pf->add_option("--tol", pf_tol, "Sweep tolerance");
    pf->add_option("--max-iter", pf_max_iter, "Sweep iteration cap");
    pf->add_flag("--three-phase", three_phase, "Per-phase feeder");
    pf->add_option("--out", out, "CSV output (default stdout)");

    auto* copf = app.add_subcommand("copf", "Centralized OPF");
    copf->add_option("--feeder", feeder, "Feeder JSON")->required();
    copf->add_flag("--three-phase", three_phase, "Per-phase feeder");
    copf->add_option("--cache-dir", cache_dir, "Reuse solutions keyed by feeder hash");
    copf->add_option("--exactness", exact_out, "Write branch-flow exactness residuals CSV");
    copf->add_option("--out", out, "Solution JSON (default stdout)");

    auto* opf_area = app.add_subcommand("opf-area", "OPF of one area with fixed boundary values");
    opf_area->add_option("--feeder", feeder, "Feeder JSON")->required();
    opf_area->add_option("--partition", part, "Partition JSON")->required();
    opf_area->add_option("--area", area, "Area id")->required();
    opf_area->add_option("--boundaries", boundary_file, "Boundary JSON (default: flat start)");
    opf_area->add_option("--out", out, "Solution JSON (default stdout)");

    auto* dopf = app.add_subcommand("dopf", "Distributed OPF by equivalent-network exchange");
    dopf->add_option("--feeder", feeder, "Feeder JSON")->required();
    dopf->add_option("--partition", part, "Partition JSON")->required();
    dopf->add_option("--tol", tol, "Boundary residual tolerance");
    dopf->add_option("--max-iter", max_iter, "Macro-iteration cap");
    dopf->add_flag("--sequential", sequential, "Solve areas upstream-first instead of in parallel");
    dopf->add_flag("--three-phase", three_phase, "Per-phase feeder");
    dopf->add_option("--trace", trace, "Convergence trace CSV");
    dopf->add_option("--out", out, "Solution JSON (default stdout)");

    auto* admm = app.add_subcommand("admm", "Consensus ADMM baseline");
    admm->add_option("--feeder", feeder, "Feeder JSON")->required();
    admm->add_option("--partition", part, "Partition JSON")->required();
    admm->add_option("--rho", rho, "Penalty parameter");
    admm->add_flag("--balance", balance, "Residual-balancing penalty updates");
    admm->add_option("--tol", tol, "Primal and dual residual tolerance");
    admm->add_option("--max-iter", admm_max_iter, "Iteration cap");
    admm->add_option("--trace", trace, "Convergence trace CSV");
    admm->add_option("--out", out, "Solution JSON (default stdout)");

    auto* gamma = app.add_subcommand("gamma", "Boundary contraction estimate");
    gamma->add_option("--feeder", feeder, "Feeder JSON")->required();
    gamma->add_option("--partition", part, "Partition JSON")->required();
    gamma->add_option("--boundary", boundary, "Boundary id")->required();
    gamma->add_option("--out", out, "JSON output (default stdout)");

    auto* generate = app.add_subcommand("generate", "Random radial feeder and partition");
    generate->add_option("--buses", gen.buses, "Bus count")->required();
    generate->add_option("--areas", gen.areas, "Area count")->required();
    generate->add_option("--der-fraction", gen.der_fraction, "DER count over load-bus count");
    generate->add_option("--rx-scale", gen.rx_scale, "Impedance multiplier");
    generate->add_option("--seed", gen.seed, "Random seed");
    generate->add_option("--out", out, "Feeder JSON (default stdout)");
    generate->add_option("--partition-out", partition_out, "Partition JSON");

    auto* cmp = app.add_subcommand("compare", "Run several methods on one case");
    cmp->add_option("--feeder", feeder, "Feeder JSON")->required();
    cmp->add_option("--partition", part, "Partition JSON")->required();
    cmp->add_option("--methods", methods, "Comma-separated subset of copf,enapp,admm");
    cmp->add_option("--rho", rho, "ADMM penalty");
    cmp->add_option("--out", out, "CSV output (default stdout)");
    cmp->add_option("--table", table_out, "Human-readable table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitValidation;
    }

    try {
        if (*pf) {
            if (three_phase) {
                const auto f = load_unbalanced_feeder_file(feeder);
                const auto q = read_dispatch(dispatch, f.ders.size());
                const auto s = UnbalancedModel(f).run(q, pf_tol, pf_max_iter);
                if (!s.converged) throw NotConverged("three-phase power flow did not converge");
                emit(out, unbalanced_solution_to_json(s, f));
            } else {
                const auto f = load_feeder_file(feeder);
                const auto q = read_dispatch(dispatch, f.ders.size());
                emit(out, power_flow_csv(sweep_power_flow(f, q, pf_tol, pf_max_iter), f));
            }
        } else if (*copf) {
            if (three_phase) {
                const auto f = load_unbalanced_feeder_file(feeder);
                const auto s = solve_copf_3ph(f);
                emit(out, unbalanced_solution_to_json(s, f));
                if (s.status != OpfStatus::Optimal) throw NotConverged("OPF status " + to_string(s.status));
            } else {
                const auto f = load_feeder_file(feeder);
                const auto s = cache_dir.empty() ? solve_copf(f) : solve_copf_cached(f, cache_dir);
                emit(out, opf_solution_to_json(s, f));
                if (!exact_out.empty()) write_text_file(exact_out, exactness_csv(exactness_residuals(s, f), f));
                if (s.status != OpfStatus::Optimal) throw NotConverged("OPF status " + to_string(s.status));
            }
        } else if (*opf_area) {
            const auto f = load_feeder_file(feeder);
            const auto p = partition(f, load_partition_spec_file(part));
            const auto r = solve_area(p, f, area, read_boundaries(boundary_file, p, f));
            emit(out, opf_solution_to_json(r.solution, r.area.feeder));
            if (r.solution.status != OpfStatus::Optimal) throw NotConverged("OPF status " + to_string(r.solution.status));
        } else if (*dopf) {
            if (three_phase) {
                const auto f = load_unbalanced_feeder_file(feeder);
                const auto p = partition(f.skeleton(), load_partition_spec_file(part));
                UnbalancedEnappOptions o;
                o.tol = tol;
                o.max_iter = max_iter;
                o.sequential = sequential;
                const auto r = run_enapp_3ph(f, p, o);
                if (!trace.empty()) write_text_file(trace, unbalanced_trace_csv(r, p.boundaries.size()));
                json doc = json::parse(unbalanced_solution_to_json(r.solution, f));
                doc["macro_iterations"] = r.macro_iterations;
                doc["converged"] = r.converged;
                emit(out, doc.dump(2) + "\n");
                if (!r.converged) throw NotConverged("no convergence within " + std::to_string(max_iter) + " macro-iterations");
            } else {
                const auto f = load_feeder_file(feeder);
                const auto p = partition(f, load_partition_spec_file(part));
                EnappOptions o;
                o.tol = tol;
                o.max_iter = max_iter;
                o.sequential = sequential;
                const auto r = run_enapp(f, p, o);
                if (!trace.empty()) write_text_file(trace, trace_csv(r.trace, p.boundaries.size()));
                emit(out, dopf_result_to_json(r, f));
                if (!r.converged) throw NotConverged("no convergence within " + std::to_string(max_iter) + " macro-iterations");
            }
        } else if (*admm) {
            const auto f = load_feeder_file(feeder);
            const auto p = partition(f, load_partition_spec_file(part));
            AdmmOptions o;
            o.rho = rho;
            o.tol = tol;
            o.max_iter = admm_max_iter;
            o.residual_balancing = balance;
            const auto r = run_admm(f, p, o);
            if (!trace.empty()) write_text_file(trace, trace_csv(r.trace, p.boundaries.size()));
            emit(out, dopf_result_to_json(r, f));
            if (!r.converged) throw NotConverged("no convergence within " + std::to_string(admm_max_iter) + " iterations");
        } else if (*gamma) {
            const auto f = load_feeder_file(feeder);
            const auto p = partition(f, load_partition_spec_file(part));
            const auto report = gamma_analysis(reduce_to_two_area(f, p, boundary));
            for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
            emit(out, gamma_report_to_json(report) + "\n");
        } else if (*generate) {
            const auto g = generate_feeder(gen);
            emit(out, feeder_to_json(g.feeder));
            if (!partition_out.empty()) write_text_file(partition_out, partition_spec_to_json(g.partition));
        } else if (*cmp) {
            const auto f = load_feeder_file(feeder);
            const auto p = partition(f, load_partition_spec_file(part));
            std::vector<std::string> list;
            std::stringstream ss(methods);
            for (std::string m; std::getline(ss, m, ',');)
                if (!m.empty()) list.push_back(m);
            CompareOptions o;
            o.admm.rho = rho;
            const auto rows = compare(f, p, list, o);
            emit(out, compare_csv(rows));
            if (!table_out.empty()) write_text_file(table_out, compare_table(rows));
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const UnitError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NotConverged& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNonConvergence;
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNonConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
