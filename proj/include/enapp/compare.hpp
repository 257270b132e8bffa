#pragma once

#include <string>
#include <vector>

#include "enapp/admm.hpp"
#include "enapp/coordinator.hpp"

namespace enapp {

std::string dopf_result_to_json(const DopfResult& r, const Feeder& f);

struct CompareOptions {
    EnappOptions enapp;
    AdmmOptions admm;
    OpfOptions copf;
};

struct CompareRow {
    std::string method;
    bool ok = false;
    std::string error;  // set when the method threw
    bool converged = false;
    double objective = 0.0;  // per-unit
    double objective_kw = 0.0;
    double wall_seconds = 0.0;
    double parallel_seconds = 0.0;     // distributed methods: slowest area per round, summed
    double coordinator_seconds = 0.0;
    int macro_iterations = 0;
    double loss_gap = 0.0;       // relative to copf, when copf ran
    double max_voltage_dev = 0.0;  // max relative |V| deviation from copf, when copf ran
};

/// Runs each method in {copf, enapp, admm} on the same feeder and partition.
/// A failing method is recorded in its row; the others still run.
std::vector<CompareRow> compare(const Feeder& f, const AreaPartition& p, const std::vector<std::string>& methods,
                                const CompareOptions& opts = {});

std::string compare_csv(const std::vector<CompareRow>& rows);
std::string compare_table(const std::vector<CompareRow>& rows);

}  // namespace enapp
