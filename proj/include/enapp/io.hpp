#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "enapp/distflow.hpp"
#include "enapp/feeder.hpp"
#include "enapp/local_opf.hpp"

namespace enapp {

/// JSON mirroring OpfSolution: status, objective (pu and kW), kkt_residual,
/// iterations, q_d, then per-bus v_sq and per-line p, q, l_sq.
std::string opf_solution_to_json(const OpfSolution& s, const Feeder& f);

/// Reads the bus/line sections of a solution JSON into a branch-flow state
/// aligned with `f`. Used for externally produced (e.g. relaxed) solutions.
PowerFlowSolution load_branch_flow_state(std::istream& in, const Feeder& f);

/// Reads the `q_d` array of a solution JSON.
std::vector<double> load_dispatch(std::istream& in);

/// Loss in kW given the feeder base.
inline double to_kw(double per_unit, const Feeder& f) { return per_unit * f.base_mva * 1000.0; }

void write_text_file(const std::string& path, const std::string& content);

}  // namespace enapp
