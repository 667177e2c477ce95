#pragma once

#include "synsim/core/types.hpp"

#include <cstddef>
#include <vector>

namespace synsim::optimizer {

/// One candidate configuration for a job: a cell on a given machine type.
struct PackingOption {
    int type = 0;
    core::Resources use; // charged against the type's capacity
    double value = 0.0;
    std::size_t tag = 0; // caller's index for the option
};

/// Pick at most (or exactly) one option per job so that per-type capacities
/// hold, maximizing the summed value.
struct PackingProblem {
    std::vector<std::vector<PackingOption>> jobs;
    std::vector<core::Resources> capacity; // per type
    bool allow_unassigned = false;
    int min_assigned_gpus = 0;
    std::size_t node_limit = 0; // 0 = unlimited
};

struct PackingResult {
    bool feasible = false;
    bool proven_optimal = false;
    double objective = 0.0;
    std::vector<int> choice; // option index per job, -1 when unassigned
    std::size_t nodes = 0;
};

/// Exact branch and bound. Options dominated by a cheaper option of equal or
/// higher value on the same type are dropped first. Node bounds come from
/// the Lagrangian of the capacity rows, with multipliers taken from the LP
/// relaxation at the root. Among optimal assignments the one with the
/// lexicographically smallest option indices wins, so the result does not
/// depend on search order. The objective is summed in job order.
PackingResult solve_packing(const PackingProblem& problem);

} // namespace synsim::optimizer
