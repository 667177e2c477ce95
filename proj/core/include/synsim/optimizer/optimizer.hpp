#pragma once

#include "synsim/core/types.hpp"
#include "synsim/mechanism/mechanism.hpp"
#include "synsim/profiler/profiler.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace synsim::optimizer {

struct OptJob {
    core::JobId id = 0;
    int gpus = 1;
    const profiler::SensitivityMatrix* matrix = nullptr;
    double baseline = 0.0; // throughput at the GPU-proportional cell
};

/// One scheduling round seen as a single super-machine with per-server
/// capacities kept for placement.
struct OptInstance {
    std::vector<OptJob> jobs;
    core::Resources totals;
    std::vector<core::Resources> servers;

    static OptInstance from_runnable(std::span<const mechanism::RunnableJob> jobs, const core::ClusterState& state);
    [[nodiscard]] std::size_t server_count() const noexcept { return servers.size(); }
};

struct Cell {
    int cpus = 0;
    std::int64_t mem_mb = 0;
    double throughput = 0.0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

struct IlpOptions {
    std::size_t node_limit = 0; // 0 = unlimited
    /// Restrict every job to what ceil(g / G_i) servers can hold.
    bool cap_to_servers = false;
};

struct IlpSolution {
    bool feasible = false;
    bool proven_optimal = false;
    std::vector<Cell> cells; // per job, in instance order
    double objective = 0.0;
    std::size_t nodes = 0;
};

/// Exact best throughput over the grid: one cell per job, the CPU and
/// memory totals respected, and no job below its proportional throughput.
IlpSolution solve_ideal_ilp(const OptInstance& instance, const IlpOptions& options = {});

struct PlacementSolution {
    bool feasible = false;
    /// x[server][job]: fraction of job j placed on server i.
    std::vector<std::vector<double>> x;
    std::vector<core::JobId> fragmented;

    [[nodiscard]] bool integral() const noexcept { return feasible && fragmented.empty(); }
};

/// Vertex of { sum_j g x <= G_i, sum_j c* x <= C_i, sum_j m* x <= M_i,
/// sum_i x_ij >= 1, x >= 0 }, reached by minimizing sum x.
PlacementSolution solve_placement_lp(const OptInstance& instance, const IlpSolution& cells);

// Heterogeneous clusters: a job runs on exactly one machine type.

struct MachineType {
    core::ServerSpec server;
    int count = 1;

    [[nodiscard]] core::Resources capacity() const noexcept;
};

struct HeteroJob {
    core::JobId id = 0;
    int gpus = 1;
    std::vector<const profiler::SensitivityMatrix*> per_type; // W_ij, one per machine type
    double fair = 0.0;                                        // throughput floor
};

struct HeteroInstance {
    std::vector<MachineType> types;
    std::vector<HeteroJob> jobs;
    /// Capacity already in use per type (refill rounds); empty = none.
    std::vector<core::Resources> used;
};

struct HeteroChoice {
    int type = -1; // -1: not assigned this round
    Cell cell;

    [[nodiscard]] bool assigned() const noexcept { return type >= 0; }
    friend bool operator==(const HeteroChoice&, const HeteroChoice&) = default;
};

struct HeteroSolution {
    bool proven_optimal = false;
    std::vector<HeteroChoice> choices;
    double objective = 0.0;
    int assigned_gpus = 0;
    std::vector<core::Resources> used; // per type, including pre-existing use
    std::size_t iterations = 1;
};

/// Default fair floor: proportional share on the slowest machine type.
double default_fair_share(const HeteroJob& job, std::span<const MachineType> types);

/// Every job is assigned when possible. Otherwise the most GPUs that can
/// be assigned are, and among those the throughput is maximized.
HeteroSolution solve_hetero_ilp(const HeteroInstance& instance, const IlpOptions& options = {});

/// Re-solves over leftover capacity with the still-unassigned jobs followed
/// by `queue`, until a pass assigns nothing or no GPUs or jobs remain.
/// Choices cover instance.jobs then queue, in that order.
HeteroSolution refill_unassigned(const HeteroInstance& instance, HeteroSolution solution,
                                 std::span<const HeteroJob> queue, const IlpOptions& options = {});

struct OptRound {
    mechanism::RoundPlan plan;
    IlpSolution ilp;
    bool executed = false; // false: the plan came from Tune
    std::size_t fragmented = 0;
};

/// ILP, then placement; an integral placement is executed as is, anything
/// else is handed to Tune.
OptRound plan_opt_round(std::span<const mechanism::RunnableJob> jobs, const core::ClusterState& state,
                        const IlpOptions& options = {});

} // namespace synsim::optimizer
