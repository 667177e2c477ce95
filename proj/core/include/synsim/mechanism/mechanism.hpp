#pragma once

#include "synsim/core/types.hpp"
#include "synsim/profiler/profiler.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace synsim::mechanism {

enum class MechanismKind { proportional, greedy, tune, opt };

std::string_view to_string(MechanismKind kind) noexcept;
MechanismKind parse_mechanism(std::string_view name);

/// A job admitted for this round, as seen by a placement mechanism.
struct RunnableJob {
    core::JobId id = 0;
    int gpus = 1;
    core::Resources demand;       // (g, c*, m*) from the profiler
    core::Resources proportional; // GPU-proportional total
    const profiler::SensitivityMatrix* matrix = nullptr;
    std::optional<core::Allocation> previous; // placement held last round

    /// Profiled throughput for a total allocation (0 without a matrix).
    [[nodiscard]] double rate(const core::Resources& total) const noexcept {
        return matrix ? matrix->value_at(total) : 0.0;
    }
};

struct RoundPlan {
    std::vector<core::Allocation> allocations;
    std::vector<core::JobId> skipped;
    std::vector<core::JobId> downgrades; // jobs held at (or below) proportional share

    [[nodiscard]] const core::Allocation* find(core::JobId job) const noexcept;
    [[nodiscard]] int gpus_used() const noexcept;
};

/// Walks the policy-ordered GPU demands and admits every job whose demand
/// still fits the unclaimed GPUs. Returns the admitted positions.
std::vector<std::size_t> select_runnable(std::span<const int> ordered_gpu_demands, int free_gpus);

/// GPU-proportional CPU/memory on every server a job lands on. Multi-GPU
/// jobs are consolidated when one server has room, otherwise spread over the
/// fewest servers.
RoundPlan place_proportional(std::span<const RunnableJob> jobs, const core::ClusterState& state);

/// First fit of the full demand vector, in the given order. Jobs that fit
/// nowhere are skipped for the round.
RoundPlan place_greedy(std::span<const RunnableJob> jobs, const core::ClusterState& state);

struct TuneOptions {
    bool redistribute_surplus = true;
};

/// Best-fit-decreasing packing of demand vectors that never leaves an
/// admitted job out and never gives a job less profiled throughput than its
/// proportional share. Jobs that do not fit are moved to proportional share,
/// and if needed resident jobs are moved down too to make room.
RoundPlan place_tune(std::span<const RunnableJob> jobs, const core::ClusterState& state,
                     const TuneOptions& options = {});

/// Runs one of the heuristic mechanisms (not opt) from scratch.
RoundPlan plan_round(MechanismKind kind, std::span<const RunnableJob> jobs, const core::ClusterState& state);

/// Lease renewal: jobs holding a previous placement keep it exactly and only
/// the rest are planned around them. That plan wins over a fresh one when it
/// places every job the fresh plan places and its profiled throughput is not
/// lower.
RoundPlan plan_round_with_leases(MechanismKind kind, std::span<const RunnableJob> jobs,
                                 const core::ClusterState& state);

/// Sum of profiled throughputs of all placed jobs (samples/s).
double plan_throughput(const RoundPlan& plan, std::span<const RunnableJob> jobs);

/// Proportional share of `gpus` GPUs on a server with capacity `cap`.
core::Resources proportional_on(const core::Resources& cap, int gpus) noexcept;

/// Splits a job total over servers in proportion to the GPUs each hosts:
/// floor(total * k / g) per server, leftover units one each to the servers
/// with a fractional share, in ascending server order.
core::Allocation split_allocation(core::JobId job, const core::Resources& total,
                                  std::span<const std::pair<int, int>> server_gpus);

} // namespace synsim::mechanism
