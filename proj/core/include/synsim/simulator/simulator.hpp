#pragma once

#include "synsim/core/types.hpp"
#include "synsim/mechanism/mechanism.hpp"
#include "synsim/policy/policy.hpp"
#include "synsim/profiler/profiler.hpp"
#include "synsim/workload/workload.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace synsim::simulator {

struct SimOptions {
    policy::PolicyKind policy = policy::PolicyKind::fifo;
    mechanism::MechanismKind mechanism = mechanism::MechanismKind::tune;
    profiler::ProfilerOptions profiler;
    bool profiling_in_jct = true;    // profiling delays queue entry
    double restart_penalty_s = 30.0; // zero-progress seconds after an allocation change
    std::size_t monitor_jobs = 1000; // middle window by job id; 0 = every job
    bool stop_after_window = false;  // end the run once the window has drained
    std::size_t opt_node_limit = 200000;
};

struct JobRecord {
    core::JobId id = 0;
    std::string model;
    core::Task task = core::Task::image;
    int gpus = 1;
    double arrival = 0.0;
    double start = -1.0;  // first round with resources
    double finish = -1.0; // -1 while unfinished
    double baseline_minutes = 0.0; // run time at the GPU-proportional share
    int restarts = 0;

    [[nodiscard]] bool finished() const noexcept { return finish >= 0.0; }
    [[nodiscard]] double jct() const noexcept { return finish - arrival; }
    /// Proportional run time over realized run time (start to finish).
    [[nodiscard]] double speedup() const noexcept;
};

struct RoundRecord {
    std::size_t index = 0;
    double time = 0.0;
    double gpu_util = 0.0;
    double cpu_util = 0.0;
    double mem_util = 0.0;
    std::size_t running = 0;
    std::size_t queued = 0;
    double throughput = 0.0; // profiled samples/s of the executed plan
    double opt_objective = -1.0; // ILP bound, opt mechanism only
};

struct MetricsReport {
    std::vector<JobRecord> jobs;    // every job, by id
    std::vector<RoundRecord> rounds;
    std::vector<std::size_t> window; // indices into `jobs` that are monitored
    double avg_jct = 0.0;            // over the finished monitored jobs
    double p99_jct = 0.0;
    double makespan = 0.0;
    std::size_t finished_in_window = 0;

    [[nodiscard]] double mean_gpu_util() const noexcept;
    [[nodiscard]] double mean_cpu_util() const noexcept;
    [[nodiscard]] double mean_mem_util() const noexcept;
};

/// Nearest-rank percentile, p in (0, 100].
double percentile(std::vector<double> values, double p);

/// Replays `jobs` on `cluster`. Throws DemandError before simulating if a
/// job can never fit, and InternalError (with the round's state) if an
/// invariant breaks.
MetricsReport run(const std::vector<core::Job>& jobs, const core::ClusterSpec& cluster, const SimOptions& options);

/// Materializes the trace against the cluster's first server type, then runs.
MetricsReport run(const workload::Trace& trace, const core::ClusterSpec& cluster, const SimOptions& options);

/// One row per monitored job.
void write_metrics_csv(const MetricsReport& report, std::ostream& os);
/// One row per round.
void write_utilization_csv(const MetricsReport& report, std::ostream& os);

struct SummaryRow {
    std::string policy;
    std::string mechanism;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    std::size_t jobs = 0;
    double avg_jct = 0.0;
    double p99_jct = 0.0;
    double makespan = 0.0;
    double gpu_util = 0.0;
    double cpu_util = 0.0;
    double mem_util = 0.0;
};

SummaryRow summarize(const MetricsReport& report, const SimOptions& options, double lambda, std::uint64_t seed);
void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os);

struct ComparedRun {
    policy::PolicyKind policy;
    mechanism::MechanismKind mechanism;
    MetricsReport report;
};

struct Comparison {
    std::vector<ComparedRun> runs; // runs[0] is the baseline
    /// avg JCT of the baseline over avg JCT of each run.
    std::vector<double> avg_ratio;
    /// Per monitored job and run: baseline JCT over the run's JCT.
    std::vector<std::vector<double>> speedups;
};

/// Runs every (policy, mechanism) pair on the same jobs. The first pair is
/// the baseline.
Comparison compare(const std::vector<core::Job>& jobs, const core::ClusterSpec& cluster, const SimOptions& base,
                   const std::vector<std::pair<policy::PolicyKind, mechanism::MechanismKind>>& configs);

/// job_id then one speedup column per run.
void write_compare_csv(const Comparison& cmp, std::ostream& os);

} // namespace synsim::simulator
