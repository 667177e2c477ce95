#pragma once

#include "synsim/core/types.hpp"
#include "synsim/mechanism/mechanism.hpp"
#include "synsim/policy/policy.hpp"
#include "synsim/simulator/simulator.hpp"
#include "synsim/workload/workload.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace synsim::config {

/// Everything one batch of experiments needs. Loaded from an INI-style file:
///
///   [cluster]  servers, gpus, cpus, mem_gb, storage_bw, round_minutes
///   [trace]    mode, jobs, lambda (one value or a comma list), split,
///              gpu_demand ("single", "default" or "1:0.7,2:0.3"), path
///   [run]      policy, mechanism (comma lists), seed, out, threshold,
///              profiling_in_jct, restart_penalty_s, monitor_jobs,
///              stop_after_window, opt_node_limit
///
/// '#' and ';' start comments. Unknown sections or keys are errors.
struct ExperimentConfig {
    int servers = 16;
    core::ServerSpec server = {8, 24, 500.0, 0.1, 0};
    double round_minutes = 5.0;

    workload::TraceSpec trace;
    std::vector<double> lambdas{1.0};
    std::optional<std::filesystem::path> trace_path;

    std::vector<policy::PolicyKind> policies{policy::PolicyKind::fifo};
    std::vector<mechanism::MechanismKind> mechanisms{mechanism::MechanismKind::proportional,
                                                      mechanism::MechanismKind::tune};
    std::uint64_t seed = 1;
    bool seed_set = false; // given in the file (or on the command line)
    std::filesystem::path out = "results";
    simulator::SimOptions sim;

    [[nodiscard]] core::ClusterSpec cluster() const;
    void validate() const;
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Comma-separated lists for the sweep keys.
std::vector<double> parse_double_list(std::string_view text);
workload::GpuDemandTable parse_gpu_demands(std::string_view text);

/// Runs every (lambda, policy, mechanism) cell. Each cell writes metrics.csv
/// and utilization.csv under out/<policy>_<mechanism>_lambda<l>/, and the
/// whole sweep writes out/summary.csv. Returns the summary rows.
std::vector<simulator::SummaryRow> run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// The trace a cell runs on: the configured file, or one generated at lambda.
workload::Trace trace_for(const ExperimentConfig& cfg, double lambda);

} // namespace synsim::config
