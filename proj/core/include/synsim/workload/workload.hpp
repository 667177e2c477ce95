#pragma once

#include "synsim/core/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace synsim::workload {

enum class TraceMode { batch, dynamic }; // batch: every job arrives at t = 0

std::string_view to_string(TraceMode mode) noexcept;
TraceMode parse_trace_mode(std::string_view name);

/// Workload composition in percent.
struct Split {
    double image = 100.0;
    double language = 0.0;
    double speech = 0.0;

    /// Parses "20,70,10".
    static Split parse(std::string_view text);
    [[nodiscard]] double share(core::Task task) const noexcept;
};

using GpuDemandTable = std::vector<std::pair<int, double>>; // (GPUs, probability)

GpuDemandTable default_gpu_demands();
GpuDemandTable single_gpu_demands();

struct TraceSpec {
    TraceMode mode = TraceMode::dynamic;
    int n_jobs = 1000;
    double lambda = 1.0; // jobs per hour
    Split split;
    GpuDemandTable gpu_demands = default_gpu_demands();
    std::uint64_t seed = 1;

    void validate() const;
};

struct TraceJob {
    core::JobId id = 0;
    double arrival = 0.0; // minutes
    int gpus = 1;
    double duration_minutes = 1.0; // at the GPU-proportional share
    core::Task task = core::Task::image;
    std::string model;

    friend bool operator==(const TraceJob&, const TraceJob&) = default;
};

struct Trace {
    std::vector<TraceJob> jobs;
    friend bool operator==(const Trace&, const Trace&) = default;
};

/// Uniform double in [0, 1) with 53 random bits; identical on every platform.
double unit_uniform(std::mt19937_64& rng) noexcept;

/// 10^x minutes, x ~ U[1.5, 3] with probability 0.8, else U[3, 4].
double sample_duration_minutes(std::mt19937_64& rng) noexcept;

/// Job attributes and arrival gaps come from separate streams, so traces
/// that differ only in lambda have the same jobs at scaled arrival times.
Trace gen_trace(const TraceSpec& spec);

/// Columns: job_id, arrival_minutes, gpu_demand, duration_minutes, task, model.
void save_trace(const Trace& trace, std::ostream& os);
void save_trace(const Trace& trace, const std::filesystem::path& path);

/// Reads the CSV written by save_trace. `task` and `model` are optional;
/// missing tasks are drawn from `fill.split` and missing models uniformly
/// from the task's presets, seeded by `fill.seed`. Throws TraceError naming
/// the offending line.
Trace load_trace(std::istream& is, const TraceSpec& fill = {});
Trace load_trace(const std::filesystem::path& path, const TraceSpec& fill = {});

/// Turns trace rows into jobs on `server`-type machines: the work is the
/// sampled duration at the oracle's GPU-proportional throughput.
std::vector<core::Job> materialize(const Trace& trace, const core::ServerSpec& server);

} // namespace synsim::workload
