#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace synsim::core {

using JobId = std::int64_t;

inline constexpr std::int64_t kMbPerGb = 1000;

constexpr std::int64_t gb_to_mb(double gb) noexcept {
    return static_cast<std::int64_t>(gb * static_cast<double>(kMbPerGb) + (gb >= 0 ? 0.5 : -0.5));
}

constexpr double mb_to_gb(std::int64_t mb) noexcept {
    return static_cast<double>(mb) / static_cast<double>(kMbPerGb);
}

/// A bundle of the three schedulable resources. Memory is kept in whole
/// megabytes so that accounting is exact.
struct Resources {
    int gpus = 0;
    int cpus = 0;
    std::int64_t mem_mb = 0;

    Resources& operator+=(const Resources& o) noexcept {
        gpus += o.gpus;
        cpus += o.cpus;
        mem_mb += o.mem_mb;
        return *this;
    }
    Resources& operator-=(const Resources& o) noexcept {
        gpus -= o.gpus;
        cpus -= o.cpus;
        mem_mb -= o.mem_mb;
        return *this;
    }
    friend Resources operator+(Resources a, const Resources& b) noexcept { return a += b; }
    friend Resources operator-(Resources a, const Resources& b) noexcept { return a -= b; }
    friend bool operator==(const Resources&, const Resources&) = default;

    /// Component-wise a <= b.
    [[nodiscard]] bool fits_in(const Resources& cap) const noexcept {
        return gpus <= cap.gpus && cpus <= cap.cpus && mem_mb <= cap.mem_mb;
    }
    [[nodiscard]] bool non_negative() const noexcept {
        return gpus >= 0 && cpus >= 0 && mem_mb >= 0;
    }
    [[nodiscard]] double mem_gb() const noexcept { return mb_to_gb(mem_mb); }
};

Resources component_min(const Resources& a, const Resources& b) noexcept;
Resources component_max(const Resources& a, const Resources& b) noexcept;

struct ServerSpec {
    int gpus = 8;
    int cpus = 24;
    double mem_gb = 500.0;
    double storage_bw = 0.1; // GB/s
    int machine_type = 0;

    [[nodiscard]] Resources capacity() const noexcept { return {gpus, cpus, gb_to_mb(mem_gb)}; }
    void validate() const;
    friend bool operator==(const ServerSpec&, const ServerSpec&) = default;
};

struct ClusterSpec {
    std::vector<ServerSpec> servers;
    double round_minutes = 5.0;

    static ClusterSpec uniform(int count, const ServerSpec& server, double round_minutes = 5.0);

    [[nodiscard]] Resources totals() const noexcept;
    [[nodiscard]] bool homogeneous() const noexcept;
    void validate() const;
};

enum class Task { image, language, speech };

std::string_view to_string(Task t) noexcept;
Task parse_task(std::string_view s);

/// Synthetic model archetype backing the throughput oracle.
struct JobClass {
    std::string name;
    Task task = Task::image;
    double gpu_rate = 1.0;        // samples/s per GPU
    double cpu_rate = 1.0;        // samples/s per core of pre-processing
    double dataset_samples = 1.0; // samples per epoch
    double mb_per_sample = 1.0;
    int min_cpu = 1;
    double min_mem_gb = 0.0; // process memory floor for the profiled axis

    [[nodiscard]] double dataset_gb() const noexcept {
        return dataset_samples * mb_per_sample / static_cast<double>(kMbPerGb);
    }
    void validate() const;
};

enum class JobState { queued, running, finished };

struct Job {
    JobId id = 0;
    JobClass cls;
    int gpu_demand = 1;
    double arrival = 0.0;       // minutes
    double total_samples = 1.0; // work to complete
    double baseline_rate = 1.0; // samples/s at the GPU-proportional share
    double attained_service = 0.0; // GPU-minutes
    double samples_done = 0.0;
    JobState state = JobState::queued;

    [[nodiscard]] double remaining_samples() const noexcept { return total_samples - samples_done; }
    /// Minutes left at the GPU-proportional rate.
    [[nodiscard]] double remaining_baseline_minutes() const noexcept {
        return remaining_samples() / baseline_rate / 60.0;
    }
};

struct ServerShare {
    int server = 0;
    Resources res;
    friend bool operator==(const ServerShare&, const ServerShare&) = default;
};

struct Allocation {
    JobId job_id = 0;
    std::vector<ServerShare> per_server; // ascending server index

    [[nodiscard]] Resources total() const noexcept;
    [[nodiscard]] bool single_server() const noexcept { return per_server.size() == 1; }
    friend bool operator==(const Allocation&, const Allocation&) = default;
};

/// Free-capacity bookkeeping over a fixed set of servers.
class ClusterState {
public:
    ClusterState() = default;
    explicit ClusterState(const ClusterSpec& spec);

    /// Throws PlacementError (state untouched) if any touched server would go negative.
    void apply(const Allocation& alloc);
    /// Throws PlacementError if the job holds no allocation.
    void release(JobId job);

    [[nodiscard]] bool can_apply(const Allocation& alloc) const noexcept;
    [[nodiscard]] const Resources& free(int server) const { return free_.at(static_cast<std::size_t>(server)); }
    [[nodiscard]] const Resources& capacity(int server) const { return capacity_.at(static_cast<std::size_t>(server)); }
    [[nodiscard]] int server_count() const noexcept { return static_cast<int>(capacity_.size()); }
    [[nodiscard]] const std::map<JobId, Allocation>& running() const noexcept { return running_; }
    [[nodiscard]] const std::map<JobId, bool>& leases() const noexcept { return leases_; }
    void set_lease(JobId job, bool granted);

    [[nodiscard]] Resources total_capacity() const noexcept;
    [[nodiscard]] Resources total_free() const noexcept;
    /// free + sum(allocations) == capacity on every server.
    [[nodiscard]] bool conserved() const noexcept;

    friend bool operator==(const ClusterState&, const ClusterState&) = default;

private:
    std::vector<Resources> capacity_;
    std::vector<Resources> free_;
    std::map<JobId, Allocation> running_;
    std::map<JobId, bool> leases_;
};

ClusterState apply_allocation(ClusterState state, const Allocation& alloc);
ClusterState release_allocation(ClusterState state, const Allocation& alloc);

} // namespace synsim::core
