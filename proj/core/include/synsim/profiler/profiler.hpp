#pragma once

#include "synsim/core/types.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace synsim::profiler {

/// W_j: throughput (samples/s) over a discrete CPU x memory grid.
class SensitivityMatrix {
public:
    SensitivityMatrix() = default;
    /// `values` is row-major, one row per CPU axis entry.
    SensitivityMatrix(std::vector<int> cpu_axis, std::vector<std::int64_t> mem_axis_mb,
                      std::vector<double> values, std::vector<int> sampled_cpus = {});

    [[nodiscard]] std::size_t rows() const noexcept { return cpu_axis_.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return mem_axis_mb_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }
    [[nodiscard]] const std::vector<int>& cpu_axis() const noexcept { return cpu_axis_; }
    [[nodiscard]] const std::vector<std::int64_t>& mem_axis_mb() const noexcept { return mem_axis_mb_; }
    [[nodiscard]] const std::vector<int>& sampled_cpus() const noexcept { return sampled_cpus_; }

    [[nodiscard]] double at(std::size_t ci, std::size_t mi) const noexcept { return values_[ci * cols() + mi]; }

    /// Value at the largest grid cell not exceeding (cpus, mem_mb); 0 below the grid.
    [[nodiscard]] double value_at(int cpus, std::int64_t mem_mb) const noexcept;
    [[nodiscard]] double value_at(const core::Resources& r) const noexcept { return value_at(r.cpus, r.mem_mb); }

    /// Index of the largest axis entry <= value, or npos.
    [[nodiscard]] std::size_t cpu_floor_index(int cpus) const noexcept;
    [[nodiscard]] std::size_t mem_floor_index(std::int64_t mem_mb) const noexcept;

    [[nodiscard]] double peak() const noexcept;
    /// Non-decreasing along both axes, every cell finite and >= 0.
    [[nodiscard]] bool valid() const noexcept;

    /// Rows = CPU count, columns = memory GB, cell = samples/s.
    void write_csv(std::ostream& os) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::vector<int> cpu_axis_;
    std::vector<std::int64_t> mem_axis_mb_;
    std::vector<double> values_;
    std::vector<int> sampled_cpus_;
};

/// The (g_j, c*_j, m*_j) demand plus the throughput it reaches.
struct DemandVector {
    int gpus = 0;
    int cpus = 0;
    std::int64_t mem_mb = 0;
    double peak_throughput = 0.0;

    [[nodiscard]] core::Resources resources() const noexcept { return {gpus, cpus, mem_mb}; }
};

/// Where and how a job is profiled: the CPU range to search, the memory held
/// during CPU sweeps, and the proportional-share point for the server.
struct ProfileGeometry {
    int gpus = 1;
    int min_cpus = 1;
    int max_cpus = 1;
    std::int64_t full_mem_mb = 0;
    core::Resources proportional;
    double storage_bw = 0.1;

    static ProfileGeometry for_server(const core::JobClass& cls, const core::ServerSpec& server, int gpus,
                                      const core::Resources& cluster_totals);
};

struct CpuSample {
    int cpus = 0;
    double throughput = 0.0;
};

struct CpuProfile {
    std::vector<CpuSample> samples; // ascending by cpus, each measured once
    double profiling_minutes = 0.0;
};

/// Bisection over CPU counts at full memory. Starting from [min, max], a
/// range whose end-to-end gain is below `threshold` is taken as flat;
/// otherwise the midpoint is measured and the search continues in the lower
/// half when the upper half gains less than `threshold`, in the upper half
/// otherwise. The proportional CPU count is always measured. A threshold
/// <= 0 measures every CPU count.
CpuProfile profile_cpu_points(const core::JobClass& cls, const ProfileGeometry& geo, double threshold = 0.10,
                              double minutes_per_sample = 1.0);

/// Memory grid: process minimum, 50 GB multiples, the proportional share,
/// the dataset size and the full memory, deduplicated and sorted.
std::vector<std::int64_t> memory_axis(const core::JobClass& cls, const ProfileGeometry& geo);

/// Interpolates the measured CPU curve (monotone, piecewise linear) and
/// caps every cell by the analytic cache/storage rate for its memory.
SensitivityMatrix fill_matrix_optimistic(const core::JobClass& cls, const CpuProfile& profile,
                                         const ProfileGeometry& geo);

/// Smallest CPU, then smallest memory, reaching (1 - eps) of the peak.
DemandVector derive_demand_vector(const SensitivityMatrix& matrix, int gpus, double saturation_eps = 0.01);

struct ProfilerOptions {
    double threshold = 0.10;
    double saturation_eps = 0.01;
    double minutes_per_sample = 1.0;
};

struct ProfiledJob {
    SensitivityMatrix matrix;
    DemandVector demand;
    core::Resources proportional;
    double proportional_throughput = 0.0; // W at the proportional cell
    double profiling_minutes = 0.0;
    std::size_t samples = 0;
};

ProfiledJob profile_job(const core::JobClass& cls, int gpus, const core::ServerSpec& server,
                        const core::Resources& cluster_totals, const ProfilerOptions& options = {});

} // namespace synsim::profiler
