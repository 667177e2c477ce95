#pragma once

#include "synsim/core/types.hpp"

namespace synsim::core {

/// Storage-fetch rate (samples/s) when `mem_gb` of the dataset is cached.
/// Infinite once the whole dataset fits.
double disk_rate(const JobClass& cls, double mem_gb, double storage_bw) noexcept;

/// Ground-truth training throughput in samples/s: the slowest of GPU compute,
/// CPU pre-processing and storage fetch through a fixed-hit-ratio cache.
double oracle_throughput(const JobClass& cls, int gpus, int cpus, double mem_gb, double storage_bw) noexcept;

inline double oracle_throughput(const JobClass& cls, const Resources& r, double storage_bw) noexcept {
    return oracle_throughput(cls, r.gpus, r.cpus, r.mem_gb(), storage_bw);
}

/// GPU-proportional CPU/memory for `gpus` GPUs on one server. CPU is floored
/// to whole cores. Throws DemandError unless 1 <= gpus <= server.gpus.
Resources proportional_share(const ServerSpec& server, int gpus);

/// Proportional share for a job that may span several identical servers.
Resources proportional_total(const ServerSpec& server, int gpus);

} // namespace synsim::core
