#include "synsim/core/oracle.hpp"

#include "synsim/core/errors.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <limits>

namespace synsim::core {

double disk_rate(const JobClass& cls, double mem_gb, double storage_bw) noexcept {
    const double hit = std::clamp(mem_gb / cls.dataset_gb(), 0.0, 1.0);
    if (hit >= 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    const double mb_per_s = storage_bw * static_cast<double>(kMbPerGb);
    return mb_per_s / (cls.mb_per_sample * (1.0 - hit));
}

double oracle_throughput(const JobClass& cls, int gpus, int cpus, double mem_gb, double storage_bw) noexcept {
    const double gpu_bound = static_cast<double>(gpus) * cls.gpu_rate;
    const double cpu_bound = static_cast<double>(cpus) * cls.cpu_rate;
    return std::min({gpu_bound, cpu_bound, disk_rate(cls, mem_gb, storage_bw)});
}

Resources proportional_share(const ServerSpec& server, int gpus) {
    if (gpus < 1 || gpus > server.gpus) {
        throw DemandError(fmt::format("{} GPUs requested on a {}-GPU server", gpus, server.gpus));
    }
    return proportional_total(server, gpus);
}

Resources proportional_total(const ServerSpec& server, int gpus) {
    if (gpus < 1) {
        throw DemandError(fmt::format("invalid GPU demand {}", gpus));
    }
    const auto cap = server.capacity();
    return {gpus,
            static_cast<int>(static_cast<std::int64_t>(cap.cpus) * gpus / cap.gpus),
            cap.mem_mb * gpus / cap.gpus};
}

} // namespace synsim::core
