#include "synsim/core/types.hpp"

#include "synsim/core/errors.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace synsim::core {

Resources component_min(const Resources& a, const Resources& b) noexcept {
    return {std::min(a.gpus, b.gpus), std::min(a.cpus, b.cpus), std::min(a.mem_mb, b.mem_mb)};
}

Resources component_max(const Resources& a, const Resources& b) noexcept {
    return {std::max(a.gpus, b.gpus), std::max(a.cpus, b.cpus), std::max(a.mem_mb, b.mem_mb)};
}

void ServerSpec::validate() const {
    if (gpus < 1) {
        throw ConfigError(fmt::format("server needs at least one GPU (got {})", gpus));
    }
    if (cpus < gpus) {
        throw ConfigError(fmt::format("server needs cpus >= gpus (got {} < {})", cpus, gpus));
    }
    if (!(mem_gb > 0.0)) {
        throw ConfigError("server memory must be positive");
    }
    if (!(storage_bw > 0.0)) {
        throw ConfigError("server storage bandwidth must be positive");
    }
}

ClusterSpec ClusterSpec::uniform(int count, const ServerSpec& server, double round_minutes) {
    ClusterSpec spec;
    spec.servers.assign(static_cast<std::size_t>(std::max(count, 0)), server);
    spec.round_minutes = round_minutes;
    return spec;
}

Resources ClusterSpec::totals() const noexcept {
    Resources t;
    for (const auto& s : servers) {
        t += s.capacity();
    }
    return t;
}

bool ClusterSpec::homogeneous() const noexcept {
    return std::all_of(servers.begin(), servers.end(),
                       [&](const ServerSpec& s) { return s == servers.front(); });
}

void ClusterSpec::validate() const {
    if (servers.empty()) {
        throw ConfigError("cluster has no servers");
    }
    if (!(round_minutes > 0.0)) {
        throw ConfigError("round length must be positive");
    }
    for (const auto& s : servers) {
        s.validate();
    }
}

std::string_view to_string(Task t) noexcept {
    switch (t) {
    case Task::image: return "image";
    case Task::language: return "language";
    case Task::speech: return "speech";
    }
    return "?";
}

Task parse_task(std::string_view s) {
    if (s == "image") return Task::image;
    if (s == "language") return Task::language;
    if (s == "speech") return Task::speech;
    throw ConfigError(fmt::format("unknown task '{}'", s));
}

void JobClass::validate() const {
    if (!(gpu_rate > 0.0) || !(cpu_rate > 0.0) || !(mb_per_sample > 0.0)) {
        throw ConfigError(fmt::format("job class '{}': rates must be positive", name));
    }
    if (!(dataset_samples > 0.0)) {
        throw ConfigError(fmt::format("job class '{}': empty dataset", name));
    }
    if (min_cpu < 1) {
        throw ConfigError(fmt::format("job class '{}': min_cpu must be >= 1", name));
    }
}

Resources Allocation::total() const noexcept {
    Resources t;
    for (const auto& s : per_server) {
        t += s.res;
    }
    return t;
}

ClusterState::ClusterState(const ClusterSpec& spec) {
    capacity_.reserve(spec.servers.size());
    for (const auto& s : spec.servers) {
        capacity_.push_back(s.capacity());
    }
    free_ = capacity_;
}

bool ClusterState::can_apply(const Allocation& alloc) const noexcept {
    if (running_.contains(alloc.job_id)) {
        return false;
    }
    // Shares on the same server are summed before checking.
    std::map<int, Resources> need;
    for (const auto& share : alloc.per_server) {
        if (share.server < 0 || share.server >= server_count() || !share.res.non_negative()) {
            return false;
        }
        need[share.server] += share.res;
    }
    return std::all_of(need.begin(), need.end(), [&](const auto& kv) {
        return kv.second.fits_in(free_[static_cast<std::size_t>(kv.first)]);
    });
}

void ClusterState::apply(const Allocation& alloc) {
    if (!can_apply(alloc)) {
        throw PlacementError(fmt::format("allocation for job {} does not fit", alloc.job_id));
    }
    for (const auto& share : alloc.per_server) {
        free_[static_cast<std::size_t>(share.server)] -= share.res;
    }
    running_.emplace(alloc.job_id, alloc);
}

void ClusterState::release(JobId job) {
    auto it = running_.find(job);
    if (it == running_.end()) {
        throw PlacementError(fmt::format("job {} holds no allocation", job));
    }
    for (const auto& share : it->second.per_server) {
        free_[static_cast<std::size_t>(share.server)] += share.res;
    }
    running_.erase(it);
    leases_.erase(job);
}

void ClusterState::set_lease(JobId job, bool granted) {
    leases_[job] = granted;
}

Resources ClusterState::total_capacity() const noexcept {
    Resources t;
    for (const auto& c : capacity_) {
        t += c;
    }
    return t;
}

Resources ClusterState::total_free() const noexcept {
    Resources t;
    for (const auto& f : free_) {
        t += f;
    }
    return t;
}

bool ClusterState::conserved() const noexcept {
    std::vector<Resources> used(capacity_.size());
    for (const auto& [id, alloc] : running_) {
        for (const auto& share : alloc.per_server) {
            used[static_cast<std::size_t>(share.server)] += share.res;
        }
    }
    for (std::size_t i = 0; i < capacity_.size(); ++i) {
        if (!(used[i] + free_[i] == capacity_[i]) || !free_[i].non_negative()) {
            return false;
        }
    }
    return true;
}

ClusterState apply_allocation(ClusterState state, const Allocation& alloc) {
    state.apply(alloc);
    return state;
}

ClusterState release_allocation(ClusterState state, const Allocation& alloc) {
    state.release(alloc.job_id);
    return state;
}

} // namespace synsim::core
