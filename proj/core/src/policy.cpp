#include "synsim/policy/policy.hpp"

#include "synsim/core/errors.hpp"

#include <algorithm>
#include <tuple>

#include <fmt/format.h>

namespace synsim::policy {

std::string_view to_string(PolicyKind kind) noexcept {
    switch (kind) {
    case PolicyKind::fifo: return "fifo";
    case PolicyKind::srtf: return "srtf";
    case PolicyKind::las: return "las";
    case PolicyKind::ftf: return "ftf";
    }
    return "?";
}

PolicyKind parse_policy(std::string_view name) {
    if (name == "fifo") return PolicyKind::fifo;
    if (name == "srtf") return PolicyKind::srtf;
    if (name == "las") return PolicyKind::las;
    if (name == "ftf") return PolicyKind::ftf;
    throw ConfigError(fmt::format("unknown policy '{}' (expected fifo, srtf, las or ftf)", name));
}

double priority(const core::Job& job, double now, PolicyKind kind) noexcept {
    switch (kind) {
    case PolicyKind::fifo:
        return job.arrival;
    case PolicyKind::srtf:
        return job.remaining_baseline_minutes();
    case PolicyKind::las:
        return job.attained_service;
    case PolicyKind::ftf: {
        const double isolated = job.total_samples / job.baseline_rate / 60.0;
        const double rho = (now - job.arrival + job.remaining_baseline_minutes()) / isolated;
        return -rho;
    }
    }
    return 0.0;
}

std::vector<const core::Job*> order_queue(std::vector<const core::Job*> jobs, double now, PolicyKind kind) {
    std::vector<std::tuple<double, double, core::JobId, const core::Job*>> keyed;
    keyed.reserve(jobs.size());
    for (const auto* j : jobs) {
        keyed.emplace_back(priority(*j, now, kind), j->arrival, j->id, j);
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a), std::get<2>(a)) <
               std::tie(std::get<0>(b), std::get<1>(b), std::get<2>(b));
    });
    for (std::size_t i = 0; i < keyed.size(); ++i) {
        jobs[i] = std::get<3>(keyed[i]);
    }
    return jobs;
}

} // namespace synsim::policy
