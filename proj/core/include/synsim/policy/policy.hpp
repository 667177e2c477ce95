#pragma once

#include "synsim/core/types.hpp"

#include <string_view>
#include <vector>

namespace synsim::policy {

enum class PolicyKind { fifo, srtf, las, ftf };

std::string_view to_string(PolicyKind kind) noexcept;
/// Accepts "fifo", "srtf", "las", "ftf" (case-sensitive). Throws ConfigError.
PolicyKind parse_policy(std::string_view name);

/// Sort key, lower runs first.
///  - FIFO: arrival time.
///  - SRTF: remaining minutes at the GPU-proportional rate.
///  - LAS:  attained service in GPU-minutes.
///  - FTF:  -rho, rho = (time in system + remaining proportional time) /
///          (proportional run time), so the job furthest behind goes first.
/// Rates are always the proportional-share ones, so whatever the mechanism
/// gives a job never reorders the queue.
double priority(const core::Job& job, double now, PolicyKind kind) noexcept;

/// Stable order by (priority, arrival, id). Input order does not matter.
std::vector<const core::Job*> order_queue(std::vector<const core::Job*> jobs, double now, PolicyKind kind);

} // namespace synsim::policy
