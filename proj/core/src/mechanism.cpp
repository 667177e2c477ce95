#include "synsim/mechanism/mechanism.hpp"

#include "synsim/core/errors.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include <fmt/format.h>

namespace synsim::mechanism {

using core::Allocation;
using core::Resources;
using ServerGpus = std::vector<std::pair<int, int>>;

std::string_view to_string(MechanismKind kind) noexcept {
    switch (kind) {
    case MechanismKind::proportional: return "proportional";
    case MechanismKind::greedy: return "greedy";
    case MechanismKind::tune: return "tune";
    case MechanismKind::opt: return "opt";
    }
    return "?";
}

MechanismKind parse_mechanism(std::string_view name) {
    if (name == "proportional" || name == "prop") {
        return MechanismKind::proportional;
    }
    if (name == "greedy") {
        return MechanismKind::greedy;
    }
    if (name == "tune") {
        return MechanismKind::tune;
    }
    if (name == "opt") {
        return MechanismKind::opt;
    }
    throw ConfigError(fmt::format("unknown mechanism '{}'", name));
}

const Allocation* RoundPlan::find(core::JobId job) const noexcept {
    for (const auto& a : allocations) {
        if (a.job_id == job) {
            return &a;
        }
    }
    return nullptr;
}

int RoundPlan::gpus_used() const noexcept {
    int used = 0;
    for (const auto& a : allocations) {
        used += a.total().gpus;
    }
    return used;
}

std::vector<std::size_t> select_runnable(std::span<const int> ordered_gpu_demands, int free_gpus) {
    std::vector<std::size_t> admitted;
    for (std::size_t i = 0; i < ordered_gpu_demands.size() && free_gpus > 0; ++i) {
        const int g = ordered_gpu_demands[i];
        if (g > 0 && g <= free_gpus) {
            admitted.push_back(i);
            free_gpus -= g;
        }
    }
    return admitted;
}

Resources proportional_on(const Resources& cap, int gpus) noexcept {
    if (cap.gpus <= 0) {
        return {gpus, 0, 0};
    }
    return {gpus, cap.cpus * gpus / cap.gpus, cap.mem_mb * gpus / cap.gpus};
}

namespace {

template <typename T>
void distribute(Allocation& alloc, const ServerGpus& servers, std::int64_t g, std::int64_t amount,
                T Resources::*field) {
    std::int64_t given = 0;
    for (std::size_t i = 0; i < servers.size(); ++i) {
        const std::int64_t share = amount * servers[i].second / g;
        alloc.per_server[i].res.*field = static_cast<T>(share);
        given += share;
    }
    std::int64_t leftover = amount - given;
    for (std::size_t i = 0; i < servers.size() && leftover > 0; ++i) {
        if ((amount * servers[i].second) % g != 0) {
            alloc.per_server[i].res.*field += 1;
            --leftover;
        }
    }
}

} // namespace

Allocation split_allocation(core::JobId job, const Resources& total, std::span<const std::pair<int, int>> server_gpus) {
    ServerGpus servers(server_gpus.begin(), server_gpus.end());
    std::sort(servers.begin(), servers.end());
    std::int64_t g = 0;
    for (const auto& [s, k] : servers) {
        g += k;
    }
    if (g <= 0) {
        throw InternalError(fmt::format("job {} split over zero GPUs", job));
    }

    Allocation alloc{job, {}};
    alloc.per_server.reserve(servers.size());
    for (const auto& [s, k] : servers) {
        alloc.per_server.push_back({s, {k, 0, 0}});
    }

    distribute(alloc, servers, g, total.cpus, &Resources::cpus);
    distribute(alloc, servers, g, total.mem_mb, &Resources::mem_mb);
    return alloc;
}

namespace {

constexpr int kNoServer = -1;

class Workspace {
public:
    explicit Workspace(const core::ClusterState& state) {
        for (int i = 0; i < state.server_count(); ++i) {
            cap_.push_back(state.capacity(i));
            free_.push_back(state.free(i));
        }
    }

    [[nodiscard]] int servers() const noexcept { return static_cast<int>(free_.size()); }
    [[nodiscard]] const Resources& free(int i) const { return free_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const Resources& cap(int i) const { return cap_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const std::vector<Resources>& free_all() const noexcept { return free_; }

    [[nodiscard]] bool fits(const Allocation& a) const {
        return std::all_of(a.per_server.begin(), a.per_server.end(), [&](const core::ServerShare& s) {
            return s.server >= 0 && s.server < servers() && s.res.fits_in(free(s.server));
        });
    }
    void take(const Allocation& a) {
        for (const auto& s : a.per_server) {
            free_[static_cast<std::size_t>(s.server)] -= s.res;
        }
    }
    void give(const Allocation& a) {
        for (const auto& s : a.per_server) {
            free_[static_cast<std::size_t>(s.server)] += s.res;
        }
    }

private:
    std::vector<Resources> cap_;
    std::vector<Resources> free_;
};

enum class Fit { best, first };

// Per-server resources a split needs, rounded up: an upper bound on what
// split_allocation hands any one server.
Resources ceil_share(const Resources& total, int k, int g) {
    auto up = [&](std::int64_t v) { return (v * k + g - 1) / g; };
    return {k, static_cast<int>(up(total.cpus)), up(total.mem_mb)};
}

ServerGpus servers_of(const Allocation& a) {
    ServerGpus out;
    for (const auto& s : a.per_server) {
        out.emplace_back(s.server, s.res.gpus);
    }
    return out;
}

struct Locator {
    const Workspace& ws;
    const RunnableJob& job;
    Resources total;
    Fit fit;
    bool per_server_proportional;

    [[nodiscard]] Resources need_on(int server, int k) const {
        return per_server_proportional ? proportional_on(ws.cap(server), k) : ceil_share(total, k, job.gpus);
    }

    [[nodiscard]] Allocation build(const ServerGpus& set) const {
        if (!per_server_proportional) {
            return split_allocation(job.id, total, set);
        }
        ServerGpus sorted = set;
        std::sort(sorted.begin(), sorted.end());
        Allocation a{job.id, {}};
        for (const auto& [s, k] : sorted) {
            a.per_server.push_back({s, proportional_on(ws.cap(s), k)});
        }
        return a;
    }

    [[nodiscard]] std::optional<Allocation> previous() const {
        if (!job.previous || job.previous->per_server.empty()) {
            return std::nullopt;
        }
        const auto set = servers_of(*job.previous);
        int g = 0;
        for (const auto& [s, k] : set) {
            if (s < 0 || s >= ws.servers()) {
                return std::nullopt;
            }
            g += k;
        }
        if (g != job.gpus) {
            return std::nullopt;
        }
        auto a = build(set);
        if (ws.fits(a)) {
            return a;
        }
        return std::nullopt;
    }

    [[nodiscard]] int single_server() const {
        int chosen = kNoServer;
        for (int i = 0; i < ws.servers(); ++i) {
            if (!need_on(i, job.gpus).fits_in(ws.free(i))) {
                continue;
            }
            if (fit == Fit::first) {
                return i;
            }
            if (chosen == kNoServer) {
                chosen = i;
                continue;
            }
            const auto& a = ws.free(i);
            const auto& b = ws.free(chosen);
            if (std::tie(a.gpus, a.cpus, a.mem_mb) < std::tie(b.gpus, b.cpus, b.mem_mb)) {
                chosen = i;
            }
        }
        return chosen;
    }

    // Fewest servers that jointly host the job: each server takes as many
    // GPUs as its CPU and memory allow, largest hosts first.
    [[nodiscard]] std::optional<ServerGpus> spread() const {
        std::vector<std::pair<int, int>> hosts; // (k_max, server)
        for (int i = 0; i < ws.servers(); ++i) {
            for (int k = std::min(ws.free(i).gpus, job.gpus - 1); k >= 1; --k) {
                if (need_on(i, k).fits_in(ws.free(i))) {
                    hosts.emplace_back(k, i);
                    break;
                }
            }
        }
        std::sort(hosts.begin(), hosts.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        ServerGpus set;
        int remaining = job.gpus;
        for (const auto& [k, s] : hosts) {
            if (remaining == 0) {
                break;
            }
            const int take = std::min(k, remaining);
            set.emplace_back(s, take);
            remaining -= take;
        }
        if (remaining > 0) {
            return std::nullopt;
        }
        return set;
    }

    [[nodiscard]] std::optional<Allocation> locate() const {
        if (auto a = previous()) {
            return a;
        }
        if (const int s = single_server(); s != kNoServer) {
            return build({{s, job.gpus}});
        }
        if (job.gpus > 1) {
            if (auto set = spread()) {
                auto a = build(*set);
                if (ws.fits(a)) {
                    return a;
                }
            }
        }
        return std::nullopt;
    }
};

// GPU-only choice of servers for a job: one server with enough free GPUs
// (fewest free first), else the fewest servers by free GPU count.
std::optional<ServerGpus> gpu_only_servers(const Workspace& ws, int gpus) {
    int chosen = kNoServer;
    for (int i = 0; i < ws.servers(); ++i) {
        if (ws.free(i).gpus >= gpus && (chosen == kNoServer || ws.free(i).gpus < ws.free(chosen).gpus)) {
            chosen = i;
        }
    }
    if (chosen != kNoServer) {
        return ServerGpus{{chosen, gpus}};
    }
    std::vector<std::pair<int, int>> hosts;
    for (int i = 0; i < ws.servers(); ++i) {
        if (ws.free(i).gpus > 0) {
            hosts.emplace_back(ws.free(i).gpus, i);
        }
    }
    std::sort(hosts.begin(), hosts.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    ServerGpus set;
    int remaining = gpus;
    for (const auto& [k, s] : hosts) {
        if (remaining == 0) {
            break;
        }
        const int take = std::min(k, remaining);
        set.emplace_back(s, take);
        remaining -= take;
    }
    if (remaining > 0) {
        return std::nullopt;
    }
    return set;
}

RoundPlan in_input_order(std::span<const RunnableJob> jobs, std::vector<std::optional<Allocation>>& placed,
                         std::vector<core::JobId> downgrades) {
    RoundPlan plan;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (placed[i]) {
            plan.allocations.push_back(std::move(*placed[i]));
        } else {
            plan.skipped.push_back(jobs[i].id);
        }
    }
    std::sort(downgrades.begin(), downgrades.end());
    plan.downgrades = std::move(downgrades);
    return plan;
}

} // namespace

RoundPlan place_proportional(std::span<const RunnableJob> jobs, const core::ClusterState& state) {
    Workspace ws(state);
    std::vector<std::optional<Allocation>> placed(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        Locator loc{ws, jobs[i], jobs[i].proportional, Fit::best, true};
        placed[i] = loc.locate();
        if (placed[i]) {
            ws.take(*placed[i]);
        }
    }
    return in_input_order(jobs, placed, {});
}

RoundPlan place_greedy(std::span<const RunnableJob> jobs, const core::ClusterState& state) {
    Workspace ws(state);
    std::vector<std::optional<Allocation>> placed(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        Locator loc{ws, jobs[i], jobs[i].demand, Fit::first, false};
        placed[i] = loc.locate();
        if (placed[i]) {
            ws.take(*placed[i]);
        }
    }
    return in_input_order(jobs, placed, {});
}

namespace {

// Lowest level at or under `level` that still matches the proportional
// share's profiled throughput; never above the proportional share.
Resources safe_level(const RunnableJob& job, const Resources& level) {
    Resources low = core::component_min(level, job.proportional);
    low.gpus = job.gpus;
    return job.rate(low) >= job.rate(job.proportional) ? low : job.proportional;
}

struct Held {
    Allocation alloc;
    Resources level;
    std::size_t rank = 0; // placement order
};

// Single-server jobs step up one axis notch at a time into leftover
// capacity, always taking the step with the largest throughput gain.
void redistribute(Workspace& ws, std::span<const RunnableJob> jobs, std::vector<std::optional<Held>>& held) {
    std::vector<std::size_t> by_rank;
    for (std::size_t i = 0; i < held.size(); ++i) {
        if (held[i] && held[i]->alloc.single_server() && jobs[i].matrix && !jobs[i].matrix->empty()) {
            by_rank.push_back(i);
        }
    }
    std::sort(by_rank.begin(), by_rank.end(), [&](std::size_t a, std::size_t b) { return held[a]->rank < held[b]->rank; });

    for (int s = 0; s < ws.servers(); ++s) {
        while (true) {
            double best_gain = 0.0;
            std::size_t best_job = 0;
            Resources best_level;
            bool found = false;
            for (auto i : by_rank) {
                auto& h = *held[i];
                if (h.alloc.per_server.front().server != s) {
                    continue;
                }
                const auto& m = *jobs[i].matrix;
                const auto ci = m.cpu_floor_index(h.level.cpus);
                const auto mi = m.mem_floor_index(h.level.mem_mb);
                if (ci == profiler::SensitivityMatrix::npos || mi == profiler::SensitivityMatrix::npos) {
                    continue;
                }
                const bool cpu_up = ci + 1 < m.rows();
                const bool mem_up = mi + 1 < m.cols();
                const int next_c = cpu_up ? m.cpu_axis()[ci + 1] : h.level.cpus;
                const std::int64_t next_m = mem_up ? m.mem_axis_mb()[mi + 1] : h.level.mem_mb;
                const double now = jobs[i].rate(h.level);
                const Resources steps[] = {
                    {h.level.gpus, next_c, h.level.mem_mb},
                    {h.level.gpus, h.level.cpus, next_m},
                    {h.level.gpus, next_c, next_m},
                };
                for (const auto& cand : steps) {
                    if (cand == h.level) {
                        continue;
                    }
                    const Resources delta = cand - h.level;
                    if (!delta.fits_in(ws.free(s))) {
                        continue;
                    }
                    const double gain = jobs[i].rate(cand) - now;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_job = i;
                        best_level = cand;
                        found = true;
                    }
                }
            }
            if (!found) {
                break;
            }
            auto& h = *held[best_job];
            ws.give(h.alloc);
            h.level = best_level;
            h.alloc.per_server.front().res = best_level;
            ws.take(h.alloc);
        }
    }
}

} // namespace

RoundPlan place_tune(std::span<const RunnableJob> jobs, const core::ClusterState& state, const TuneOptions& options) {
    Workspace ws(state);
    std::vector<std::size_t> order(jobs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = jobs[a].demand;
        const auto& y = jobs[b].demand;
        return std::tie(jobs[a].gpus, x.cpus, x.mem_mb) > std::tie(jobs[b].gpus, y.cpus, y.mem_mb);
    });

    std::vector<std::optional<Held>> held(jobs.size());
    std::vector<core::JobId> downgrades;
    std::size_t rank = 0;

    for (auto idx : order) {
        const auto& job = jobs[idx];
        Resources level = job.demand;
        level.gpus = job.gpus;
        if (job.rate(level) < job.rate(job.proportional)) {
            level = core::component_max(level, job.proportional);
        }
        const Resources intended = level;

        auto alloc = Locator{ws, job, level, Fit::best, false}.locate();
        if (!alloc) {
            const Resources safe = safe_level(job, level);
            if (!(safe == level)) {
                alloc = Locator{ws, job, safe, Fit::best, false}.locate();
                if (alloc) {
                    level = safe;
                    downgrades.push_back(job.id);
                }
            }
        }

        if (!alloc) {
            // Claim GPUs alone and pull residents down toward their safe
            // level until the job's safe level fits beside them.
            const Resources safe = safe_level(job, level);
            const auto set = gpu_only_servers(ws, job.gpus);
            if (!set) {
                continue;
            }
            const Allocation mine = split_allocation(job.id, safe, *set);

            std::vector<std::size_t> victims;
            for (std::size_t i = 0; i < held.size(); ++i) {
                if (!held[i]) {
                    continue;
                }
                const bool shares = std::any_of(set->begin(), set->end(), [&](const auto& sk) {
                    return std::any_of(held[i]->alloc.per_server.begin(), held[i]->alloc.per_server.end(),
                                       [&](const core::ServerShare& sh) { return sh.server == sk.first; });
                });
                if (shares && !(safe_level(jobs[i], held[i]->level) == held[i]->level)) {
                    victims.push_back(i);
                }
            }
            auto surplus = [&](std::size_t i) {
                const auto& lv = held[i]->level;
                const auto& p = jobs[i].proportional;
                return std::make_tuple(std::max(0, lv.cpus - p.cpus), std::max<std::int64_t>(0, lv.mem_mb - p.mem_mb));
            };
            // Cheapest first: throughput lost per core freed.
            auto cost = [&](std::size_t i) {
                const auto& lv = held[i]->level;
                const Resources lower = safe_level(jobs[i], lv);
                const double loss = jobs[i].rate(lv) - jobs[i].rate(lower);
                return loss / static_cast<double>(std::max(1, lv.cpus - lower.cpus));
            };
            std::stable_sort(victims.begin(), victims.end(), [&](std::size_t a, std::size_t b) {
                const double ca = cost(a);
                const double cb = cost(b);
                if (ca != cb) {
                    return ca < cb;
                }
                const auto sa = surplus(a);
                const auto sb = surplus(b);
                if (sa != sb) {
                    return sa > sb;
                }
                return held[a]->rank < held[b]->rank;
            });

            Workspace trial = ws;
            std::vector<std::pair<std::size_t, Allocation>> moved;
            auto settled = [&] {
                return std::all_of(trial.free_all().begin(), trial.free_all().end(),
                                   [](const Resources& r) { return r.non_negative(); }) &&
                       trial.fits(mine);
            };
            bool ok = settled();
            for (std::size_t v = 0; v < victims.size() && !ok; ++v) {
                const auto i = victims[v];
                const Resources lower = safe_level(jobs[i], held[i]->level);
                Allocation next = split_allocation(jobs[i].id, lower, servers_of(held[i]->alloc));
                trial.give(held[i]->alloc);
                trial.take(next);
                moved.emplace_back(i, std::move(next));
                ok = settled();
            }
            if (!ok) {
                // Only reachable when per-GPU shares do not divide evenly.
                continue;
            }
            ws = trial;
            for (auto& [i, next] : moved) {
                held[i]->level = next.total();
                held[i]->alloc = std::move(next);
                downgrades.push_back(jobs[i].id);
            }
            alloc = mine;
            if (!(safe == intended)) {
                downgrades.push_back(job.id);
            }
            level = safe;
        }
        ws.take(*alloc);
        held[idx] = Held{std::move(*alloc), level, rank++};
    }

    if (options.redistribute_surplus) {
        redistribute(ws, jobs, held);
    }

    std::vector<std::optional<Allocation>> placed(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (held[i]) {
            placed[i] = std::move(held[i]->alloc);
        }
    }
    std::sort(downgrades.begin(), downgrades.end());
    downgrades.erase(std::unique(downgrades.begin(), downgrades.end()), downgrades.end());
    return in_input_order(jobs, placed, std::move(downgrades));
}

RoundPlan plan_round(MechanismKind kind, std::span<const RunnableJob> jobs, const core::ClusterState& state) {
    switch (kind) {
    case MechanismKind::proportional: return place_proportional(jobs, state);
    case MechanismKind::greedy: return place_greedy(jobs, state);
    case MechanismKind::tune: return place_tune(jobs, state);
    case MechanismKind::opt: break;
    }
    throw InternalError("plan_round does not run the opt mechanism");
}

RoundPlan plan_round_with_leases(MechanismKind kind, std::span<const RunnableJob> jobs,
                                 const core::ClusterState& state) {
    RoundPlan fresh = plan_round(kind, jobs, state);

    core::ClusterState held = state;
    RoundPlan kept;
    std::vector<RunnableJob> rest;
    for (const auto& j : jobs) {
        if (j.previous && j.previous->total().gpus == j.gpus && held.can_apply(*j.previous)) {
            held.apply(*j.previous);
            kept.allocations.push_back(*j.previous);
        } else {
            rest.push_back(j);
        }
    }
    if (kept.allocations.empty()) {
        return fresh;
    }
    for (const auto& a : kept.allocations) {
        const auto& j = *std::find_if(jobs.begin(), jobs.end(), [&](const RunnableJob& r) { return r.id == a.job_id; });
        if (j.rate(a.total()) < j.rate(j.proportional)) {
            return fresh; // a lease may not hold a job below its fair share
        }
    }
    RoundPlan others = plan_round(kind, rest, held);
    RoundPlan sticky;
    for (const auto& j : jobs) {
        if (const auto* a = kept.find(j.id)) {
            sticky.allocations.push_back(*a);
        } else if (const auto* b = others.find(j.id)) {
            sticky.allocations.push_back(*b);
        } else {
            sticky.skipped.push_back(j.id);
        }
    }
    sticky.downgrades = others.downgrades;

    if (sticky.allocations.size() < fresh.allocations.size() || sticky.gpus_used() < fresh.gpus_used()) {
        return fresh;
    }
    const double f = plan_throughput(fresh, jobs);
    const double k = plan_throughput(sticky, jobs);
    return k >= f * (1.0 - 1e-12) ? sticky : fresh;
}

double plan_throughput(const RoundPlan& plan, std::span<const RunnableJob> jobs) {
    double sum = 0.0;
    for (const auto& a : plan.allocations) {
        for (const auto& j : jobs) {
            if (j.id == a.job_id) {
                sum += j.rate(a.total());
                break;
            }
        }
    }
    return sum;
}

} // namespace synsim::mechanism
