#pragma once

// Seeded round and instance generators shared by the unit and acceptance tests.

#include "synsim/core/oracle.hpp"
#include "synsim/core/presets.hpp"
#include "synsim/mechanism/mechanism.hpp"
#include "synsim/optimizer/optimizer.hpp"
#include "synsim/profiler/profiler.hpp"
#include "synsim/workload/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iterator>
#include <random>
#include <utility>
#include <vector>

namespace synsim::testing {

/// Profiles kept alive alongside the runnable jobs that point into them.
struct Round {
    core::ClusterSpec spec;
    core::ClusterState state;
    std::deque<profiler::ProfiledJob> profiles;
    std::vector<const core::JobClass*> classes;
    std::vector<mechanism::RunnableJob> jobs;
};

inline int pick(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline const core::JobClass& draw_class(std::mt19937_64& rng, const workload::Split& split) {
    const double u = workload::unit_uniform(rng) * 100.0;
    core::Task task = core::Task::speech;
    if (u < split.image) {
        task = core::Task::image;
    } else if (u < split.image + split.language) {
        task = core::Task::language;
    }
    if (split.share(task) <= 0.0) {
        task = split.image > 0.0 ? core::Task::image : (split.language > 0.0 ? core::Task::language : core::Task::speech);
    }
    static const auto image = core::presets_for(core::Task::image);
    static const auto language = core::presets_for(core::Task::language);
    static const auto speech = core::presets_for(core::Task::speech);
    const auto& pool = task == core::Task::image ? image : (task == core::Task::language ? language : speech);
    return pool[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(pool.size()) - 1))];
}

inline workload::Split random_split(std::mt19937_64& rng) {
    static const workload::Split splits[] = {
        {20, 70, 10}, {50, 0, 50}, {100, 0, 0}, {0, 100, 0}, {0, 0, 100}, {33, 33, 34}, {60, 20, 20},
    };
    return splits[pick(rng, 0, static_cast<int>(std::size(splits)) - 1)];
}

/// A full round on an empty uniform cluster: jobs are drawn until their GPU
/// demand exceeds the cluster, then admitted with select_runnable.
inline Round make_round(std::uint64_t seed, int servers, const workload::Split& split, int max_jobs = 64,
                        const workload::GpuDemandTable& gpus = workload::default_gpu_demands(),
                        const core::ServerSpec& server = core::reference_server()) {
    std::mt19937_64 rng(seed);
    Round r;
    r.spec = core::ClusterSpec::uniform(servers, server);
    r.state = core::ClusterState(r.spec);
    const auto totals = r.spec.totals();

    std::vector<int> demands;
    std::vector<const core::JobClass*> drawn;
    int asked = 0;
    while (asked <= totals.gpus && static_cast<int>(demands.size()) < max_jobs) {
        const auto& cls = draw_class(rng, split);
        int g = gpus.back().first;
        double u = workload::unit_uniform(rng);
        for (const auto& [k, p] : gpus) {
            if (u < p) {
                g = k;
                break;
            }
            u -= p;
        }
        g = std::min(g, totals.gpus);
        demands.push_back(g);
        drawn.push_back(&cls);
        asked += g;
    }
    const auto admitted = mechanism::select_runnable(demands, totals.gpus);
    for (auto a : admitted) {
        const auto& cls = *drawn[a];
        r.profiles.push_back(profiler::profile_job(cls, demands[a], server, totals));
        const auto& p = r.profiles.back();
        mechanism::RunnableJob j;
        j.id = static_cast<core::JobId>(r.jobs.size());
        j.gpus = demands[a];
        j.demand = p.demand.resources();
        j.proportional = p.proportional;
        j.matrix = &p.matrix;
        r.jobs.push_back(j);
        r.classes.push_back(&cls);
    }
    return r;
}

/// Small ideal-ILP instances on a synthetic grid of `cpu_steps` x `mem_steps`
/// cells per job. Values are concave-ish and non-decreasing in both axes.
struct SyntheticInstance {
    std::deque<profiler::SensitivityMatrix> matrices;
    optimizer::OptInstance instance;
};

inline SyntheticInstance make_synthetic(std::uint64_t seed, int jobs, int cpu_steps, int mem_steps) {
    std::mt19937_64 rng(seed);
    SyntheticInstance s;
    const int servers = pick(rng, 1, 2);
    const core::Resources server{8, 24, core::gb_to_mb(500.0)};
    for (int i = 0; i < servers; ++i) {
        s.instance.servers.push_back(server);
        s.instance.totals += server;
    }
    int used_gpus = 0;
    for (int j = 0; j < jobs; ++j) {
        std::vector<int> cpu_axis;
        for (int c = 1; c <= cpu_steps; ++c) {
            cpu_axis.push_back(c * 24 / cpu_steps);
        }
        std::vector<std::int64_t> mem_axis;
        for (int m = 1; m <= mem_steps; ++m) {
            mem_axis.push_back(core::gb_to_mb(500.0) * m / mem_steps);
        }
        const double gpu_cap = 100.0 + 900.0 * workload::unit_uniform(rng);
        const double per_cpu = gpu_cap / (1.0 + 23.0 * workload::unit_uniform(rng));
        const double mem_floor = 0.2 + 0.8 * workload::unit_uniform(rng);
        std::vector<double> values;
        for (int c : cpu_axis) {
            for (std::size_t m = 0; m < mem_axis.size(); ++m) {
                const double mem_frac = static_cast<double>(m + 1) / static_cast<double>(mem_axis.size());
                const double cache = std::min(1.0, mem_floor + (1.0 - mem_floor) * mem_frac);
                values.push_back(std::floor(std::min(gpu_cap, per_cpu * c) * cache));
            }
        }
        s.matrices.emplace_back(cpu_axis, mem_axis, values);
        optimizer::OptJob job;
        job.id = j;
        const int left = s.instance.totals.gpus - used_gpus - (jobs - 1 - j);
        job.gpus = pick(rng, 1, std::max(1, std::min(4, left)));
        used_gpus += job.gpus;
        job.matrix = &s.matrices.back();
        // Proportional cell: 3 CPUs per GPU and 62.5 GB per GPU, floored to the grid.
        job.baseline = job.matrix->value_at(3 * job.gpus, core::gb_to_mb(62.5 * job.gpus));
        s.instance.jobs.push_back(job);
    }
    return s;
}

} // namespace synsim::testing
