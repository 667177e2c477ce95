#include "synsim/optimizer/optimizer.hpp"

#include "synsim/core/errors.hpp"
#include "synsim/core/oracle.hpp"
#include "synsim/optimizer/packing.hpp"
#include "synsim/optimizer/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace synsim::optimizer {

using core::Resources;

OptInstance OptInstance::from_runnable(std::span<const mechanism::RunnableJob> jobs, const core::ClusterState& state) {
    OptInstance inst;
    for (const auto& j : jobs) {
        inst.jobs.push_back({j.id, j.gpus, j.matrix, j.rate(j.proportional)});
    }
    for (int i = 0; i < state.server_count(); ++i) {
        inst.servers.push_back(state.free(i));
        inst.totals += state.free(i);
    }
    return inst;
}

Resources MachineType::capacity() const noexcept {
    const Resources one = server.capacity();
    return {one.gpus * count, one.cpus * count, one.mem_mb * count};
}

namespace {

// Grid cells at or above `floor`, CPU-major then memory, as packing options.
void append_cells(std::vector<PackingOption>& out, const profiler::SensitivityMatrix& m, int type, int gpus,
                  double floor, const Resources& limit) {
    for (std::size_t ci = 0; ci < m.rows(); ++ci) {
        for (std::size_t mi = 0; mi < m.cols(); ++mi) {
            const double w = m.at(ci, mi);
            const Resources use{gpus, m.cpu_axis()[ci], m.mem_axis_mb()[mi]};
            if (w < floor || !use.fits_in(limit)) {
                continue;
            }
            out.push_back({type, use, w, out.size()});
        }
    }
}

Cell to_cell(const PackingOption& o) {
    return {o.use.cpus, o.use.mem_mb, o.value};
}

} // namespace

IlpSolution solve_ideal_ilp(const OptInstance& instance, const IlpOptions& options) {
    PackingProblem p;
    p.capacity = {instance.totals};
    p.node_limit = options.node_limit;
    Resources per_server{};
    for (const auto& s : instance.servers) {
        per_server = core::component_max(per_server, s);
    }
    for (const auto& j : instance.jobs) {
        if (j.matrix == nullptr || j.matrix->empty()) {
            throw InternalError(fmt::format("job {} has no sensitivity matrix", j.id));
        }
        Resources limit = instance.totals;
        if (options.cap_to_servers && per_server.gpus > 0) {
            const int k = (j.gpus + per_server.gpus - 1) / per_server.gpus;
            limit = core::component_min(limit, Resources{per_server.gpus * k, per_server.cpus * k, per_server.mem_mb * k});
        }
        auto& opts = p.jobs.emplace_back();
        append_cells(opts, *j.matrix, 0, j.gpus, j.baseline, limit);
    }
    const auto r = solve_packing(p);
    IlpSolution out;
    out.nodes = r.nodes;
    out.proven_optimal = r.proven_optimal;
    if (!r.feasible) {
        if (r.proven_optimal) {
            throw InternalError("ideal ILP infeasible: a proportional cell exceeds the cluster totals");
        }
        return out;
    }
    out.feasible = true;
    out.objective = r.objective;
    for (std::size_t j = 0; j < p.jobs.size(); ++j) {
        out.cells.push_back(to_cell(p.jobs[j][static_cast<std::size_t>(r.choice[j])]));
    }
    return out;
}

PlacementSolution solve_placement_lp(const OptInstance& instance, const IlpSolution& cells) {
    const std::size_t n = instance.jobs.size();
    const std::size_t s = instance.servers.size();
    if (cells.cells.size() != n) {
        throw InternalError("placement needs one chosen cell per job");
    }
    PlacementSolution out;
    if (n == 0) {
        out.feasible = true;
        out.x.assign(s, {});
        return out;
    }
    LinearProgram lp(s * n, false);
    auto var = [n](std::size_t i, std::size_t j) { return i * n + j; };
    for (std::size_t v = 0; v < s * n; ++v) {
        lp.objective[v] = 1.0;
    }
    for (std::size_t i = 0; i < s; ++i) {
        std::vector<double> g(s * n, 0.0);
        std::vector<double> c(s * n, 0.0);
        std::vector<double> m(s * n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            g[var(i, j)] = instance.jobs[j].gpus;
            c[var(i, j)] = cells.cells[j].cpus;
            m[var(i, j)] = static_cast<double>(cells.cells[j].mem_mb);
        }
        lp.add_row(std::move(g), Sense::le, instance.servers[i].gpus);
        lp.add_row(std::move(c), Sense::le, instance.servers[i].cpus);
        lp.add_row(std::move(m), Sense::le, static_cast<double>(instance.servers[i].mem_mb));
    }
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> row(s * n, 0.0);
        for (std::size_t i = 0; i < s; ++i) {
            row[var(i, j)] = 1.0;
        }
        lp.add_row(std::move(row), Sense::ge, 1.0);
    }
    const auto r = solve_lp(lp);
    if (r.status != LpStatus::optimal) {
        return out;
    }
    constexpr double kSnap = 1e-9;
    out.feasible = true;
    out.x.assign(s, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        bool split = false;
        for (std::size_t i = 0; i < s; ++i) {
            double v = r.x[var(i, j)];
            if (v < kSnap) {
                v = 0.0;
            } else if (std::abs(v - 1.0) < kSnap) {
                v = 1.0;
            }
            out.x[i][j] = v;
            split = split || (v > 0.0 && v < 1.0);
        }
        if (split) {
            out.fragmented.push_back(instance.jobs[j].id);
        }
    }
    return out;
}

double default_fair_share(const HeteroJob& job, std::span<const MachineType> types) {
    double fair = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < types.size() && t < job.per_type.size(); ++t) {
        const auto* m = job.per_type[t];
        if (m == nullptr || job.gpus > types[t].server.gpus) {
            continue;
        }
        fair = std::min(fair, m->value_at(core::proportional_total(types[t].server, job.gpus)));
    }
    return std::isfinite(fair) ? fair : 0.0;
}

namespace {

struct HeteroProblem {
    PackingProblem packing;
    std::vector<Resources> base_used;
};

HeteroProblem build_hetero(const HeteroInstance& inst, const IlpOptions& options) {
    HeteroProblem hp;
    hp.packing.node_limit = options.node_limit;
    hp.base_used.assign(inst.types.size(), Resources{});
    for (std::size_t t = 0; t < inst.types.size(); ++t) {
        if (t < inst.used.size()) {
            hp.base_used[t] = inst.used[t];
        }
        hp.packing.capacity.push_back(inst.types[t].capacity() - hp.base_used[t]);
    }
    for (const auto& j : inst.jobs) {
        auto& opts = hp.packing.jobs.emplace_back();
        for (std::size_t t = 0; t < inst.types.size() && t < j.per_type.size(); ++t) {
            if (j.per_type[t] == nullptr) {
                continue;
            }
            append_cells(opts, *j.per_type[t], static_cast<int>(t), j.gpus, j.fair, hp.packing.capacity[t]);
        }
    }
    return hp;
}

HeteroSolution assemble(const HeteroProblem& hp, const PackingResult& r) {
    HeteroSolution out;
    out.proven_optimal = r.proven_optimal;
    out.used = hp.base_used;
    const std::size_t n = hp.packing.jobs.size();
    out.choices.assign(n, HeteroChoice{});
    if (!r.feasible) {
        return out;
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (r.choice[j] < 0) {
            continue;
        }
        const auto& o = hp.packing.jobs[j][static_cast<std::size_t>(r.choice[j])];
        out.choices[j] = {o.type, to_cell(o)};
        out.objective += o.value;
        out.assigned_gpus += o.use.gpus;
        out.used[static_cast<std::size_t>(o.type)] += o.use;
    }
    return out;
}

} // namespace

HeteroSolution solve_hetero_ilp(const HeteroInstance& instance, const IlpOptions& options) {
    auto hp = build_hetero(instance, options);
    auto all = solve_packing(hp.packing);
    if (all.feasible) {
        return assemble(hp, all);
    }

    // Some job cannot be placed without crossing types: first the most
    // GPUs, then the best throughput among assignments reaching it.
    PackingProblem gpus_only = hp.packing;
    gpus_only.allow_unassigned = true;
    for (auto& opts : gpus_only.jobs) {
        for (auto& o : opts) {
            o.value = o.use.gpus;
        }
    }
    const auto most = solve_packing(gpus_only);
    hp.packing.allow_unassigned = true;
    hp.packing.min_assigned_gpus = most.feasible ? static_cast<int>(std::lround(most.objective)) : 0;
    auto best = solve_packing(hp.packing);
    auto out = assemble(hp, best);
    out.proven_optimal = out.proven_optimal && most.proven_optimal && all.proven_optimal;
    return out;
}

HeteroSolution refill_unassigned(const HeteroInstance& instance, HeteroSolution solution,
                                 std::span<const HeteroJob> queue, const IlpOptions& options) {
    std::vector<HeteroJob> pool = instance.jobs;
    pool.insert(pool.end(), queue.begin(), queue.end());
    solution.choices.resize(pool.size());
    if (solution.used.empty()) {
        solution.used.assign(instance.types.size(), Resources{});
    }

    while (true) {
        int free_gpus = 0;
        for (std::size_t t = 0; t < instance.types.size(); ++t) {
            free_gpus += instance.types[t].capacity().gpus - solution.used[t].gpus;
        }
        std::vector<std::size_t> pending;
        std::vector<int> demands;
        for (std::size_t j = 0; j < pool.size(); ++j) {
            if (!solution.choices[j].assigned()) {
                pending.push_back(j);
                demands.push_back(pool[j].gpus);
            }
        }
        if (free_gpus <= 0 || pending.empty()) {
            break;
        }
        const auto admitted = mechanism::select_runnable(demands, free_gpus);
        if (admitted.empty()) {
            break;
        }
        HeteroInstance sub{instance.types, {}, solution.used};
        for (auto a : admitted) {
            sub.jobs.push_back(pool[pending[a]]);
        }
        const auto step = solve_hetero_ilp(sub, options);
        if (step.assigned_gpus == 0) {
            break;
        }
        for (std::size_t k = 0; k < admitted.size(); ++k) {
            solution.choices[pending[admitted[k]]] = step.choices[k];
        }
        solution.objective += step.objective;
        solution.assigned_gpus += step.assigned_gpus;
        solution.used = step.used;
        solution.proven_optimal = solution.proven_optimal && step.proven_optimal;
        ++solution.iterations;
    }
    return solution;
}

OptRound plan_opt_round(std::span<const mechanism::RunnableJob> jobs, const core::ClusterState& state,
                        const IlpOptions& options) {
    OptRound out;
    const auto inst = OptInstance::from_runnable(jobs, state);
    out.ilp = solve_ideal_ilp(inst, options);
    if (out.ilp.feasible) {
        auto placement = solve_placement_lp(inst, out.ilp);
        auto cells = out.ilp;
        if (!placement.feasible) {
            IlpOptions capped = options;
            capped.cap_to_servers = true;
            cells = solve_ideal_ilp(inst, capped);
            if (cells.feasible) {
                placement = solve_placement_lp(inst, cells);
            }
        }
        out.fragmented = placement.fragmented.size();
        if (placement.integral()) {
            core::ClusterState check = state;
            for (std::size_t j = 0; j < jobs.size(); ++j) {
                for (std::size_t i = 0; i < inst.server_count(); ++i) {
                    if (placement.x[i][j] == 1.0) {
                        core::Allocation a{jobs[j].id, {{static_cast<int>(i),
                                                         {jobs[j].gpus, cells.cells[j].cpus, cells.cells[j].mem_mb}}}};
                        check.apply(a);
                        out.plan.allocations.push_back(std::move(a));
                        break;
                    }
                }
            }
            out.executed = true;
            return out;
        }
    }
    out.plan = mechanism::place_tune(jobs, state);
    return out;
}

} // namespace synsim::optimizer
