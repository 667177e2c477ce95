// synsim: batch experiments for the resource-sensitive GPU cluster simulator.

#include "synsim/config/config.hpp"
#include "synsim/core/errors.hpp"
#include "synsim/core/presets.hpp"
#include "synsim/profiler/profiler.hpp"
#include "synsim/simulator/simulator.hpp"
#include "synsim/workload/workload.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace synsim;

struct Common {
    std::string config;
    std::string policy;
    std::string mechanism;
    std::optional<std::uint64_t> seed;
    std::string lambda;
    std::string out;
    std::string trace;
    std::optional<double> threshold;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Experiment config file")->check(CLI::ExistingFile);
    cmd->add_option("--policy", c.policy, "fifo|srtf|las|ftf, comma separated");
    cmd->add_option("--mechanism", c.mechanism, "proportional|greedy|tune|opt, comma separated");
    cmd->add_option("--seed", c.seed, "Random seed (default: config, then $SYNSIM_SEED, then 1)");
    cmd->add_option("--lambda", c.lambda, "Arrival rate(s) in jobs/hour, comma separated");
    cmd->add_option("--out", c.out, "Output directory");
    cmd->add_option("--trace", c.trace, "Replay this trace CSV instead of generating one");
    cmd->add_option("--threshold", c.threshold, "Profiler bisection threshold (<= 0: every CPU count)");
}

std::uint64_t env_seed() {
    if (const char* s = std::getenv("SYNSIM_SEED"); s != nullptr && *s != '\0') {
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("SYNSIM_SEED='{}' is not an unsigned integer", s));
        }
    }
    return 1;
}

config::ExperimentConfig resolve(const Common& c) {
    config::ExperimentConfig cfg = c.config.empty() ? config::ExperimentConfig{} : config::load_config(c.config);
    if (!c.policy.empty()) {
        cfg.policies.clear();
        for (const auto& p : CLI::detail::split(c.policy, ',')) {
            cfg.policies.push_back(policy::parse_policy(p));
        }
    }
    if (!c.mechanism.empty()) {
        cfg.mechanisms.clear();
        for (const auto& m : CLI::detail::split(c.mechanism, ',')) {
            cfg.mechanisms.push_back(mechanism::parse_mechanism(m));
        }
    }
    if (c.seed) {
        cfg.seed = *c.seed;
    } else if (!cfg.seed_set) {
        cfg.seed = env_seed();
    }
    cfg.seed_set = true;
    cfg.trace.seed = cfg.seed;
    if (!c.lambda.empty()) {
        cfg.lambdas = config::parse_double_list(c.lambda);
    }
    cfg.trace.lambda = cfg.lambdas.front();
    if (!c.out.empty()) {
        cfg.out = c.out;
    }
    if (!c.trace.empty()) {
        cfg.trace_path = c.trace;
    }
    if (c.threshold) {
        cfg.sim.profiler.threshold = *c.threshold;
    }
    cfg.validate();
    return cfg;
}

int cmd_simulate(const Common& c) {
    const auto cfg = resolve(c);
    const auto rows = config::run_experiment(cfg, &std::cout);
    std::cout << fmt::format("{} runs written to {}\n", rows.size(), cfg.out.string());
    return 0;
}

struct ProfileArgs {
    std::string model;
    int gpus = 1;
    int server_gpus = 8;
    int server_cpus = 24;
    double server_mem_gb = 500.0;
    double storage_bw = 0.1;
    double threshold = 0.10;
    std::string out;
};

int cmd_profile(const ProfileArgs& a) {
    const auto& cls = core::preset(a.model);
    const core::ServerSpec server{a.server_gpus, a.server_cpus, a.server_mem_gb, a.storage_bw, 0};
    server.validate();
    // Cluster totals are those of enough servers to host the job.
    const int servers = (a.gpus + server.gpus - 1) / server.gpus;
    const auto totals = core::ClusterSpec::uniform(servers, server).totals();
    profiler::ProfilerOptions opts;
    opts.threshold = a.threshold;
    const auto p = profiler::profile_job(cls, a.gpus, server, totals, opts);

    std::cout << fmt::format("model: {} ({})\n", cls.name, core::to_string(cls.task));
    std::cout << fmt::format("samples: {}\n", p.samples);
    std::cout << fmt::format("profiling_minutes: {:g}\n", p.profiling_minutes);
    std::cout << fmt::format("demand: gpus={} cpus={} mem_gb={:g} throughput={:.2f}\n", p.demand.gpus,
                             p.demand.cpus, core::mb_to_gb(p.demand.mem_mb), p.demand.peak_throughput);
    std::cout << fmt::format("proportional: cpus={} mem_gb={:g} throughput={:.2f}\n", p.proportional.cpus,
                             core::mb_to_gb(p.proportional.mem_mb), p.proportional_throughput);
    if (a.out.empty()) {
        p.matrix.write_csv(std::cout);
    } else {
        std::ofstream os(a.out, std::ios::binary);
        if (!os) {
            throw ConfigError(fmt::format("cannot write '{}'", a.out));
        }
        p.matrix.write_csv(os);
    }
    return 0;
}

struct GenArgs {
    Common common;
    std::optional<int> jobs;
    std::string split;
    std::string gpu_demand;
    std::string mode;
};

int cmd_gen_trace(const GenArgs& g) {
    auto cfg = resolve(g.common);
    auto spec = cfg.trace;
    if (g.jobs) spec.n_jobs = *g.jobs;
    if (!g.split.empty()) spec.split = workload::Split::parse(g.split);
    if (!g.gpu_demand.empty()) spec.gpu_demands = config::parse_gpu_demands(g.gpu_demand);
    if (!g.mode.empty()) spec.mode = workload::parse_trace_mode(g.mode);
    spec.lambda = cfg.lambdas.front();
    spec.seed = cfg.seed;
    const auto trace = workload::gen_trace(spec);
    if (g.common.out.empty()) {
        workload::save_trace(trace, std::cout);
    } else {
        workload::save_trace(trace, std::filesystem::path(g.common.out));
        std::cerr << fmt::format("{} jobs written to {}\n", trace.jobs.size(), g.common.out);
    }
    return 0;
}

int cmd_compare(const Common& c) {
    const auto cfg = resolve(c);
    std::filesystem::create_directories(cfg.out);
    std::vector<std::pair<policy::PolicyKind, mechanism::MechanismKind>> configs;
    for (auto p : cfg.policies) {
        for (auto m : cfg.mechanisms) {
            configs.emplace_back(p, m);
        }
    }
    std::vector<simulator::SummaryRow> rows;
    for (double lambda : cfg.lambdas) {
        const auto jobs = workload::materialize(config::trace_for(cfg, lambda), cfg.server);
        const auto cmp = simulator::compare(jobs, cfg.cluster(), cfg.sim, configs);
        std::ofstream os(cfg.out / fmt::format("compare_lambda{}.csv", lambda), std::ios::binary);
        simulator::write_compare_csv(cmp, os);
        for (std::size_t i = 0; i < cmp.runs.size(); ++i) {
            auto opts = cfg.sim;
            opts.policy = cmp.runs[i].policy;
            opts.mechanism = cmp.runs[i].mechanism;
            rows.push_back(simulator::summarize(cmp.runs[i].report, opts, lambda, cfg.seed));
            std::cout << fmt::format("lambda={} {}_{} avg_jct={:.1f} ratio_vs_{}_{}={:.3f}\n", lambda,
                                     rows.back().policy, rows.back().mechanism, rows.back().avg_jct,
                                     policy::to_string(cmp.runs[0].policy),
                                     mechanism::to_string(cmp.runs[0].mechanism), cmp.avg_ratio[i]);
        }
    }
    std::ofstream os(cfg.out / "summary.csv", std::ios::binary);
    simulator::write_summary_csv(rows, os);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trace-driven GPU cluster scheduling simulator with CPU/memory-aware allocation"};
    app.require_subcommand(1);

    Common sim;
    auto* simulate = app.add_subcommand("simulate", "Run the configured sweep and write CSVs");
    add_common(simulate, sim);

    ProfileArgs prof;
    auto* profile = app.add_subcommand("profile", "Profile one model and print its demand vector");
    profile->add_option("model", prof.model, "Preset model name")->required();
    profile->add_option("--gpus", prof.gpus, "GPUs the job uses");
    profile->add_option("--server-gpus", prof.server_gpus, "GPUs per server");
    profile->add_option("--server-cpus", prof.server_cpus, "CPU cores per server");
    profile->add_option("--server-mem-gb", prof.server_mem_gb, "Memory per server (GB)");
    profile->add_option("--storage-bw", prof.storage_bw, "Storage bandwidth (GB/s)");
    profile->add_option("--threshold", prof.threshold, "Bisection threshold (<= 0: every CPU count)");
    profile->add_option("--out", prof.out, "Write the matrix CSV here instead of stdout");

    GenArgs gen;
    auto* gen_trace = app.add_subcommand("gen-trace", "Generate a workload trace CSV");
    add_common(gen_trace, gen.common);
    gen_trace->add_option("--jobs", gen.jobs, "Number of jobs");
    gen_trace->add_option("--split", gen.split, "image,language,speech percentages");
    gen_trace->add_option("--gpu-demand", gen.gpu_demand, "single, default or g:p list");
    gen_trace->add_option("--mode", gen.mode, "static or dynamic");

    Common cmp;
    auto* compare = app.add_subcommand("compare", "Run every configuration on the same trace; first is the baseline");
    add_common(compare, cmp);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(sim);
        if (profile->parsed()) return cmd_profile(prof);
        if (gen_trace->parsed()) return cmd_gen_trace(gen);
        if (compare->parsed()) return cmd_compare(cmp);
    } catch (const synsim::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
