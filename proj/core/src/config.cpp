#include "synsim/config/config.hpp"

#include "synsim/core/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace synsim::config {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty()) {
            out.push_back(item);
        }
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

template <typename T>
T number(std::string_view s, std::string_view what) {
    T v{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError(fmt::format("{}: '{}' is not a valid number", what, s));
    }
    return v;
}

bool boolean(std::string_view s, std::string_view what) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no" || s == "off") {
        return false;
    }
    throw ConfigError(fmt::format("{}: '{}' is not a boolean", what, s));
}

} // namespace

std::vector<double> parse_double_list(std::string_view text) {
    std::vector<double> out;
    for (auto item : split_list(text)) {
        out.push_back(number<double>(item, "list"));
    }
    if (out.empty()) {
        throw ConfigError("empty list");
    }
    return out;
}

workload::GpuDemandTable parse_gpu_demands(std::string_view text) {
    if (text == "single") {
        return workload::single_gpu_demands();
    }
    if (text == "default") {
        return workload::default_gpu_demands();
    }
    workload::GpuDemandTable table;
    for (auto item : split_list(text)) {
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) {
            throw ConfigError(fmt::format("gpu_demand entry '{}' must be gpus:probability", item));
        }
        table.emplace_back(number<int>(trim(item.substr(0, colon)), "gpu_demand"),
                           number<double>(trim(item.substr(colon + 1)), "gpu_demand"));
    }
    return table;
}

core::ClusterSpec ExperimentConfig::cluster() const {
    return core::ClusterSpec::uniform(servers, server, round_minutes);
}

void ExperimentConfig::validate() const {
    if (servers < 1) {
        throw ConfigError(fmt::format("cluster needs at least one server, got {}", servers));
    }
    cluster().validate();
    if (lambdas.empty() || policies.empty() || mechanisms.empty()) {
        throw ConfigError("lambda, policy and mechanism lists must not be empty");
    }
    for (double l : lambdas) {
        auto t = trace;
        t.lambda = l;
        t.validate();
    }
    if (sim.restart_penalty_s < 0.0) {
        throw ConfigError("restart_penalty_s must be >= 0");
    }
}

ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig cfg;
    std::string raw;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        std::string_view line = raw;
        if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto where = [&](std::string_view key) { return fmt::format("line {}: [{}] {}", lineno, section, key); };
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(fmt::format("line {}: unterminated section header", lineno));
            }
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section != "cluster" && section != "trace" && section != "run") {
                throw ConfigError(fmt::format("line {}: unknown section [{}]", lineno, section));
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(fmt::format("line {}: expected key = value", lineno));
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto w = where(key);
        try {
            if (section == "cluster") {
                if (key == "servers") cfg.servers = number<int>(value, w);
                else if (key == "gpus") cfg.server.gpus = number<int>(value, w);
                else if (key == "cpus") cfg.server.cpus = number<int>(value, w);
                else if (key == "mem_gb") cfg.server.mem_gb = number<double>(value, w);
                else if (key == "storage_bw") cfg.server.storage_bw = number<double>(value, w);
                else if (key == "round_minutes") cfg.round_minutes = number<double>(value, w);
                else throw ConfigError(fmt::format("{}: unknown key", w));
            } else if (section == "trace") {
                if (key == "mode") cfg.trace.mode = workload::parse_trace_mode(value);
                else if (key == "jobs") cfg.trace.n_jobs = number<int>(value, w);
                else if (key == "lambda") cfg.lambdas = parse_double_list(value);
                else if (key == "split") cfg.trace.split = workload::Split::parse(value);
                else if (key == "gpu_demand") cfg.trace.gpu_demands = parse_gpu_demands(value);
                else if (key == "path") cfg.trace_path = std::filesystem::path(std::string(value));
                else throw ConfigError(fmt::format("{}: unknown key", w));
            } else if (section == "run") {
                if (key == "policy") {
                    cfg.policies.clear();
                    for (auto p : split_list(value)) cfg.policies.push_back(policy::parse_policy(p));
                } else if (key == "mechanism") {
                    cfg.mechanisms.clear();
                    for (auto m : split_list(value)) cfg.mechanisms.push_back(mechanism::parse_mechanism(m));
                } else if (key == "seed") {
                    cfg.seed = number<std::uint64_t>(value, w);
                    cfg.seed_set = true;
                } else if (key == "out") cfg.out = std::filesystem::path(std::string(value));
                else if (key == "threshold") cfg.sim.profiler.threshold = number<double>(value, w);
                else if (key == "profiling_in_jct") cfg.sim.profiling_in_jct = boolean(value, w);
                else if (key == "restart_penalty_s") cfg.sim.restart_penalty_s = number<double>(value, w);
                else if (key == "monitor_jobs") cfg.sim.monitor_jobs = number<std::size_t>(value, w);
                else if (key == "stop_after_window") cfg.sim.stop_after_window = boolean(value, w);
                else if (key == "opt_node_limit") cfg.sim.opt_node_limit = number<std::size_t>(value, w);
                else throw ConfigError(fmt::format("{}: unknown key", w));
            } else {
                throw ConfigError(fmt::format("line {}: key '{}' outside any section", lineno, key));
            }
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            if (msg.rfind("line ", 0) == 0) {
                throw;
            }
            throw ConfigError(fmt::format("{}: {}", w, msg));
        }
    }
    cfg.trace.lambda = cfg.lambdas.front();
    cfg.trace.seed = cfg.seed;
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError(fmt::format("cannot read config '{}'", path.string()));
    }
    return parse_config(is);
}

workload::Trace trace_for(const ExperimentConfig& cfg, double lambda) {
    if (cfg.trace_path) {
        auto fill = cfg.trace;
        fill.seed = cfg.seed;
        return workload::load_trace(*cfg.trace_path, fill);
    }
    auto spec = cfg.trace;
    spec.lambda = lambda;
    spec.seed = cfg.seed;
    return workload::gen_trace(spec);
}

std::vector<simulator::SummaryRow> run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
    cfg.validate();
    const auto cluster = cfg.cluster();
    std::filesystem::create_directories(cfg.out);
    std::vector<simulator::SummaryRow> rows;
    for (double lambda : cfg.lambdas) {
        const auto trace = trace_for(cfg, lambda);
        const auto jobs = workload::materialize(trace, cfg.server);
        for (auto p : cfg.policies) {
            for (auto m : cfg.mechanisms) {
                auto opts = cfg.sim;
                opts.policy = p;
                opts.mechanism = m;
                const auto report = simulator::run(jobs, cluster, opts);
                const auto dir = cfg.out / fmt::format("{}_{}_lambda{}", policy::to_string(p),
                                                       mechanism::to_string(m), lambda);
                std::filesystem::create_directories(dir);
                {
                    std::ofstream os(dir / "metrics.csv", std::ios::binary);
                    simulator::write_metrics_csv(report, os);
                }
                {
                    std::ofstream os(dir / "utilization.csv", std::ios::binary);
                    simulator::write_utilization_csv(report, os);
                }
                rows.push_back(simulator::summarize(report, opts, lambda, cfg.seed));
                if (log != nullptr) {
                    const auto& r = rows.back();
                    *log << fmt::format("lambda={} policy={} mechanism={} jobs={} avg_jct={:.1f} p99_jct={:.1f}\n",
                                        lambda, r.policy, r.mechanism, r.jobs, r.avg_jct, r.p99_jct);
                }
            }
        }
    }
    std::ofstream os(cfg.out / "summary.csv", std::ios::binary);
    simulator::write_summary_csv(rows, os);
    if (!os) {
        throw ConfigError(fmt::format("cannot write '{}'", (cfg.out / "summary.csv").string()));
    }
    return rows;
}

} // namespace synsim::config
