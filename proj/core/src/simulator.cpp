#include "synsim/simulator/simulator.hpp"

#include "synsim/core/errors.hpp"
#include "synsim/core/oracle.hpp"
#include "synsim/optimizer/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>

#include <fmt/format.h>

namespace synsim::simulator {

using core::Allocation;
using core::Job;
using core::Resources;

double JobRecord::speedup() const noexcept {
    const double ran = finish - start;
    return finished() && ran > 0.0 ? baseline_minutes / ran : 0.0;
}

namespace {

double mean_of(const std::vector<RoundRecord>& rounds, double RoundRecord::*field) {
    if (rounds.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& r : rounds) {
        sum += r.*field;
    }
    return sum / static_cast<double>(rounds.size());
}

} // namespace

double MetricsReport::mean_gpu_util() const noexcept { return mean_of(rounds, &RoundRecord::gpu_util); }
double MetricsReport::mean_cpu_util() const noexcept { return mean_of(rounds, &RoundRecord::cpu_util); }
double MetricsReport::mean_mem_util() const noexcept { return mean_of(rounds, &RoundRecord::mem_util); }

double percentile(std::vector<double> values, double p) {
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

namespace {

// At equal times: completions, then arrivals, then the round, then its deploy.
enum class EventKind { completion = 0, arrival = 1, schedule_round = 2, deploy = 3 };

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::arrival;
    std::uint64_t seq = 0;
    std::size_t job = 0;

    friend bool operator>(const Event& a, const Event& b) {
        if (a.time != b.time) return a.time > b.time;
        if (a.kind != b.kind) return a.kind > b.kind;
        return a.seq > b.seq;
    }
};

struct Live {
    Job job;
    const profiler::ProfiledJob* profile = nullptr;
    double ready = 0.0;
    bool queued = false;      // ready and not finished
    bool finishing = false;   // completes inside the current round
    bool ran_last_round = false;
    std::optional<Allocation> last;
    JobRecord record;
};

class Engine {
public:
    Engine(const std::vector<Job>& jobs, const core::ClusterSpec& cluster, const SimOptions& opt)
        : cluster_(cluster), opt_(opt) {
        cluster_.validate();
        totals_ = cluster_.totals();
        server_ = cluster_.servers.front();
        round_s_ = cluster_.round_minutes * 60.0;

        live_.reserve(jobs.size());
        for (const auto& j : jobs) {
            if (j.gpu_demand < 1 || j.gpu_demand > totals_.gpus) {
                throw DemandError(fmt::format("job {} asks for {} GPUs; the cluster has {}", j.id, j.gpu_demand,
                                              totals_.gpus));
            }
            Live l;
            l.job = j;
            l.job.samples_done = 0.0;
            l.job.attained_service = 0.0;
            l.job.state = core::JobState::queued;
            l.profile = &profile_for(j.cls, j.gpu_demand);
            l.ready = j.arrival + (opt_.profiling_in_jct ? l.profile->profiling_minutes : 0.0);
            l.record.id = j.id;
            l.record.model = j.cls.name;
            l.record.task = j.cls.task;
            l.record.gpus = j.gpu_demand;
            l.record.arrival = j.arrival;
            l.record.baseline_minutes = j.total_samples / j.baseline_rate / 60.0;
            live_.push_back(std::move(l));
        }
        std::vector<std::size_t> by_id(live_.size());
        std::iota(by_id.begin(), by_id.end(), std::size_t{0});
        std::stable_sort(by_id.begin(), by_id.end(),
                         [&](std::size_t a, std::size_t b) { return live_[a].job.id < live_[b].job.id; });
        by_id_ = by_id;
        window_ = select_window(by_id.size());
        in_window_.assign(live_.size(), false);
        for (auto k : window_) {
            in_window_[by_id_[k]] = true;
        }
        window_left_ = window_.size();
    }

    MetricsReport run() {
        for (std::size_t i = 0; i < live_.size(); ++i) {
            push(live_[i].ready, EventKind::arrival, i);
        }
        while (!events_.empty()) {
            if (opt_.stop_after_window && window_left_ == 0 && !window_.empty()) {
                break;
            }
            const Event e = events_.top();
            events_.pop();
            now_ = e.time;
            switch (e.kind) {
            case EventKind::arrival: on_arrival(e.job); break;
            case EventKind::schedule_round: on_round(); break;
            case EventKind::deploy: on_deploy(); break;
            case EventKind::completion: on_completion(e.job); break;
            }
        }
        return report();
    }

private:
    const profiler::ProfiledJob& profile_for(const core::JobClass& cls, int gpus) {
        auto key = std::make_pair(cls.name, gpus);
        auto it = profiles_.find(key);
        if (it == profiles_.end()) {
            it = profiles_.emplace(key, profiler::profile_job(cls, gpus, server_, totals_, opt_.profiler)).first;
        }
        return it->second;
    }

    std::vector<std::size_t> select_window(std::size_t n) const {
        std::size_t w = opt_.monitor_jobs == 0 ? n : std::min(opt_.monitor_jobs, n);
        const std::size_t start = (n - w) / 2;
        std::vector<std::size_t> out(w);
        std::iota(out.begin(), out.end(), start);
        return out;
    }

    void push(double t, EventKind kind, std::size_t job = 0) { events_.push({t, kind, seq_++, job}); }

    void on_arrival(std::size_t i) {
        live_[i].queued = true;
        if (!round_pending_) {
            round_pending_ = true;
            push(now_, EventKind::schedule_round);
        }
    }

    void on_completion(std::size_t i) {
        auto& l = live_[i];
        l.job.state = core::JobState::finished;
        l.job.samples_done = l.job.total_samples;
        l.record.finish = now_;
        if (in_window_[i]) {
            --window_left_;
        }
    }

    void on_round() {
        // Ready, unfinished jobs; those completing this instant are excluded.
        std::vector<const Job*> queue;
        std::map<const Job*, std::size_t> index;
        for (std::size_t i = 0; i < live_.size(); ++i) {
            auto& l = live_[i];
            if (l.finishing && l.job.state != core::JobState::finished) {
                continue;
            }
            if (l.queued && l.job.state != core::JobState::finished) {
                queue.push_back(&l.job);
                index[&l.job] = i;
            }
        }
        if (queue.empty()) {
            round_pending_ = false;
            for (auto& l : live_) {
                l.ran_last_round = false;
            }
            return;
        }

        const auto ordered = policy::order_queue(queue, now_, opt_.policy);
        std::vector<int> demands;
        demands.reserve(ordered.size());
        for (const auto* j : ordered) {
            demands.push_back(j->gpu_demand);
        }
        const auto admitted = mechanism::select_runnable(demands, totals_.gpus);

        std::vector<mechanism::RunnableJob> runnable;
        runnable.reserve(admitted.size());
        planned_.clear();
        for (auto a : admitted) {
            const std::size_t i = index.at(ordered[a]);
            const auto& l = live_[i];
            mechanism::RunnableJob r;
            r.id = l.job.id;
            r.gpus = l.job.gpu_demand;
            r.demand = l.profile->demand.resources();
            r.proportional = l.profile->proportional;
            r.matrix = &l.profile->matrix;
            if (l.ran_last_round) {
                r.previous = l.last;
            }
            runnable.push_back(std::move(r));
            planned_.push_back(i);
        }

        const core::ClusterState empty(cluster_);
        RoundRecord rec;
        rec.index = rounds_.size();
        rec.time = now_;
        rec.queued = queue.size() - admitted.size();
        if (opt_.mechanism == mechanism::MechanismKind::opt) {
            optimizer::IlpOptions io;
            io.node_limit = opt_.opt_node_limit;
            auto r = optimizer::plan_opt_round(runnable, empty, io);
            rec.opt_objective = r.ilp.objective;
            plan_ = std::move(r.plan);
        } else {
            plan_ = mechanism::plan_round_with_leases(opt_.mechanism, runnable, empty);
        }
        rec.throughput = mechanism::plan_throughput(plan_, runnable);
        pending_round_ = rec;
        push(now_, EventKind::deploy);
    }

    [[noreturn]] void abort_round(const std::string& why) const {
        std::ostringstream os;
        os << fmt::format("invariant broken at t={:.3f} (round {}): {}\n", now_, rounds_.size(), why);
        for (const auto& a : plan_.allocations) {
            os << fmt::format("  job {}:", a.job_id);
            for (const auto& s : a.per_server) {
                os << fmt::format(" s{}=({},{},{})", s.server, s.res.gpus, s.res.cpus, s.res.mem_mb);
            }
            os << '\n';
        }
        throw InternalError(os.str());
    }

    void on_deploy() {
        core::ClusterState state(cluster_);
        try {
            for (const auto& a : plan_.allocations) {
                state.apply(a);
            }
        } catch (const PlacementError& e) {
            abort_round(e.what());
        }
        if (!state.conserved()) {
            abort_round("capacity accounting drifted");
        }

        std::map<core::JobId, const Allocation*> by_job;
        for (const auto& a : plan_.allocations) {
            by_job[a.job_id] = &a;
        }
        for (auto i : planned_) {
            auto& l = live_[i];
            auto it = by_job.find(l.job.id);
            if (it == by_job.end()) {
                continue;
            }
            const Allocation& alloc = *it->second;
            if (alloc.total().gpus != l.job.gpu_demand) {
                abort_round(fmt::format("job {} placed on {} GPUs, wants {}", l.job.id, alloc.total().gpus,
                                        l.job.gpu_demand));
            }
        }

        RoundRecord rec = pending_round_;
        const Resources used = state.total_capacity() - state.total_free();
        rec.gpu_util = static_cast<double>(used.gpus) / totals_.gpus;
        rec.cpu_util = static_cast<double>(used.cpus) / totals_.cpus;
        rec.mem_util = static_cast<double>(used.mem_mb) / static_cast<double>(totals_.mem_mb);
        rec.running = plan_.allocations.size();

        std::vector<bool> ran(live_.size(), false);
        for (auto i : planned_) {
            auto& l = live_[i];
            auto it = by_job.find(l.job.id);
            if (it == by_job.end()) {
                continue;
            }
            const Allocation& alloc = *it->second;
            ran[i] = true;
            const bool restart = l.job.samples_done > 0.0 && (!l.ran_last_round || !l.last || !(*l.last == alloc));
            const double penalty = restart ? std::min(opt_.restart_penalty_s, round_s_) : 0.0;
            if (restart) {
                ++l.record.restarts;
            }
            if (l.record.start < 0.0) {
                l.record.start = now_;
            }
            const double bw = cluster_.servers[static_cast<std::size_t>(alloc.per_server.front().server)].storage_bw;
            const double rate = core::oracle_throughput(l.job.cls, alloc.total(), bw);
            const double remaining = l.job.remaining_samples();
            const double usable_s = round_s_ - penalty;
            const double need_s = rate > 0.0 ? remaining / rate : HUGE_VAL;
            if (need_s <= usable_s) {
                const double minutes = (penalty + need_s) / 60.0;
                l.job.samples_done = l.job.total_samples;
                l.job.attained_service += l.job.gpu_demand * minutes;
                l.finishing = true;
                push(now_ + minutes, EventKind::completion, i);
            } else {
                l.job.samples_done += rate * usable_s;
                l.job.attained_service += l.job.gpu_demand * cluster_.round_minutes;
            }
            l.last = alloc;
        }
        for (std::size_t i = 0; i < live_.size(); ++i) {
            live_[i].ran_last_round = ran[i];
        }
        rounds_.push_back(rec);
        push(now_ + cluster_.round_minutes, EventKind::schedule_round);
    }

    MetricsReport report() const {
        MetricsReport out;
        out.jobs.reserve(live_.size());
        for (auto i : by_id_) {
            out.jobs.push_back(live_[i].record);
        }
        out.rounds = rounds_;
        out.window = window_;
        std::vector<double> jcts;
        for (auto k : window_) {
            if (out.jobs[k].finished()) {
                jcts.push_back(out.jobs[k].jct());
            }
        }
        out.finished_in_window = jcts.size();
        if (!jcts.empty()) {
            out.avg_jct = std::accumulate(jcts.begin(), jcts.end(), 0.0) / static_cast<double>(jcts.size());
            out.p99_jct = percentile(jcts, 99.0);
        }
        double first = HUGE_VAL;
        double last = 0.0;
        for (const auto& r : out.jobs) {
            if (r.finished()) {
                first = std::min(first, r.arrival);
                last = std::max(last, r.finish);
            }
        }
        out.makespan = first == HUGE_VAL ? 0.0 : last - first;
        return out;
    }

    core::ClusterSpec cluster_;
    SimOptions opt_;
    Resources totals_;
    core::ServerSpec server_;
    double round_s_ = 300.0;

    std::map<std::pair<std::string, int>, profiler::ProfiledJob> profiles_;
    std::vector<Live> live_;
    std::vector<std::size_t> by_id_;
    std::vector<std::size_t> window_;
    std::vector<bool> in_window_;
    std::size_t window_left_ = 0;

    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    bool round_pending_ = false;

    mechanism::RoundPlan plan_;
    std::vector<std::size_t> planned_;
    RoundRecord pending_round_;
    std::vector<RoundRecord> rounds_;
};

} // namespace

MetricsReport run(const std::vector<Job>& jobs, const core::ClusterSpec& cluster, const SimOptions& options) {
    if (cluster.servers.empty()) {
        throw ConfigError("cluster has no servers");
    }
    if (jobs.empty()) {
        return {};
    }
    return Engine(jobs, cluster, options).run();
}

MetricsReport run(const workload::Trace& trace, const core::ClusterSpec& cluster, const SimOptions& options) {
    if (cluster.servers.empty()) {
        throw ConfigError("cluster has no servers");
    }
    return run(workload::materialize(trace, cluster.servers.front()), cluster, options);
}

void write_metrics_csv(const MetricsReport& report, std::ostream& os) {
    os << "job_id,model,task,gpus,arrival,start,finish,jct,baseline_minutes,speedup,restarts\n";
    for (auto k : report.window) {
        const auto& r = report.jobs[k];
        os << fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", r.id, r.model,
                          core::to_string(r.task), r.gpus, r.arrival, r.start, r.finish,
                          r.finished() ? r.jct() : -1.0, r.baseline_minutes, r.speedup(), r.restarts);
    }
}

void write_utilization_csv(const MetricsReport& report, std::ostream& os) {
    os << "round,time,gpu_util,cpu_util,mem_util,running,queued,throughput,opt_objective\n";
    for (const auto& r : report.rounds) {
        os << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{:.6f},{:.6f}\n", r.index, r.time, r.gpu_util,
                          r.cpu_util, r.mem_util, r.running, r.queued, r.throughput, r.opt_objective);
    }
}

SummaryRow summarize(const MetricsReport& report, const SimOptions& options, double lambda, std::uint64_t seed) {
    SummaryRow s;
    s.policy = std::string(policy::to_string(options.policy));
    s.mechanism = std::string(mechanism::to_string(options.mechanism));
    s.lambda = lambda;
    s.seed = seed;
    s.jobs = report.finished_in_window;
    s.avg_jct = report.avg_jct;
    s.p99_jct = report.p99_jct;
    s.makespan = report.makespan;
    s.gpu_util = report.mean_gpu_util();
    s.cpu_util = report.mean_cpu_util();
    s.mem_util = report.mean_mem_util();
    return s;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os) {
    os << "policy,mechanism,lambda,seed,jobs,avg_jct,p99_jct,makespan,gpu_util,cpu_util,mem_util\n";
    for (const auto& s : rows) {
        os << fmt::format("{},{},{:.6g},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", s.policy, s.mechanism,
                          s.lambda, s.seed, s.jobs, s.avg_jct, s.p99_jct, s.makespan, s.gpu_util, s.cpu_util,
                          s.mem_util);
    }
}

Comparison compare(const std::vector<Job>& jobs, const core::ClusterSpec& cluster, const SimOptions& base,
                   const std::vector<std::pair<policy::PolicyKind, mechanism::MechanismKind>>& configs) {
    if (configs.empty()) {
        throw ConfigError("compare needs at least one configuration");
    }
    Comparison cmp;
    for (const auto& [p, m] : configs) {
        SimOptions o = base;
        o.policy = p;
        o.mechanism = m;
        cmp.runs.push_back({p, m, run(jobs, cluster, o)});
    }
    const auto& baseline = cmp.runs.front().report;
    for (const auto& r : cmp.runs) {
        if (r.report.jobs.size() != baseline.jobs.size() || r.report.window != baseline.window) {
            throw ConfigError("compared runs do not share a trace");
        }
        cmp.avg_ratio.push_back(r.report.avg_jct > 0.0 ? baseline.avg_jct / r.report.avg_jct : 0.0);
        std::vector<double> per_job;
        for (auto k : baseline.window) {
            const auto& b = baseline.jobs[k];
            const auto& v = r.report.jobs[k];
            per_job.push_back(b.finished() && v.finished() && v.jct() > 0.0 ? b.jct() / v.jct() : 0.0);
        }
        cmp.speedups.push_back(std::move(per_job));
    }
    return cmp;
}

void write_compare_csv(const Comparison& cmp, std::ostream& os) {
    os << "job_id";
    for (const auto& r : cmp.runs) {
        os << ',' << policy::to_string(r.policy) << '_' << mechanism::to_string(r.mechanism);
    }
    os << '\n';
    const auto& base = cmp.runs.front().report;
    for (std::size_t w = 0; w < base.window.size(); ++w) {
        os << base.jobs[base.window[w]].id;
        for (const auto& s : cmp.speedups) {
            os << fmt::format(",{:.6f}", s[w]);
        }
        os << '\n';
    }
}

} // namespace synsim::simulator
