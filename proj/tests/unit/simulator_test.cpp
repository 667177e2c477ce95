#include "synsim/core/errors.hpp"
#include "synsim/core/oracle.hpp"
#include "synsim/core/presets.hpp"
#include "synsim/profiler/profiler.hpp"
#include "synsim/simulator/simulator.hpp"
#include "synsim/workload/workload.hpp"

#include <gtest/gtest.h>

#include <map>
#include <sstream>

namespace {

using namespace synsim;
using namespace synsim::simulator;
using mechanism::MechanismKind;
using policy::PolicyKind;

core::ClusterSpec cluster(int servers) { return core::ClusterSpec::uniform(servers, core::reference_server()); }

workload::Trace one_job(const std::string& model, int gpus, double arrival, double minutes) {
    workload::Trace t;
    t.jobs.push_back({0, arrival, gpus, minutes, core::preset(model).task, model});
    return t;
}

SimOptions options(MechanismKind m, PolicyKind p = PolicyKind::fifo) {
    SimOptions o;
    o.mechanism = m;
    o.policy = p;
    o.monitor_jobs = 0;
    return o;
}

workload::Trace mixed_trace(int n, double lambda, std::uint64_t seed, workload::Split split = {20, 70, 10}) {
    workload::TraceSpec spec;
    spec.n_jobs = n;
    spec.lambda = lambda;
    spec.seed = seed;
    spec.split = split;
    return workload::gen_trace(spec);
}

TEST(Simulator, EmptyTrace) {
    const auto r = run(workload::Trace{}, cluster(1), options(MechanismKind::tune));
    EXPECT_TRUE(r.jobs.empty());
    EXPECT_TRUE(r.rounds.empty());
    EXPECT_EQ(r.makespan, 0.0);
    EXPECT_EQ(r.avg_jct, 0.0);
}

TEST(Simulator, LoneJobClosedForm) {
    const auto server = core::reference_server();
    for (const char* model : {"resnet18", "gnmt", "m5"}) {
        const auto p = profiler::profile_job(core::preset(model), 1, server, server.capacity());
        const auto r = run(one_job(model, 1, 7.0, 123.0), cluster(1), options(MechanismKind::proportional));
        ASSERT_EQ(r.jobs.size(), 1u);
        EXPECT_NEAR(r.jobs[0].jct(), p.profiling_minutes + 123.0, 1e-9) << model;
        EXPECT_NEAR(r.jobs[0].start, 7.0 + p.profiling_minutes, 1e-9);
    }
}

TEST(Simulator, LoneJobUnderTuneRunsAtDemandRate) {
    const auto server = core::reference_server();
    const auto& cls = core::preset("resnet18");
    const auto p = profiler::profile_job(cls, 1, server, server.capacity());
    const auto r = run(one_job("resnet18", 1, 0.0, 600.0), cluster(1), options(MechanismKind::tune));
    const double samples = 600.0 * 60.0 * core::oracle_throughput(cls, core::proportional_total(server, 1), 0.1);
    const double fast = core::oracle_throughput(cls, p.demand.resources(), 0.1);
    EXPECT_NEAR(r.jobs[0].finish - r.jobs[0].start, samples / fast / 60.0, 1e-9);
    EXPECT_NEAR(r.jobs[0].speedup(), 3.0, 1e-9);
}

TEST(Simulator, FifoProportionalRunTimesEqualBaseline) {
    // Single-GPU FIFO jobs are never preempted, so credited work sums exactly.
    workload::TraceSpec spec;
    spec.n_jobs = 120;
    spec.lambda = 4.0;
    spec.gpu_demands = workload::single_gpu_demands();
    spec.split = {33, 33, 34};
    auto o = options(MechanismKind::proportional);
    const auto r = run(workload::gen_trace(spec), cluster(1), o);
    for (const auto& j : r.jobs) {
        ASSERT_TRUE(j.finished());
        EXPECT_EQ(j.restarts, 0);
        EXPECT_NEAR(j.finish - j.start, j.baseline_minutes, 1e-6 * j.baseline_minutes) << "job " << j.id;
        EXPECT_GE(j.jct(), j.baseline_minutes - 1e-9);
    }
}

TEST(Simulator, UnplaceableDemandRejectedUpFront) {
    EXPECT_THROW(run(one_job("resnet18", 16, 0.0, 10.0), cluster(1), options(MechanismKind::tune)), DemandError);
}

TEST(Simulator, IdenticalRunsWriteIdenticalCsv) {
    const auto trace = mixed_trace(150, 6.0, 21);
    std::string first;
    for (int pass = 0; pass < 2; ++pass) {
        const auto r = run(trace, cluster(2), options(MechanismKind::tune, PolicyKind::srtf));
        std::ostringstream os;
        write_metrics_csv(r, os);
        write_utilization_csv(r, os);
        if (pass == 0) {
            first = os.str();
        } else {
            EXPECT_EQ(os.str(), first);
        }
    }
    EXPECT_GT(first.size(), 1000u);
}

TEST(Simulator, UtilizationBoundedAndJctCoversService) {
    const auto trace = mixed_trace(200, 8.0, 5, {50, 0, 50});
    for (auto m : {MechanismKind::proportional, MechanismKind::greedy, MechanismKind::tune}) {
        const auto r = run(trace, cluster(2), options(m, PolicyKind::las));
        for (const auto& rr : r.rounds) {
            EXPECT_GE(rr.gpu_util, 0.0);
            EXPECT_LE(rr.gpu_util, 1.0);
            EXPECT_LE(rr.cpu_util, 1.0);
            EXPECT_LE(rr.mem_util, 1.0);
        }
        for (const auto& j : r.jobs) {
            ASSERT_TRUE(j.finished()) << to_string(m);
            EXPECT_GE(j.finish, j.start);
            EXPECT_GE(j.start, j.arrival);
        }
    }
}

// Tune's guarantee is per round. Per run, a job may lose at most one round
// plus what its restarts cost.
TEST(Simulator, TuneNeverRegressesBeyondOneRound) {
    for (double penalty : {0.0, 30.0}) {
        for (std::uint64_t seed = 1; seed <= 8; ++seed) {
            workload::TraceSpec spec;
            spec.n_jobs = 150;
            spec.lambda = 6.0;
            spec.gpu_demands = workload::single_gpu_demands();
            spec.split = {20, 70, 10};
            spec.seed = seed;
            const auto trace = workload::gen_trace(spec);
            auto o = options(MechanismKind::proportional);
            o.restart_penalty_s = penalty;
            const auto prop = run(trace, cluster(2), o);
            o.mechanism = MechanismKind::tune;
            const auto tune = run(trace, cluster(2), o);
            for (std::size_t i = 0; i < trace.jobs.size(); ++i) {
                const double slack = 5.0 + tune.jobs[i].restarts * penalty / 60.0;
                EXPECT_LE(tune.jobs[i].jct(), prop.jobs[i].jct() + slack)
                    << "penalty " << penalty << " seed " << seed << " job " << i;
            }
            EXPECT_LT(tune.avg_jct, prop.avg_jct);
        }
    }
}

TEST(Simulator, MonitorWindowIsMiddleSlice) {
    auto o = options(MechanismKind::proportional);
    o.monitor_jobs = 10;
    workload::TraceSpec spec;
    spec.n_jobs = 30;
    spec.lambda = 2.0;
    spec.gpu_demands = workload::single_gpu_demands();
    const auto r = run(workload::gen_trace(spec), cluster(1), o);
    ASSERT_EQ(r.window.size(), 10u);
    EXPECT_EQ(r.window.front(), 10u);
    EXPECT_EQ(r.window.back(), 19u);
    double sum = 0.0;
    for (auto i : r.window) sum += r.jobs[i].jct();
    EXPECT_NEAR(r.avg_jct, sum / 10.0, 1e-9);
}

TEST(Compare, LanguageOnlyWorkloadGainsNothing) {
    const auto trace = mixed_trace(200, 6.0, 31, {0, 100, 0});
    const auto jobs = workload::materialize(trace, core::reference_server());
    const auto cmp = compare(jobs, cluster(2), options(MechanismKind::proportional),
                             {{PolicyKind::fifo, MechanismKind::proportional}, {PolicyKind::fifo, MechanismKind::tune}});
    ASSERT_EQ(cmp.avg_ratio.size(), 2u);
    EXPECT_DOUBLE_EQ(cmp.avg_ratio[0], 1.0);
    EXPECT_NEAR(cmp.avg_ratio[1], 1.0, 0.02);
}

TEST(Compare, GreedyDegradesWhereTuneDoesNot) {
    workload::TraceSpec spec;
    spec.n_jobs = 400;
    spec.lambda = 5.5;
    spec.split = {50, 0, 50};
    spec.seed = 7;
    const auto jobs = workload::materialize(workload::gen_trace(spec), core::reference_server());
    auto base = options(MechanismKind::proportional);
    base.monitor_jobs = 200;
    const auto cmp = compare(jobs, cluster(16), base,
                             {{PolicyKind::fifo, MechanismKind::proportional},
                              {PolicyKind::fifo, MechanismKind::greedy},
                              {PolicyKind::fifo, MechanismKind::tune}});
    EXPECT_LT(cmp.avg_ratio[1], 1.0);
    EXPECT_GE(cmp.avg_ratio[2], 1.0);
    ASSERT_EQ(cmp.speedups.size(), 3u);
    EXPECT_EQ(cmp.speedups[0].size(), cmp.runs[0].report.window.size());
    std::ostringstream os;
    write_compare_csv(cmp, os);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')).find("job_id"), 0u);
}

TEST(Percentile, NearestRank) {
    EXPECT_EQ(percentile({5, 1, 4, 2, 3}, 100.0), 5.0);
    EXPECT_EQ(percentile({5, 1, 4, 2, 3}, 40.0), 2.0);
    EXPECT_EQ(percentile({5, 1, 4, 2, 3}, 41.0), 3.0);
    EXPECT_EQ(percentile({7}, 1.0), 7.0);
}

} // namespace
