#include "fixtures.hpp"

#include "synsim/core/errors.hpp"
#include "synsim/core/oracle.hpp"
#include "synsim/core/presets.hpp"
#include "synsim/mechanism/mechanism.hpp"

#include <gtest/gtest.h>

#include <deque>

namespace {

using namespace synsim;
using namespace synsim::mechanism;
using core::Resources;
namespace fx = synsim::testing;

// Profiles kept alive for the jobs that point into them.
struct Pool {
    core::ClusterSpec spec;
    std::deque<profiler::ProfiledJob> profiles;

    explicit Pool(int servers) : spec(core::ClusterSpec::uniform(servers, core::reference_server())) {}

    RunnableJob add(std::string_view model, int gpus, core::JobId id) {
        profiles.push_back(profiler::profile_job(core::preset(model), gpus, core::reference_server(), spec.totals()));
        const auto& p = profiles.back();
        RunnableJob j;
        j.id = id;
        j.gpus = gpus;
        j.demand = p.demand.resources();
        j.proportional = p.proportional;
        j.matrix = &p.matrix;
        return j;
    }
};

void expect_applies(const RoundPlan& plan, core::ClusterState state) {
    for (const auto& a : plan.allocations) {
        ASSERT_TRUE(state.can_apply(a)) << "job " << a.job_id;
        state.apply(a);
    }
    EXPECT_TRUE(state.conserved());
}

TEST(SelectRunnable, Examples) {
    const std::vector<int> a{4, 4, 4};
    EXPECT_EQ(select_runnable(a, 8), (std::vector<std::size_t>{0, 1}));
    const std::vector<int> b{4, 4, 2, 1};
    EXPECT_EQ(select_runnable(b, 7), (std::vector<std::size_t>{0, 2, 3}));
    const std::vector<int> c{16, 1};
    EXPECT_EQ(select_runnable(c, 8), (std::vector<std::size_t>{1}));
    EXPECT_TRUE(select_runnable(a, 0).empty());
}

TEST(SplitAllocation, FloorThenRemainderAscending) {
    const std::vector<std::pair<int, int>> servers{{1, 1}, {0, 2}};
    const auto a = split_allocation(7, Resources{3, 10, 1000}, servers);
    ASSERT_EQ(a.per_server.size(), 2u);
    EXPECT_EQ(a.per_server[0], (core::ServerShare{0, {2, 7, 667}}));
    EXPECT_EQ(a.per_server[1], (core::ServerShare{1, {1, 3, 333}}));
    EXPECT_EQ(a.total(), (Resources{3, 10, 1000}));
}

TEST(Proportional, LoneJobGetsFairShare) {
    Pool pool(1);
    const std::vector<RunnableJob> jobs{pool.add("resnet18", 1, 0)};
    const auto plan = place_proportional(jobs, core::ClusterState(pool.spec));
    ASSERT_EQ(plan.allocations.size(), 1u);
    EXPECT_EQ(plan.allocations[0].total(), (Resources{1, 3, 62500}));
}

TEST(Proportional, SplitJobGetsShareOnEachServer) {
    Pool pool(2);
    core::ClusterState state(pool.spec);
    state.apply({100, {{0, {7, 21, 437500}}}});
    state.apply({101, {{1, {7, 21, 437500}}}});
    const std::vector<RunnableJob> jobs{pool.add("resnet18", 2, 0)};
    const auto plan = place_proportional(jobs, state);
    ASSERT_EQ(plan.allocations.size(), 1u);
    const auto& a = plan.allocations[0];
    ASSERT_EQ(a.per_server.size(), 2u);
    EXPECT_EQ(a.per_server[0], (core::ServerShare{0, {1, 3, 62500}}));
    EXPECT_EQ(a.per_server[1], (core::ServerShare{1, {1, 3, 62500}}));
    expect_applies(plan, state);
}

TEST(Proportional, ExactFillLeavesNoGpus) {
    Pool pool(2);
    const std::vector<RunnableJob> jobs{pool.add("resnet50", 8, 0), pool.add("m5", 4, 1), pool.add("gnmt", 2, 2),
                                        pool.add("lstm", 1, 3), pool.add("alexnet", 1, 4)};
    const core::ClusterState state(pool.spec);
    const auto plan = place_proportional(jobs, state);
    EXPECT_TRUE(plan.skipped.empty());
    EXPECT_EQ(plan.gpus_used(), 16);
    expect_applies(plan, state);
}

// A two-column matrix whose throughput only depends on memory.
profiler::SensitivityMatrix memory_hungry() {
    return profiler::SensitivityMatrix({1, 12}, {250000, 450000}, {100.0, 400.0, 100.0, 400.0});
}

TEST(Greedy, MemoryHungryPairFragments) {
    const auto matrix = memory_hungry();
    const core::ClusterSpec spec = core::ClusterSpec::uniform(1, core::reference_server());
    std::vector<RunnableJob> jobs(2);
    for (int i = 0; i < 2; ++i) {
        jobs[i].id = i;
        jobs[i].gpus = 4;
        jobs[i].demand = {4, 12, 450000};
        jobs[i].proportional = {4, 12, 250000};
        jobs[i].matrix = &matrix;
    }
    const core::ClusterState state(spec);
    const auto greedy = place_greedy(jobs, state);
    EXPECT_EQ(greedy.allocations.size(), 1u);
    EXPECT_EQ(greedy.skipped, (std::vector<core::JobId>{1}));

    const auto tune = place_tune(jobs, state);
    EXPECT_TRUE(tune.skipped.empty());
    ASSERT_EQ(tune.allocations.size(), 2u);
    for (const auto& a : tune.allocations) {
        EXPECT_GE(matrix.value_at(a.total()), matrix.value_at(jobs[0].proportional));
    }
    expect_applies(tune, state);
}

TEST(Greedy, SmallDemandsNeverSkip) {
    Pool pool(1);
    std::vector<RunnableJob> jobs;
    const char* names[] = {"gnmt", "lstm", "gnmt", "lstm", "gnmt", "lstm", "gnmt", "lstm"};
    for (int i = 0; i < 8; ++i) jobs.push_back(pool.add(names[i], 1, i));
    const core::ClusterState state(pool.spec);
    const auto greedy = place_greedy(jobs, state);
    EXPECT_TRUE(greedy.skipped.empty());
    for (const auto& a : greedy.allocations) {
        const auto& j = jobs[static_cast<std::size_t>(a.job_id)];
        EXPECT_GE(j.rate(a.total()), j.rate(j.proportional));
    }
}

TEST(Mechanisms, EmptyRunnableSetGivesEmptyPlan) {
    const core::ClusterState state(core::ClusterSpec::uniform(2, core::reference_server()));
    for (auto kind : {MechanismKind::proportional, MechanismKind::greedy, MechanismKind::tune}) {
        const auto plan = plan_round(kind, {}, state);
        EXPECT_TRUE(plan.allocations.empty());
        EXPECT_TRUE(plan.skipped.empty());
    }
    EXPECT_THROW(plan_round(MechanismKind::opt, {}, state), InternalError);
}

TEST(Tune, AllHungryMatchesProportional) {
    // Eight CPU and memory hungry jobs fill one server: nothing is left to boost.
    Pool pool(1);
    std::vector<RunnableJob> jobs;
    const char* names[] = {"resnet18", "m5", "alexnet", "deepspeech", "shufflenet_v2", "m5", "resnet50", "deepspeech"};
    for (int i = 0; i < 8; ++i) jobs.push_back(pool.add(names[i], 1, i));
    const core::ClusterState state(pool.spec);
    const auto tune = place_tune(jobs, state);
    const auto prop = place_proportional(jobs, state);
    ASSERT_EQ(tune.allocations.size(), 8u);
    for (const auto& a : tune.allocations) {
        const auto* p = prop.find(a.job_id);
        ASSERT_NE(p, nullptr);
        const auto& j = jobs[static_cast<std::size_t>(a.job_id)];
        EXPECT_EQ(a.total().cpus, p->total().cpus) << names[a.job_id];
        EXPECT_LE(a.total().mem_mb, p->total().mem_mb) << names[a.job_id];
        EXPECT_DOUBLE_EQ(j.rate(a.total()), j.rate(p->total())) << names[a.job_id];
    }
    EXPECT_DOUBLE_EQ(plan_throughput(tune, jobs), plan_throughput(prop, jobs));
}

TEST(Tune, ImageJobsTakeLanguageSurplus) {
    Pool pool(1);
    std::vector<RunnableJob> jobs;
    for (int i = 0; i < 2; ++i) jobs.push_back(pool.add("resnet18", 1, i));
    for (int i = 2; i < 8; ++i) jobs.push_back(pool.add("gnmt", 1, i));
    const core::ClusterState state(pool.spec);
    const auto tune = place_tune(jobs, state);
    const auto prop = place_proportional(jobs, state);
    ASSERT_EQ(tune.allocations.size(), 8u);
    for (const auto& a : tune.allocations) {
        const auto& j = jobs[static_cast<std::size_t>(a.job_id)];
        EXPECT_GE(j.rate(a.total()), j.rate(j.proportional));
        if (a.job_id < 2) {
            EXPECT_EQ(a.total().cpus, 9);
        } else {
            EXPECT_EQ(a.total().cpus, 1);
        }
    }
    EXPECT_GT(plan_throughput(tune, jobs), plan_throughput(prop, jobs));
    expect_applies(tune, state);
}

TEST(Tune, LoneJobGetsItsDemand) {
    for (const auto& cls : core::preset_classes()) {
        Pool pool(1);
        const std::vector<RunnableJob> jobs{pool.add(cls.name, 1, 0)};
        const auto plan = place_tune(jobs, core::ClusterState(pool.spec));
        ASSERT_EQ(plan.allocations.size(), 1u);
        const auto whole = Resources{1, 24, 500000};
        EXPECT_EQ(plan.allocations[0].total(), core::component_min(jobs[0].demand, whole)) << cls.name;
    }
}

TEST(Tune, GuaranteeFeasibilityAndProportionalityOnRandomRounds) {
    std::mt19937_64 seeds(99);
    for (int round = 0; round < 150; ++round) {
        std::mt19937_64 rng(seeds());
        const auto split = fx::random_split(rng);
        auto r = fx::make_round(seeds(), fx::pick(rng, 1, 6), split);
        for (auto kind : {MechanismKind::proportional, MechanismKind::greedy, MechanismKind::tune}) {
            const auto plan = plan_round(kind, r.jobs, r.state);
            expect_applies(plan, r.state);
            for (const auto& a : plan.allocations) {
                const auto& j = r.jobs[static_cast<std::size_t>(a.job_id)];
                EXPECT_EQ(a.total().gpus, j.gpus);
                for (const auto& s : a.per_server) {
                    // Split jobs: memory within one MB and CPU within one core of the GPU share.
                    const auto t = a.total();
                    EXPECT_LE(std::abs(s.res.mem_mb * j.gpus - t.mem_mb * s.res.gpus), j.gpus);
                    EXPECT_LE(std::abs(s.res.cpus * j.gpus - t.cpus * s.res.gpus), j.gpus);
                }
                if (kind == MechanismKind::tune) {
                    const double fair = core::oracle_throughput(*r.classes[a.job_id], j.proportional, 0.1);
                    EXPECT_GE(core::oracle_throughput(*r.classes[a.job_id], a.total(), 0.1), fair)
                        << "round " << round << " job " << a.job_id;
                }
            }
            if (kind != MechanismKind::greedy) {
                EXPECT_TRUE(plan.skipped.empty()) << to_string(kind) << " round " << round;
            }
        }
    }
}

TEST(Leases, UnchangedRoundKeepsEveryAllocation) {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 30; ++round) {
        auto r = fx::make_round(rng(), 2, {20, 70, 10});
        const auto first = plan_round_with_leases(MechanismKind::tune, r.jobs, r.state);
        for (auto& j : r.jobs) {
            if (const auto* a = first.find(j.id)) j.previous = *a;
        }
        const auto second = plan_round_with_leases(MechanismKind::tune, r.jobs, r.state);
        ASSERT_EQ(second.allocations.size(), first.allocations.size());
        for (const auto& a : first.allocations) {
            const auto* b = second.find(a.job_id);
            ASSERT_NE(b, nullptr);
            EXPECT_EQ(*b, a);
        }
    }
}

TEST(Leases, BelowFairShareLeaseIsDropped) {
    Pool pool(1);
    std::vector<RunnableJob> jobs{pool.add("resnet18", 1, 0)};
    jobs[0].previous = core::Allocation{0, {{0, {1, 1, 62500}}}};
    const auto plan = plan_round_with_leases(MechanismKind::tune, jobs, core::ClusterState(pool.spec));
    ASSERT_EQ(plan.allocations.size(), 1u);
    EXPECT_EQ(plan.allocations[0].total(), jobs[0].demand);
}

TEST(Mechanisms, ParseRoundTrip) {
    for (auto kind : {MechanismKind::proportional, MechanismKind::greedy, MechanismKind::tune, MechanismKind::opt}) {
        EXPECT_EQ(parse_mechanism(to_string(kind)), kind);
    }
    EXPECT_THROW(parse_mechanism("fastest"), ConfigError);
}

} // namespace
