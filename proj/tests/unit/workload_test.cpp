#include "synsim/core/errors.hpp"
#include "synsim/core/oracle.hpp"
#include "synsim/core/presets.hpp"
#include "synsim/workload/workload.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace {

using namespace synsim;
using namespace synsim::workload;

// CDF of log10(duration): 0.8 U[1.5, 3] + 0.2 U[3, 4].
double mixture_cdf(double x) {
    if (x <= 1.5) return 0.0;
    if (x <= 3.0) return 0.8 * (x - 1.5) / 1.5;
    if (x <= 4.0) return 0.8 + 0.2 * (x - 3.0);
    return 1.0;
}

TEST(Durations, MatchMixtureKs) {
    std::mt19937_64 rng(12345);
    std::vector<double> x(100000);
    for (auto& v : x) v = std::log10(sample_duration_minutes(rng));
    std::sort(x.begin(), x.end());
    double ks = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = mixture_cdf(x[i]);
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    EXPECT_LT(ks, 0.01);
    const auto below = std::lower_bound(x.begin(), x.end(), 3.0) - x.begin();
    EXPECT_NEAR(static_cast<double>(below) / n, 0.8, 0.01);
    EXPECT_GE(x.front(), 1.5);
    EXPECT_LT(x.back(), 4.0);
}

TEST(Arrivals, MeanGapAtNinePerHour) {
    TraceSpec spec;
    spec.n_jobs = 100000;
    spec.lambda = 9.0;
    spec.seed = 4;
    const auto t = gen_trace(spec);
    const double mean = t.jobs.back().arrival / static_cast<double>(t.jobs.size() - 1);
    EXPECT_NEAR(mean, 60.0 / 9.0, 0.01 * 60.0 / 9.0);
    for (std::size_t i = 1; i < t.jobs.size(); ++i) ASSERT_GE(t.jobs[i].arrival, t.jobs[i - 1].arrival);
}

TEST(Arrivals, StaticTraceStartsTogether) {
    TraceSpec spec;
    spec.mode = TraceMode::batch;
    spec.n_jobs = 100;
    const auto t = gen_trace(spec);
    ASSERT_EQ(t.jobs.size(), 100u);
    for (const auto& j : t.jobs) EXPECT_EQ(j.arrival, 0.0);
}

TEST(Traces, SameSeedSameTraceAndLambdaOnlyScalesArrivals) {
    TraceSpec spec;
    spec.n_jobs = 500;
    spec.split = {20, 70, 10};
    spec.seed = 8;
    spec.lambda = 3.0;
    const auto a = gen_trace(spec);
    EXPECT_EQ(a, gen_trace(spec));
    spec.lambda = 6.0;
    const auto b = gen_trace(spec);
    for (std::size_t i = 0; i < a.jobs.size(); ++i) {
        EXPECT_EQ(a.jobs[i].model, b.jobs[i].model);
        EXPECT_EQ(a.jobs[i].gpus, b.jobs[i].gpus);
        EXPECT_EQ(a.jobs[i].duration_minutes, b.jobs[i].duration_minutes);
        EXPECT_NEAR(a.jobs[i].arrival, 2.0 * b.jobs[i].arrival, 1e-9 * (1.0 + a.jobs[i].arrival));
    }
    spec.seed = 9;
    EXPECT_NE(a, gen_trace(spec));
}

TEST(Traces, SplitAndDemandTableRespected) {
    TraceSpec spec;
    spec.n_jobs = 20000;
    spec.split = {20, 70, 10};
    const auto t = gen_trace(spec);
    int language = 0, single = 0;
    for (const auto& j : t.jobs) {
        language += j.task == core::Task::language;
        single += j.gpus == 1;
        EXPECT_EQ(core::preset(j.model).task, j.task);
        EXPECT_TRUE(j.gpus == 1 || j.gpus == 2 || j.gpus == 4 || j.gpus == 8 || j.gpus == 16);
    }
    EXPECT_NEAR(language / 20000.0, 0.70, 0.015);
    EXPECT_NEAR(single / 20000.0, 0.70, 0.015);

    spec.gpu_demands = single_gpu_demands();
    for (const auto& j : gen_trace(spec).jobs) EXPECT_EQ(j.gpus, 1);
}

TEST(Traces, SaveLoadRoundTrip) {
    TraceSpec spec;
    spec.n_jobs = 300;
    spec.lambda = 5.0;
    spec.split = {33, 33, 34};
    const auto t = gen_trace(spec);
    std::stringstream ss;
    save_trace(t, ss);
    EXPECT_EQ(load_trace(ss), t);
}

TEST(Traces, HandWrittenCsv) {
    std::istringstream is("job_id,arrival_minutes,gpu_demand,duration_minutes,task,model\n"
                          "0,0,1,31.5,image,resnet18\n"
                          "1,12.25,4,1000,language,gnmt\n"
                          "2,30,16,5000.5,speech,m5\n");
    const auto t = load_trace(is);
    ASSERT_EQ(t.jobs.size(), 3u);
    EXPECT_EQ(t.jobs[0], (TraceJob{0, 0.0, 1, 31.5, core::Task::image, "resnet18"}));
    EXPECT_EQ(t.jobs[1], (TraceJob{1, 12.25, 4, 1000.0, core::Task::language, "gnmt"}));
    EXPECT_EQ(t.jobs[2], (TraceJob{2, 30.0, 16, 5000.5, core::Task::speech, "m5"}));
}

TEST(Traces, MissingTaskFilledFromSplit) {
    std::istringstream is("job_id,arrival_minutes,gpu_demand,duration_minutes\n0,0,1,60\n1,5,2,90\n");
    TraceSpec fill;
    fill.split = {0, 0, 100};
    const auto t = load_trace(is, fill);
    ASSERT_EQ(t.jobs.size(), 2u);
    for (const auto& j : t.jobs) {
        EXPECT_EQ(j.task, core::Task::speech);
        EXPECT_EQ(core::preset(j.model).task, core::Task::speech);
    }
}

TEST(Traces, BadRowsNameTheLine) {
    auto message = [](const std::string& text) {
        std::istringstream is(text);
        try {
            load_trace(is);
        } catch (const TraceError& e) {
            return std::string(e.what());
        }
        return std::string("accepted");
    };
    const std::string header = "job_id,arrival_minutes,gpu_demand,duration_minutes\n";
    EXPECT_NE(message(header + "0,0,1,10\n1,0,0,10\n").find("line 3"), std::string::npos);
    EXPECT_NE(message(header + "0,0,1,-5\n").find("line 2"), std::string::npos);
    EXPECT_NE(message(header + "0,zero,1,5\n").find("line 2"), std::string::npos);
    EXPECT_NE(message(header + "0,0,1\n").find("line 2"), std::string::npos);
    EXPECT_NE(message("id,when\n").find("line 1"), std::string::npos);
}

TEST(Materialize, WorkMatchesDurationAtProportionalShare) {
    TraceSpec spec;
    spec.n_jobs = 200;
    spec.split = {33, 33, 34};
    const auto t = gen_trace(spec);
    const auto server = core::reference_server();
    const auto jobs = materialize(t, server);
    ASSERT_EQ(jobs.size(), t.jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& j = jobs[i];
        const double rate = core::oracle_throughput(j.cls, core::proportional_total(server, j.gpu_demand), server.storage_bw);
        EXPECT_DOUBLE_EQ(j.baseline_rate, rate);
        EXPECT_NEAR(j.total_samples / rate / 60.0, t.jobs[i].duration_minutes, 1e-9 * t.jobs[i].duration_minutes);
    }
}

TEST(TraceSpec, Validation) {
    TraceSpec spec;
    spec.split = {50, 30, 10};
    EXPECT_THROW(spec.validate(), ConfigError);
    spec.split = {50, 50, 0};
    spec.lambda = 0.0;
    EXPECT_THROW(spec.validate(), ConfigError);
    spec.lambda = 1.0;
    spec.gpu_demands = {{1, 0.5}, {2, 0.4}};
    EXPECT_THROW(spec.validate(), ConfigError);
    EXPECT_THROW(Split::parse("20,70"), ConfigError);
    const auto s = Split::parse("20,70,10");
    EXPECT_EQ(s.language, 70.0);
    EXPECT_EQ(parse_trace_mode("static"), TraceMode::batch);
    EXPECT_EQ(to_string(TraceMode::batch), "static");
}

} // namespace
