#include "synsim/workload/workload.hpp"

#include "synsim/core/errors.hpp"
#include "synsim/core/oracle.hpp"
#include "synsim/core/presets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>

#include <fmt/format.h>

namespace synsim::workload {

using core::Task;

std::string_view to_string(TraceMode mode) noexcept {
    return mode == TraceMode::batch ? "static" : "dynamic";
}

TraceMode parse_trace_mode(std::string_view name) {
    if (name == "static" || name == "batch") {
        return TraceMode::batch;
    }
    if (name == "dynamic") {
        return TraceMode::dynamic;
    }
    throw ConfigError(fmt::format("unknown trace mode '{}' (expected static or dynamic)", name));
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = s.substr(1, s.size() - 2);
    }
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) {
            return out;
        }
        start = comma + 1;
    }
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
    T v{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        return std::nullopt;
    }
    return v;
}

} // namespace

Split Split::parse(std::string_view text) {
    const auto parts = split_fields(text);
    if (parts.size() != 3) {
        throw ConfigError(fmt::format("split '{}' needs three comma-separated percentages", text));
    }
    Split s;
    double* dst[] = {&s.image, &s.language, &s.speech};
    for (std::size_t i = 0; i < 3; ++i) {
        auto v = parse_number<double>(parts[i]);
        if (!v) {
            throw ConfigError(fmt::format("split '{}': '{}' is not a number", text, parts[i]));
        }
        *dst[i] = *v;
    }
    return s;
}

double Split::share(Task task) const noexcept {
    switch (task) {
    case Task::image: return image;
    case Task::language: return language;
    case Task::speech: return speech;
    }
    return 0.0;
}

GpuDemandTable default_gpu_demands() {
    return {{1, 0.70}, {2, 0.10}, {4, 0.10}, {8, 0.05}, {16, 0.05}};
}

GpuDemandTable single_gpu_demands() {
    return {{1, 1.0}};
}

void TraceSpec::validate() const {
    if (n_jobs < 0) {
        throw ConfigError(fmt::format("n_jobs must be >= 0, got {}", n_jobs));
    }
    if (mode == TraceMode::dynamic && !(lambda > 0.0)) {
        throw ConfigError(fmt::format("lambda must be > 0 for a dynamic trace, got {}", lambda));
    }
    if (split.image < 0 || split.language < 0 || split.speech < 0 ||
        std::abs(split.image + split.language + split.speech - 100.0) > 1e-6) {
        throw ConfigError(fmt::format("split ({}, {}, {}) must be non-negative and sum to 100", split.image,
                                      split.language, split.speech));
    }
    if (gpu_demands.empty()) {
        throw ConfigError("gpu demand table is empty");
    }
    double total = 0.0;
    for (const auto& [g, p] : gpu_demands) {
        if (g < 1 || p < 0.0) {
            throw ConfigError(fmt::format("bad gpu demand entry {}:{}", g, p));
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError(fmt::format("gpu demand probabilities sum to {}, not 1", total));
    }
}

double unit_uniform(std::mt19937_64& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double sample_duration_minutes(std::mt19937_64& rng) noexcept {
    const double pick = unit_uniform(rng);
    const double u = unit_uniform(rng);
    const double x = pick < 0.8 ? 1.5 + 1.5 * u : 3.0 + u;
    return std::pow(10.0, x);
}

namespace {

constexpr std::uint64_t kArrivalStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kFillStream = 0xc2b2ae3d27d4eb4fULL;

Task draw_task(const Split& split, std::mt19937_64& rng) {
    const double u = unit_uniform(rng) * 100.0;
    double acc = 0.0;
    Task last = Task::image;
    for (Task t : {Task::image, Task::language, Task::speech}) {
        if (split.share(t) <= 0.0) {
            continue;
        }
        acc += split.share(t);
        last = t;
        if (u < acc) {
            return t;
        }
    }
    return last;
}

std::string draw_model(Task task, std::mt19937_64& rng) {
    const auto models = core::presets_for(task);
    const auto k = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(models.size()));
    return models[std::min(k, models.size() - 1)].name;
}

int draw_gpus(const GpuDemandTable& table, std::mt19937_64& rng) {
    const double u = unit_uniform(rng);
    double acc = 0.0;
    for (const auto& [g, p] : table) {
        acc += p;
        if (u < acc) {
            return g;
        }
    }
    return table.back().first;
}

} // namespace

Trace gen_trace(const TraceSpec& spec) {
    spec.validate();
    std::mt19937_64 attrs(spec.seed);
    std::mt19937_64 gaps(spec.seed ^ kArrivalStream);
    Trace trace;
    trace.jobs.reserve(static_cast<std::size_t>(spec.n_jobs));
    double clock = 0.0;
    for (int i = 0; i < spec.n_jobs; ++i) {
        TraceJob j;
        j.id = i;
        j.task = draw_task(spec.split, attrs);
        j.model = draw_model(j.task, attrs);
        j.gpus = draw_gpus(spec.gpu_demands, attrs);
        j.duration_minutes = sample_duration_minutes(attrs);
        const double unit_gap = -std::log1p(-unit_uniform(gaps));
        if (spec.mode == TraceMode::dynamic) {
            if (i > 0) {
                clock += unit_gap * 60.0 / spec.lambda;
            }
            j.arrival = clock;
        }
        trace.jobs.push_back(std::move(j));
    }
    return trace;
}

void save_trace(const Trace& trace, std::ostream& os) {
    os << "job_id,arrival_minutes,gpu_demand,duration_minutes,task,model\n";
    for (const auto& j : trace.jobs) {
        os << fmt::format("{},{:.17g},{},{:.17g},{},{}\n", j.id, j.arrival, j.gpus, j.duration_minutes,
                          core::to_string(j.task), j.model);
    }
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw TraceError(fmt::format("cannot write trace '{}'", path.string()));
    }
    save_trace(trace, os);
}

Trace load_trace(std::istream& is, const TraceSpec& fill) {
    std::mt19937_64 rng(fill.seed ^ kFillStream);
    std::string line;
    std::size_t lineno = 0;

    auto fail = [&](const std::string& what) { return TraceError(fmt::format("line {}: {}", lineno, what)); };

    // Header maps column names to positions.
    int c_id = -1, c_arrival = -1, c_gpus = -1, c_duration = -1, c_task = -1, c_model = -1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!trim(line).empty()) {
            break;
        }
    }
    if (trim(line).empty()) {
        return {};
    }
    const auto header = split_fields(line);
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto h = header[i];
        const int idx = static_cast<int>(i);
        if (h == "job_id") c_id = idx;
        else if (h == "arrival_minutes") c_arrival = idx;
        else if (h == "gpu_demand") c_gpus = idx;
        else if (h == "duration_minutes") c_duration = idx;
        else if (h == "task") c_task = idx;
        else if (h == "model") c_model = idx;
        else throw fail(fmt::format("unknown column '{}'", h));
    }
    if (c_id < 0 || c_arrival < 0 || c_gpus < 0 || c_duration < 0) {
        throw fail("header needs job_id, arrival_minutes, gpu_demand and duration_minutes");
    }

    Trace trace;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        const auto f = split_fields(line);
        if (f.size() != header.size()) {
            throw fail(fmt::format("expected {} fields, found {}", header.size(), f.size()));
        }
        TraceJob j;
        const auto id = parse_number<core::JobId>(f[static_cast<std::size_t>(c_id)]);
        const auto arrival = parse_number<double>(f[static_cast<std::size_t>(c_arrival)]);
        const auto gpus = parse_number<int>(f[static_cast<std::size_t>(c_gpus)]);
        const auto duration = parse_number<double>(f[static_cast<std::size_t>(c_duration)]);
        if (!id) throw fail("job_id is not an integer");
        if (!arrival || !std::isfinite(*arrival) || *arrival < 0.0) throw fail("arrival_minutes must be a number >= 0");
        if (!gpus || *gpus < 1) throw fail("gpu_demand must be an integer >= 1");
        if (!duration || !std::isfinite(*duration) || *duration <= 0.0) throw fail("duration_minutes must be > 0");
        j.id = *id;
        j.arrival = *arrival;
        j.gpus = *gpus;
        j.duration_minutes = *duration;

        const std::string_view task = c_task >= 0 ? f[static_cast<std::size_t>(c_task)] : std::string_view{};
        const std::string_view model = c_model >= 0 ? f[static_cast<std::size_t>(c_model)] : std::string_view{};
        try {
            if (!model.empty()) {
                const auto& cls = core::preset(model);
                if (!task.empty() && core::parse_task(task) != cls.task) {
                    throw fail(fmt::format("model '{}' is not a {} model", model, task));
                }
                j.task = cls.task;
                j.model = cls.name;
            } else {
                j.task = task.empty() ? draw_task(fill.split, rng) : core::parse_task(task);
                j.model = draw_model(j.task, rng);
            }
        } catch (const TraceError&) {
            throw;
        } catch (const Error& e) {
            throw fail(e.what());
        }
        trace.jobs.push_back(std::move(j));
    }
    return trace;
}

Trace load_trace(const std::filesystem::path& path, const TraceSpec& fill) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw TraceError(fmt::format("cannot read trace '{}'", path.string()));
    }
    return load_trace(is, fill);
}

std::vector<core::Job> materialize(const Trace& trace, const core::ServerSpec& server) {
    std::vector<core::Job> jobs;
    jobs.reserve(trace.jobs.size());
    for (const auto& t : trace.jobs) {
        core::Job j;
        j.id = t.id;
        j.cls = core::preset(t.model);
        j.gpu_demand = t.gpus;
        j.arrival = t.arrival;
        j.baseline_rate = core::oracle_throughput(j.cls, core::proportional_total(server, t.gpus), server.storage_bw);
        j.total_samples = t.duration_minutes * 60.0 * j.baseline_rate;
        jobs.push_back(std::move(j));
    }
    return jobs;
}

} // namespace synsim::workload
