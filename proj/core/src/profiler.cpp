#include "synsim/profiler/profiler.hpp"

#include "synsim/core/errors.hpp"
#include "synsim/core/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <fmt/format.h>

namespace synsim::profiler {

using core::JobClass;
using core::Resources;

SensitivityMatrix::SensitivityMatrix(std::vector<int> cpu_axis, std::vector<std::int64_t> mem_axis_mb,
                                     std::vector<double> values, std::vector<int> sampled_cpus)
    : cpu_axis_(std::move(cpu_axis))
    , mem_axis_mb_(std::move(mem_axis_mb))
    , values_(std::move(values))
    , sampled_cpus_(std::move(sampled_cpus)) {
    if (values_.size() != cpu_axis_.size() * mem_axis_mb_.size()) {
        throw InternalError(fmt::format("matrix shape {}x{} does not match {} values", cpu_axis_.size(),
                                        mem_axis_mb_.size(), values_.size()));
    }
    if (!std::is_sorted(cpu_axis_.begin(), cpu_axis_.end()) ||
        !std::is_sorted(mem_axis_mb_.begin(), mem_axis_mb_.end())) {
        throw InternalError("matrix axes must be ascending");
    }
}

std::size_t SensitivityMatrix::cpu_floor_index(int cpus) const noexcept {
    auto it = std::upper_bound(cpu_axis_.begin(), cpu_axis_.end(), cpus);
    if (it == cpu_axis_.begin()) {
        return npos;
    }
    return static_cast<std::size_t>(std::distance(cpu_axis_.begin(), it) - 1);
}

std::size_t SensitivityMatrix::mem_floor_index(std::int64_t mem_mb) const noexcept {
    auto it = std::upper_bound(mem_axis_mb_.begin(), mem_axis_mb_.end(), mem_mb);
    if (it == mem_axis_mb_.begin()) {
        return npos;
    }
    return static_cast<std::size_t>(std::distance(mem_axis_mb_.begin(), it) - 1);
}

double SensitivityMatrix::value_at(int cpus, std::int64_t mem_mb) const noexcept {
    const auto ci = cpu_floor_index(cpus);
    const auto mi = mem_floor_index(mem_mb);
    if (ci == npos || mi == npos) {
        return 0.0;
    }
    return at(ci, mi);
}

double SensitivityMatrix::peak() const noexcept {
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

bool SensitivityMatrix::valid() const noexcept {
    for (std::size_t ci = 0; ci < rows(); ++ci) {
        for (std::size_t mi = 0; mi < cols(); ++mi) {
            const double v = at(ci, mi);
            if (!std::isfinite(v) || v < 0.0) {
                return false;
            }
            if (ci > 0 && at(ci - 1, mi) > v) {
                return false;
            }
            if (mi > 0 && at(ci, mi - 1) > v) {
                return false;
            }
        }
    }
    return true;
}

void SensitivityMatrix::write_csv(std::ostream& os) const {
    os << "cpus";
    for (auto m : mem_axis_mb_) {
        os << ',' << fmt::format("{}", core::mb_to_gb(m));
    }
    os << '\n';
    for (std::size_t ci = 0; ci < rows(); ++ci) {
        os << cpu_axis_[ci];
        for (std::size_t mi = 0; mi < cols(); ++mi) {
            os << ',' << fmt::format("{:.6g}", at(ci, mi));
        }
        os << '\n';
    }
}

ProfileGeometry ProfileGeometry::for_server(const JobClass& cls, const core::ServerSpec& server, int gpus,
                                            const Resources& cluster_totals) {
    if (gpus < 1 || gpus > cluster_totals.gpus) {
        throw DemandError(fmt::format("{} GPUs requested on a {}-GPU cluster", gpus, cluster_totals.gpus));
    }
    ProfileGeometry geo;
    geo.gpus = gpus;
    geo.min_cpus = std::max(1, cls.min_cpu);
    // One GPU may at most claim a whole server's CPU and memory.
    geo.max_cpus = std::max(geo.min_cpus, std::min(server.cpus * gpus, cluster_totals.cpus));
    geo.full_mem_mb = std::min(server.capacity().mem_mb * gpus, cluster_totals.mem_mb);
    geo.proportional = core::proportional_total(server, gpus);
    geo.storage_bw = server.storage_bw;
    return geo;
}

CpuProfile profile_cpu_points(const JobClass& cls, const ProfileGeometry& geo, double threshold,
                              double minutes_per_sample) {
    std::map<int, double> measured;
    const double full_mem_gb = core::mb_to_gb(geo.full_mem_mb);
    auto measure = [&](int cpus) {
        auto [it, inserted] = measured.try_emplace(cpus, 0.0);
        if (inserted) {
            it->second = core::oracle_throughput(cls, geo.gpus, cpus, full_mem_gb, geo.storage_bw);
        }
        return it->second;
    };

    int lo = geo.min_cpus;
    int hi = geo.max_cpus;
    measure(lo);
    measure(hi);
    if (geo.proportional.cpus >= lo && geo.proportional.cpus <= hi) {
        measure(geo.proportional.cpus);
    }

    if (threshold <= 0.0) {
        for (int c = lo; c <= hi; ++c) {
            measure(c);
        }
    } else {
        auto gain = [](double from, double to) {
            return from > 0.0 ? (to - from) / from : (to > 0.0 ? HUGE_VAL : 0.0);
        };
        while (hi - lo > 1 && gain(measure(lo), measure(hi)) >= threshold) {
            const int mid = lo + (hi - lo) / 2;
            if (gain(measure(mid), measure(hi)) < threshold) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    CpuProfile profile;
    profile.samples.reserve(measured.size());
    for (const auto& [cpus, tput] : measured) {
        profile.samples.push_back({cpus, tput});
    }
    profile.profiling_minutes = static_cast<double>(measured.size()) * minutes_per_sample;
    return profile;
}

std::vector<std::int64_t> memory_axis(const JobClass& cls, const ProfileGeometry& geo) {
    constexpr std::int64_t kStep = 50 * core::kMbPerGb;
    const std::int64_t floor_mb = std::min(core::gb_to_mb(cls.min_mem_gb), geo.full_mem_mb);
    std::vector<std::int64_t> axis;
    if (floor_mb > 0) {
        axis.push_back(floor_mb);
    }
    for (std::int64_t m = kStep; m <= geo.full_mem_mb; m += kStep) {
        if (m >= floor_mb) {
            axis.push_back(m);
        }
    }
    for (std::int64_t extra : {geo.proportional.mem_mb, core::gb_to_mb(cls.dataset_gb()), geo.full_mem_mb}) {
        if (extra >= floor_mb && extra <= geo.full_mem_mb && extra > 0) {
            axis.push_back(extra);
        }
    }
    std::sort(axis.begin(), axis.end());
    axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
    return axis;
}

namespace {

// Monotone piecewise-linear interpolation through the measured knots,
// clamped flat outside them.
double interpolate(const std::vector<CpuSample>& knots, int cpus) {
    if (cpus <= knots.front().cpus) {
        return knots.front().throughput;
    }
    if (cpus >= knots.back().cpus) {
        return knots.back().throughput;
    }
    auto hi = std::lower_bound(knots.begin(), knots.end(), cpus,
                               [](const CpuSample& s, int c) { return s.cpus < c; });
    if (hi->cpus == cpus) {
        return hi->throughput;
    }
    auto lo = std::prev(hi);
    const double t = static_cast<double>(cpus - lo->cpus) / static_cast<double>(hi->cpus - lo->cpus);
    return lo->throughput + t * (hi->throughput - lo->throughput);
}

} // namespace

SensitivityMatrix fill_matrix_optimistic(const JobClass& cls, const CpuProfile& profile,
                                         const ProfileGeometry& geo) {
    if (profile.samples.empty()) {
        throw InternalError("cannot fill a sensitivity matrix without samples");
    }
    std::vector<int> cpu_axis;
    for (int c = geo.min_cpus; c <= geo.max_cpus; ++c) {
        cpu_axis.push_back(c);
    }
    auto mem_axis = memory_axis(cls, geo);

    std::vector<double> cpu_curve;
    cpu_curve.reserve(cpu_axis.size());
    double running = 0.0;
    for (int c : cpu_axis) {
        running = std::max(running, interpolate(profile.samples, c));
        cpu_curve.push_back(running);
    }

    std::vector<double> values;
    values.reserve(cpu_axis.size() * mem_axis.size());
    for (double cpu_bound : cpu_curve) {
        for (auto m : mem_axis) {
            values.push_back(std::min(cpu_bound, core::disk_rate(cls, core::mb_to_gb(m), geo.storage_bw)));
        }
    }

    std::vector<int> sampled;
    sampled.reserve(profile.samples.size());
    for (const auto& s : profile.samples) {
        sampled.push_back(s.cpus);
    }
    return SensitivityMatrix(std::move(cpu_axis), std::move(mem_axis), std::move(values), std::move(sampled));
}

DemandVector derive_demand_vector(const SensitivityMatrix& matrix, int gpus, double saturation_eps) {
    if (matrix.empty()) {
        throw InternalError("empty sensitivity matrix");
    }
    const double peak = matrix.peak();
    const double target = (1.0 - saturation_eps) * peak;
    for (std::size_t ci = 0; ci < matrix.rows(); ++ci) {
        for (std::size_t mi = 0; mi < matrix.cols(); ++mi) {
            if (matrix.at(ci, mi) >= target) {
                return {gpus, matrix.cpu_axis()[ci], matrix.mem_axis_mb()[mi], matrix.at(ci, mi)};
            }
        }
    }
    throw InternalError("no cell reaches the saturation target");
}

ProfiledJob profile_job(const JobClass& cls, int gpus, const core::ServerSpec& server,
                        const Resources& cluster_totals, const ProfilerOptions& options) {
    const auto geo = ProfileGeometry::for_server(cls, server, gpus, cluster_totals);
    const auto cpu_profile = profile_cpu_points(cls, geo, options.threshold, options.minutes_per_sample);
    ProfiledJob out;
    out.matrix = fill_matrix_optimistic(cls, cpu_profile, geo);
    out.demand = derive_demand_vector(out.matrix, gpus, options.saturation_eps);
    out.proportional = geo.proportional;
    out.proportional_throughput = out.matrix.value_at(geo.proportional);
    out.profiling_minutes = cpu_profile.profiling_minutes;
    out.samples = cpu_profile.samples.size();
    return out;
}

} // namespace synsim::profiler
