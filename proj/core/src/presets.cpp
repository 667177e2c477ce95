#include "synsim/core/presets.hpp"

#include "synsim/core/errors.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

namespace synsim::core {

namespace {

// Image models read ImageNet-sized data (1.28M samples, ~110 KB each) and
// saturate between 6 and 12 cores per GPU. Language models need one or two
// cores and hold their dataset in process memory. Speech models are CPU bound
// with large raw-audio datasets.
const std::array<JobClass, 10> kPresets = {{
    // name, task, gpu_rate, cpu_rate, dataset_samples, mb_per_sample, min_cpu, min_mem_gb
    {"shufflenet_v2", Task::image, 1800.0, 150.0, 1.281e6, 0.11, 1, 10.0},
    {"alexnet", Task::image, 1800.0, 180.0, 1.281e6, 0.11, 1, 10.0},
    {"resnet18", Task::image, 1800.0, 200.0, 1.281e6, 0.11, 1, 10.0},
    {"mobilenet_v2", Task::image, 1200.0, 150.0, 1.281e6, 0.11, 1, 10.0},
    {"resnet50", Task::image, 780.0, 130.0, 1.281e6, 0.11, 1, 10.0},
    {"gnmt", Task::language, 200.0, 1000.0, 4.0e6, 0.004, 1, 20.0},
    {"lstm", Task::language, 400.0, 800.0, 2.0e6, 0.0001, 1, 10.0},
    {"transformer_xl", Task::language, 300.0, 200.0, 1.0e6, 0.0005, 1, 20.0},
    {"m5", Task::speech, 400.0, 50.0, 1.0e5, 1.0, 1, 10.0},
    {"deepspeech", Task::speech, 180.0, 30.0, 2.81e5, 0.5, 1, 20.0},
}};

} // namespace

std::span<const JobClass> preset_classes() {
    return kPresets;
}

std::vector<JobClass> presets_for(Task task) {
    std::vector<JobClass> out;
    std::copy_if(kPresets.begin(), kPresets.end(), std::back_inserter(out),
                 [task](const JobClass& c) { return c.task == task; });
    return out;
}

const JobClass& preset(std::string_view name) {
    auto it = std::find_if(kPresets.begin(), kPresets.end(),
                           [name](const JobClass& c) { return c.name == name; });
    if (it == kPresets.end()) {
        throw ConfigError(fmt::format("unknown job class '{}'", name));
    }
    return *it;
}

ServerSpec reference_server() {
    return ServerSpec{8, 24, 500.0, 0.1, 0};
}

} // namespace synsim::core
