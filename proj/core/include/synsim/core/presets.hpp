#pragma once

#include "synsim/core/types.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace synsim::core {

/// The ten reference archetypes: five image, three language, two speech.
std::span<const JobClass> preset_classes();

std::vector<JobClass> presets_for(Task task);

/// Throws ConfigError for an unknown name.
const JobClass& preset(std::string_view name);

/// 8 GPU / 24 core / 500 GB server used throughout the evaluation.
ServerSpec reference_server();

} // namespace synsim::core
