#pragma once

#include <filesystem>

#include "exitrack/kv_file.hpp"
#include "exitrack/tracker_net.hpp"

namespace exitrack {

/// Text header ("EXITRACK-CKPT v1", network config, one line per tensor) followed by
/// every tensor as little-endian doubles in parameter order.
void save_checkpoint(const TrackerNet& net, const std::filesystem::path& path);
[[nodiscard]] TrackerNet load_checkpoint(const std::filesystem::path& path);

/// <checkpoint>.calib
[[nodiscard]] std::filesystem::path calibration_path(const std::filesystem::path& checkpoint);

}  // namespace exitrack
