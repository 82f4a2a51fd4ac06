#pragma once

// Feeder description files (JSON). See docs/feeder-schema.md for the fields.

#include "vsens/netmodel.hpp"

#include <filesystem>
#include <string_view>
#include <vector>

namespace vsens {

/// Parses and validates a feeder. Throws InputError with line/column for
/// malformed JSON and with the offending key path for schema violations.
NetworkModel parse_feeder(std::string_view text, std::string_view source = "<input>");

NetworkModel load_feeder(const std::filesystem::path& path);

/// Applies "reg1=16,reg2=-3" on top of the model's current taps.
std::vector<double> parse_tap_overrides(const NetworkModel& model, std::string_view spec);

}  // namespace vsens
