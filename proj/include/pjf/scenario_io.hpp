#pragma once

#include "pjf/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace pjf {

/// Parses a scenario document. Accepts the canonical form written by
/// `scenario_to_json` plus the shorthand descriptor kinds documented in
/// docs/scenario_schema.md. Malformed input throws InvalidConfig; an unknown
/// descriptor kind throws UnknownFunctionDescriptor. No validation is done.
ScenarioConfig scenario_from_json(const std::string& text);

/// Canonical, fully expanded form. Doubles are written in shortest
/// round-trip notation so that parsing the output reproduces every field.
std::string scenario_to_json(const ScenarioConfig& config);

ScenarioConfig load_scenario(const std::filesystem::path& path);

/// 64-bit FNV-1a, printed as 16 hex digits by the callers.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace pjf
