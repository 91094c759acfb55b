#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "sysid/experiments.hpp"

namespace sysid {

inline constexpr const char* kToolVersion = "0.1.0";

/// Unreadable, malformed, or schema-violating configuration.
class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Frequencies may be plain numbers in rad/s or exact rational multiples of
/// pi given as strings: "pi", "5pi", "pi/3", "7pi/2", "0.5pi". Plain numeric
/// strings are accepted too.
double parse_frequency_value(const nlohmann::json& value);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config_file(const std::string& path);

/// Stable hex digest of the canonical serialized form (FNV-1a, 64-bit).
std::string config_digest(const nlohmann::json& j);

/// 17 significant digits: enough to round-trip any double.
std::string format_number(double value);

}  // namespace sysid
