// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` configuration. Blank lines and `#` comments are
// ignored. Later assignments override earlier ones, so defaults < file <
// command-line overrides is just the order in which they are applied.
#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kane/training.hpp"

namespace kane {

using KeyValues = std::map<std::string, std::string>;

/// Throws ParseError on a line without `=` or with an empty key.
KeyValues parse_key_values(std::string_view text, std::string_view source = "<config>");

/// Splits `key=value`; throws ConfigError when malformed.
std::pair<std::string, std::string> parse_assignment(std::string_view text);

/// Applies one setting. Throws ConfigError for an unknown key or bad value.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);
void apply_settings(TrainConfig& config, const KeyValues& values);

/// Every training key with its current value, in a stable order.
KeyValues to_key_values(const TrainConfig& config);
std::string format_key_values(const KeyValues& values);

/// Names accepted by apply_setting.
std::vector<std::string> train_config_keys();

}  // namespace kane
