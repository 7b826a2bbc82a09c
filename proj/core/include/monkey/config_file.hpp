// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace monkey {

/// `key = value` lines, UTF-8, `#` comment lines, blank lines ignored.
/// Values may be double-quoted (required when they contain spaces); the
/// same format the CLI accepts via --config, so any file this library
/// writes can be fed straight back to the command line.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);

/// Formats entries in the given order (quoting where needed).
std::string format_config(const std::vector<std::pair<std::string, std::string>>& entries);

void save_config_file(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace monkey
