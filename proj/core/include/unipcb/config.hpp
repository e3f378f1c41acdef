#pragma once

#include <map>
#include <string>

namespace unipcb {

/// Flat key=value configuration. Lines are `key = value`; blank lines and
/// `#` comments are skipped; later keys override earlier ones.
using Config = std::map<std::string, std::string>;

Config parse_config_text(const std::string& text);
Config load_config_file(const std::string& path);

/// Resolves the effective config: an explicit path wins, otherwise the
/// UNIPCB_CONFIG environment variable names the file, otherwise empty.
Config load_config(const std::string& cli_path);

std::string config_get(const Config& cfg, const std::string& key, const std::string& fallback);
double config_get_double(const Config& cfg, const std::string& key, double fallback);
std::size_t config_get_size(const Config& cfg, const std::string& key, std::size_t fallback);

} // namespace unipcb
