#include "unipcb/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "unipcb/errors.hpp"

namespace unipcb {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace

Config parse_config_text(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: missing '=' on line " + std::to_string(line_no));
        const std::string key = trim(stripped.substr(0, eq));
        if (key.empty()) throw ValidationError("config: empty key on line " + std::to_string(line_no));
        cfg[key] = trim(stripped.substr(eq + 1));
    }
    return cfg;
}

Config load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

Config load_config(const std::string& cli_path) {
    if (!cli_path.empty()) return load_config_file(cli_path);
    if (const char* env = std::getenv("UNIPCB_CONFIG"); env && *env) return load_config_file(env);
    return {};
}

std::string config_get(const Config& cfg, const std::string& key, const std::string& fallback) {
    const auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
}

double config_get_double(const Config& cfg, const std::string& key, double fallback) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(it->second);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config: key '" + key + "' is not a number: " + it->second);
    }
}

std::size_t config_get_size(const Config& cfg, const std::string& key, std::size_t fallback) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        std::size_t used = 0;
        const long long v = std::stoll(it->second, &used);
        if (used != it->second.size() || v < 0) throw std::invalid_argument(it->second);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ValidationError("config: key '" + key + "' is not a non-negative integer: " + it->second);
    }
}

} // namespace unipcb
