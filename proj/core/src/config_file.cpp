// SPDX-License-Identifier: Apache-2.0
#include "monkey/config_file.hpp"

#include <cctype>

#include "monkey/error.hpp"
#include "monkey/fs.hpp"

namespace monkey {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string unquote(const std::string& value, int line_no) {
    if (value.size() < 2 || value.front() != '"') return value;
    if (value.back() != '"') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated quoted value");
    }
    std::string out;
    for (size_t i = 1; i + 1 < value.size(); ++i) {
        if (value[i] == '\\' && i + 2 < value.size()) {
            ++i;
            out.push_back(value[i]);
        } else {
            out.push_back(value[i]);
        }
    }
    return out;
}

bool needs_quotes(const std::string& value) {
    if (value.empty()) return true;
    for (const char c : value) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == '#' || c == '"') return true;
    }
    return false;
}

std::string quote(const std::string& value) {
    if (!needs_quotes(value)) return value;
    std::string out = "\"";
    for (const char c : value) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap out;
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t nl = text.find('\n', pos);
        const std::string raw =
            text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                              line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (out.count(key)) {
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        out[key] = unquote(trim(line.substr(eq + 1)), line_no);
    }
    return out;
}

ConfigMap load_config_file(const std::string& path) {
    return parse_config_text(read_text_file(path));
}

std::string format_config(const std::vector<std::pair<std::string, std::string>>& entries) {
    std::string out;
    for (const auto& [key, value] : entries) {
        out += key;
        out += " = ";
        out += quote(value);
        out += '\n';
    }
    return out;
}

void save_config_file(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& entries) {
    atomic_write_file(path, format_config(entries));
}

}  // namespace monkey
