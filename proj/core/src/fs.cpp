// SPDX-License-Identifier: Apache-2.0
#include "monkey/fs.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "monkey/error.hpp"

namespace monkey {

void atomic_write_file(const std::string& path, const void* data, std::size_t size) {
    const std::filesystem::path target(path);
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io", "cannot open '" + tmp.string() + "' for writing");
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) throw Error("io", "write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        throw Error("io", "rename '" + tmp.string() + "' -> '" + path + "': " + ec.message());
    }
}

void atomic_write_file(const std::string& path, const std::string& content) {
    atomic_write_file(path, content.data(), content.size());
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw Error("io", "read failed for '" + path + "'");
    return bytes;
}

std::string read_text_file(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

}  // namespace monkey
