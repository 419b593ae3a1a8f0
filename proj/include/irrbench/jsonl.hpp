#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace irrbench {

using json = nlohmann::json;

class JsonlError : public std::runtime_error {
public:
    JsonlError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Calls `fn(record, line_number)` for every non-blank line. Line numbers are 1-based.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(const json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw JsonlError(path.string(), n, std::string("invalid JSON: ") + e.what());
        }
        if (!record.is_object()) throw JsonlError(path.string(), n, "expected a JSON object");
        fn(record, n);
    }
}

inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::vector<json> out;
    for_each_jsonl(path, [&](const json& j, std::size_t) { out.push_back(j); });
    return out;
}

/// One compact JSON object per line; keys sorted (nlohmann's default map ordering).
inline std::string to_jsonl(const std::vector<json>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r.dump(-1, ' ', false, json::error_handler_t::strict);
        out.push_back('\n');
    }
    return out;
}

/// Writes through a temporary file and renames, so readers never see partial output.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
    write_file_atomic(path, to_jsonl(records));
}

/// Append-only JSONL writer, safe for concurrent callers.
class JsonlAppender {
public:
    explicit JsonlAppender(std::filesystem::path path) : path_(std::move(path)) {
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    }

    void append(const json& record) {
        std::lock_guard lock(mutex_);
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) throw std::runtime_error("cannot append to " + path_.string());
        out << record.dump() << '\n';
        out.flush();
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mutex_;
};

inline std::string required_string(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + field + "'");
    if (!it->is_string()) throw std::invalid_argument(std::string("field '") + field + "' must be a string");
    return it->get<std::string>();
}

inline std::string optional_string(const json& j, const char* field, std::string fallback = {}) {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) return fallback;
    if (!it->is_string()) throw std::invalid_argument(std::string("field '") + field + "' must be a string");
    return it->get<std::string>();
}

inline std::vector<std::string> optional_strings(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_array()) throw std::invalid_argument(std::string("field '") + field + "' must be an array");
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string()) throw std::invalid_argument(std::string("field '") + field + "' must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

}  // namespace irrbench
