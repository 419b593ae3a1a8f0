#pragma once

// Shared helpers for the unit tests and the acceptance binary.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "irrbench/providers/types.hpp"

namespace irrbench::testkit {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return fs::path(IRRBENCH_FIXTURE_DIR); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "irrbench") {
        std::random_device rd;
        for (;;) {
            path_ = fs::temp_directory_path() / (prefix + "-" + std::to_string(rd()));
            if (fs::create_directory(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

/// Chat backend driven by a lambda; counts and keeps every request.
class FnChat final : public providers::ChatBackend {
public:
    using Fn = std::function<std::string(const providers::ChatRequest&)>;
    explicit FnChat(Fn fn) : fn_(std::move(fn)) {}

    std::string chat(const providers::ChatRequest& req) override {
        {
            std::lock_guard lock(mu_);
            requests.push_back(req);
        }
        ++calls;
        return fn_(req);
    }

    std::atomic<int> calls{0};
    std::vector<providers::ChatRequest> requests;

private:
    Fn fn_;
    std::mutex mu_;
};

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace irrbench::testkit
