#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <semaphore>
#include <thread>

#include "irrbench/providers/types.hpp"

namespace irrbench::providers {

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{500};
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };
};

/// Runs `fn`, retrying retryable ProviderErrors with exponential backoff
/// (base, 2*base, 4*base, ...). The last error is rethrown.
template <class Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const ProviderError& e) {
            if (!e.retryable() || attempt >= policy.max_retries) throw;
            if (policy.sleep) policy.sleep(policy.base_delay * (1 << attempt));
        }
    }
}

/// Bounded retries plus a cap on outstanding requests for a live backend.
class ResilientBackend final : public ChatBackend, public EmbeddingBackend {
public:
    static constexpr std::ptrdiff_t kMaxInflightLimit = 256;

    ResilientBackend(ChatBackend* chat, EmbeddingBackend* embed, RetryPolicy policy, std::ptrdiff_t max_inflight = 4)
        : chat_(chat), embed_(embed), policy_(std::move(policy)), slots_(std::clamp<std::ptrdiff_t>(max_inflight, 1, kMaxInflightLimit)) {}

    std::string chat(const ChatRequest& req) override {
        if (!chat_) throw ProviderError(ProviderErrorKind::invalid_request, "no chat backend configured");
        Slot slot(slots_);
        return with_retries(policy_, [&] { return chat_->chat(req); });
    }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        if (!embed_) throw ProviderError(ProviderErrorKind::invalid_request, "no embedding backend configured");
        Slot slot(slots_);
        return with_retries(policy_, [&] { return embed_->embed(texts); });
    }

private:
    struct Slot {
        explicit Slot(std::counting_semaphore<kMaxInflightLimit>& s) : sem(s) { sem.acquire(); }
        ~Slot() { sem.release(); }
        std::counting_semaphore<kMaxInflightLimit>& sem;
    };

    ChatBackend* chat_;
    EmbeddingBackend* embed_;
    RetryPolicy policy_;
    std::counting_semaphore<kMaxInflightLimit> slots_;
};

}  // namespace irrbench::providers
