#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "irrbench/digest.hpp"
#include "irrbench/text.hpp"

namespace irrbench::providers {

enum class ProviderErrorKind {
    network,
    timeout,
    quota,
    replay_miss,
    dimension_mismatch,
    bad_response,
    invalid_request,
    no_rule,
};

inline const char* to_string(ProviderErrorKind k) {
    switch (k) {
        case ProviderErrorKind::network: return "network";
        case ProviderErrorKind::timeout: return "timeout";
        case ProviderErrorKind::quota: return "quota";
        case ProviderErrorKind::replay_miss: return "replay_miss";
        case ProviderErrorKind::dimension_mismatch: return "dimension_mismatch";
        case ProviderErrorKind::bad_response: return "bad_response";
        case ProviderErrorKind::invalid_request: return "invalid_request";
        case ProviderErrorKind::no_rule: return "no_rule";
    }
    return "unknown";
}

class ProviderError : public std::runtime_error {
public:
    ProviderError(ProviderErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ProviderErrorKind kind() const { return kind_; }
    bool retryable() const { return kind_ == ProviderErrorKind::network || kind_ == ProviderErrorKind::timeout; }

private:
    ProviderErrorKind kind_;
};

struct ChatRequest {
    std::string prompt_text;
    double temperature = 0.0;
    int max_tokens = 512;
    std::string tag;  // pipeline stage label, recorded but not digested

    void validate() const {
        if (text::trim(prompt_text).empty()) {
            throw ProviderError(ProviderErrorKind::invalid_request, "empty prompt");
        }
        if (!(temperature >= 0.0 && temperature <= 1.0)) {
            throw ProviderError(ProviderErrorKind::invalid_request, "temperature outside [0,1]");
        }
        if (max_tokens <= 0) throw ProviderError(ProviderErrorKind::invalid_request, "max_tokens must be positive");
    }
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string model_id;

    bool operator==(const EmbeddingVector&) const = default;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string chat(const ChatRequest& req) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

inline void validate_embed_batch(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ProviderError(ProviderErrorKind::invalid_request, "empty embedding batch");
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (text::collapse_whitespace(texts[i]).empty()) {
            throw ProviderError(ProviderErrorKind::invalid_request,
                                "embedding input " + std::to_string(i) + " is blank");
        }
    }
}

/// Every vector finite, one per input, all of one length.
inline void check_embeddings(const std::vector<EmbeddingVector>& vectors, std::size_t expected) {
    if (vectors.size() != expected) {
        throw ProviderError(ProviderErrorKind::bad_response, "expected " + std::to_string(expected) +
                                                                 " vectors, got " + std::to_string(vectors.size()));
    }
    for (const auto& v : vectors) {
        if (v.values.empty() || v.values.size() != vectors.front().values.size()) {
            throw ProviderError(ProviderErrorKind::dimension_mismatch, "inconsistent embedding lengths");
        }
        for (double x : v.values) {
            if (!std::isfinite(x)) throw ProviderError(ProviderErrorKind::bad_response, "non-finite embedding value");
        }
    }
}

/// SHA-256 over the normalized prompt, temperature and max_tokens.
inline std::string request_digest(const ChatRequest& req) {
    char temp[32];
    std::snprintf(temp, sizeof temp, "%.6f", req.temperature);
    std::string canonical = "chat\n";
    canonical += "temperature=";
    canonical += temp;
    canonical += "\nmax_tokens=" + std::to_string(req.max_tokens) + "\n";
    canonical += text::normalize_prompt(req.prompt_text);
    return sha256_hex(canonical);
}

/// SHA-256 over the whitespace-normalized batch, length-prefixed per text.
inline std::string request_digest(const std::vector<std::string>& embed_batch) {
    std::string canonical = "embed\n" + std::to_string(embed_batch.size()) + "\n";
    for (const auto& t : embed_batch) {
        auto n = text::collapse_whitespace(t);
        canonical += std::to_string(n.size()) + ":" + n + "\n";
    }
    return sha256_hex(canonical);
}

}  // namespace irrbench::providers
