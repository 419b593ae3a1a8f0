#pragma once

// OpenAI-compatible HTTP backend (chat completions + embeddings).

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <string>
#include <vector>

#include "irrbench/jsonl.hpp"
#include "irrbench/providers/types.hpp"

namespace irrbench::providers {

struct HttpEndpoint {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string api_key;
    std::string chat_model = "gpt-3.5-turbo";
    std::string embedding_model = "text-embedding-3-small";
    std::chrono::seconds timeout{60};

    /// IRRBENCH_API_BASE, IRRBENCH_API_KEY, IRRBENCH_CHAT_MODEL, IRRBENCH_EMBED_MODEL.
    static HttpEndpoint from_env() {
        HttpEndpoint ep;
        auto get = [](const char* name) -> std::string {
            const char* v = std::getenv(name);
            return v ? std::string(v) : std::string();
        };
        ep.base_url = get("IRRBENCH_API_BASE");
        ep.api_key = get("IRRBENCH_API_KEY");
        if (auto m = get("IRRBENCH_CHAT_MODEL"); !m.empty()) ep.chat_model = m;
        if (auto m = get("IRRBENCH_EMBED_MODEL"); !m.empty()) ep.embedding_model = m;
        if (ep.base_url.empty()) {
            throw ProviderError(ProviderErrorKind::invalid_request, "IRRBENCH_API_BASE is not set");
        }
        return ep;
    }
};

class HttpProvider final : public ChatBackend, public EmbeddingBackend {
public:
    explicit HttpProvider(HttpEndpoint endpoint) : ep_(std::move(endpoint)) {
        auto scheme_end = ep_.base_url.find("://");
        if (scheme_end == std::string::npos) {
            throw ProviderError(ProviderErrorKind::invalid_request, "base url needs a scheme: " + ep_.base_url);
        }
        auto path_start = ep_.base_url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            origin_ = ep_.base_url;
        } else {
            origin_ = ep_.base_url.substr(0, path_start);
            prefix_ = ep_.base_url.substr(path_start);
        }
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }

    std::string chat(const ChatRequest& req) override {
        req.validate();
        json body = {
            {"model", ep_.chat_model},
            {"messages", json::array({{{"role", "user"}, {"content", req.prompt_text}}})},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens},
        };
        auto reply = post("/chat/completions", body);
        try {
            const auto& content = reply.at("choices").at(0).at("message").at("content");
            return content.is_null() ? std::string() : content.get<std::string>();
        } catch (const json::exception& e) {
            throw ProviderError(ProviderErrorKind::bad_response, std::string("chat reply: ") + e.what());
        }
    }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        validate_embed_batch(texts);
        auto reply = post("/embeddings", {{"model", ep_.embedding_model}, {"input", texts}});
        std::vector<EmbeddingVector> out(texts.size());
        try {
            const auto& data = reply.at("data");
            if (data.size() != texts.size()) {
                throw ProviderError(ProviderErrorKind::bad_response, "embedding count mismatch");
            }
            for (std::size_t i = 0; i < data.size(); ++i) {
                auto idx = data[i].value("index", i);
                if (idx >= out.size()) throw ProviderError(ProviderErrorKind::bad_response, "embedding index out of range");
                out[idx] = {data[i].at("embedding").get<std::vector<double>>(), reply.value("model", ep_.embedding_model)};
            }
        } catch (const json::exception& e) {
            throw ProviderError(ProviderErrorKind::bad_response, std::string("embedding reply: ") + e.what());
        }
        check_embeddings(out, texts.size());
        return out;
    }

private:
    json post(const std::string& path, const json& body) const {
        httplib::Client cli(origin_);
        cli.set_connection_timeout(ep_.timeout);
        cli.set_read_timeout(ep_.timeout);
        cli.set_write_timeout(ep_.timeout);
        httplib::Headers headers;
        if (!ep_.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep_.api_key);
        auto res = cli.Post(prefix_ + path, headers, body.dump(), "application/json");
        if (!res) {
            auto err = res.error();
            auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                            ? ProviderErrorKind::timeout
                            : ProviderErrorKind::network;
            throw ProviderError(kind, "request to " + origin_ + prefix_ + path + " failed: " + httplib::to_string(err));
        }
        if (res->status == 429 || res->status == 402) {
            throw ProviderError(ProviderErrorKind::quota, "HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        if (res->status == 408 || res->status >= 500) {
            throw ProviderError(ProviderErrorKind::network, "HTTP " + std::to_string(res->status));
        }
        if (res->status < 200 || res->status >= 300) {
            throw ProviderError(ProviderErrorKind::bad_response, "HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        try {
            return json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw ProviderError(ProviderErrorKind::bad_response, std::string("invalid JSON body: ") + e.what());
        }
    }

    HttpEndpoint ep_;
    std::string origin_;
    std::string prefix_;
};

}  // namespace irrbench::providers
