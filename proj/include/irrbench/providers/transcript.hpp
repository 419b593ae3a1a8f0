#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "irrbench/jsonl.hpp"
#include "irrbench/providers/types.hpp"

namespace irrbench::providers {

enum class TranscriptMode { record, replay, passthrough };

inline TranscriptMode transcript_mode_from_string(const std::string& s) {
    if (s == "record") return TranscriptMode::record;
    if (s == "replay") return TranscriptMode::replay;
    if (s == "passthrough") return TranscriptMode::passthrough;
    throw std::invalid_argument("unknown transcript mode '" + s + "'");
}

inline const char* to_string(TranscriptMode m) {
    switch (m) {
        case TranscriptMode::record: return "record";
        case TranscriptMode::replay: return "replay";
        case TranscriptMode::passthrough: return "passthrough";
    }
    return "passthrough";
}

struct TranscriptEntry {
    std::string digest;
    std::string tag;
    std::string response;
};

/// Digest -> response map backed by an append-only JSONL file
/// (`{"digest":..., "tag":..., "response":...}` per line). Without a path the
/// transcript lives in memory only.
class Transcript {
public:
    explicit Transcript(TranscriptMode mode, std::optional<std::filesystem::path> path = std::nullopt)
        : mode_(mode), path_(std::move(path)) {
        if (path_ && std::filesystem::exists(*path_)) {
            for_each_jsonl(*path_, [&](const json& j, std::size_t) {
                TranscriptEntry e{required_string(j, "digest"), optional_string(j, "tag"),
                                  required_string(j, "response")};
                entries_.try_emplace(e.digest, std::move(e));
            });
        } else if (mode_ == TranscriptMode::replay && path_) {
            throw std::runtime_error("replay transcript not found: " + path_->string());
        }
    }

    TranscriptMode mode() const { return mode_; }
    const std::optional<std::filesystem::path>& path() const { return path_; }

    std::optional<std::string> lookup(const std::string& digest) const {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(digest);
        if (it == entries_.end()) return std::nullopt;
        return it->second.response;
    }

    /// First write for a digest wins; later duplicates are ignored.
    void append(TranscriptEntry entry) {
        std::lock_guard lock(mutex_);
        if (entries_.count(entry.digest)) return;
        if (path_) {
            if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
            std::ofstream out(*path_, std::ios::binary | std::ios::app);
            if (!out) throw std::runtime_error("cannot append to transcript " + path_->string());
            out << json{{"digest", entry.digest}, {"tag", entry.tag}, {"response", entry.response}}.dump() << '\n';
        }
        auto key = entry.digest;
        entries_.emplace(std::move(key), std::move(entry));
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

    /// Digest of the sorted entry set; independent of append order.
    std::string content_digest() const {
        std::lock_guard lock(mutex_);
        std::string all;
        for (const auto& [d, e] : entries_) all += d + "\t" + e.response + "\n";
        return sha256_hex(all);
    }

private:
    TranscriptMode mode_;
    std::optional<std::filesystem::path> path_;
    std::map<std::string, TranscriptEntry> entries_;
    mutable std::mutex mutex_;
};

inline std::string serialize_embeddings(const std::vector<EmbeddingVector>& vectors) {
    json arr = json::array();
    for (const auto& v : vectors) arr.push_back({{"model_id", v.model_id}, {"values", v.values}});
    return arr.dump();
}

inline std::vector<EmbeddingVector> deserialize_embeddings(const std::string& s) {
    std::vector<EmbeddingVector> out;
    auto arr = json::parse(s);
    for (const auto& v : arr) {
        out.push_back({v.at("values").get<std::vector<double>>(), v.at("model_id").get<std::string>()});
    }
    return out;
}

/// Wraps live backends with a transcript. Record: hits return the stored
/// response, misses call through and append. Replay: hits only, a miss is an
/// error and no backend is touched. Passthrough: always call through.
class RecordingProvider final : public ChatBackend, public EmbeddingBackend {
public:
    RecordingProvider(Transcript& transcript, ChatBackend* chat, EmbeddingBackend* embed)
        : transcript_(transcript), chat_(chat), embed_(embed) {}

    std::string chat(const ChatRequest& req) override {
        req.validate();
        const auto digest = request_digest(req);
        if (transcript_.mode() != TranscriptMode::passthrough) {
            if (auto hit = transcript_.lookup(digest)) return *hit;
            if (transcript_.mode() == TranscriptMode::replay) {
                throw ProviderError(ProviderErrorKind::replay_miss, "no transcript entry for " + digest +
                                                                        " (tag " + req.tag + ")");
            }
        }
        if (!chat_) throw ProviderError(ProviderErrorKind::invalid_request, "no chat backend configured");
        auto response = chat_->chat(req);
        if (transcript_.mode() == TranscriptMode::record) transcript_.append({digest, req.tag, response});
        return response;
    }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        validate_embed_batch(texts);
        const auto digest = request_digest(texts);
        if (transcript_.mode() != TranscriptMode::passthrough) {
            if (auto hit = transcript_.lookup(digest)) {
                auto vectors = deserialize_embeddings(*hit);
                check_embeddings(vectors, texts.size());
                return vectors;
            }
            if (transcript_.mode() == TranscriptMode::replay) {
                throw ProviderError(ProviderErrorKind::replay_miss, "no transcript entry for embed batch " + digest);
            }
        }
        if (!embed_) throw ProviderError(ProviderErrorKind::invalid_request, "no embedding backend configured");
        auto vectors = embed_->embed(texts);
        check_embeddings(vectors, texts.size());
        if (transcript_.mode() == TranscriptMode::record) {
            transcript_.append({digest, "embed", serialize_embeddings(vectors)});
        }
        return vectors;
    }

private:
    Transcript& transcript_;
    ChatBackend* chat_;
    EmbeddingBackend* embed_;
};

}  // namespace irrbench::providers
