#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "irrbench/jsonl.hpp"
#include "irrbench/text.hpp"

namespace irrbench::corpus {

enum class PassageSource { wiki, wiki_intro, generated, memory };

inline const char* to_string(PassageSource s) {
    switch (s) {
        case PassageSource::wiki: return "wiki";
        case PassageSource::wiki_intro: return "wiki_intro";
        case PassageSource::generated: return "generated";
        case PassageSource::memory: return "memory";
    }
    return "wiki";
}

inline PassageSource passage_source_from_string(const std::string& s) {
    if (s == "wiki") return PassageSource::wiki;
    if (s == "wiki_intro") return PassageSource::wiki_intro;
    if (s == "generated") return PassageSource::generated;
    if (s == "memory") return PassageSource::memory;
    throw std::invalid_argument("unknown passage source '" + s + "'");
}

struct Passage {
    std::string id;
    std::string title;
    std::string text;
    PassageSource source = PassageSource::wiki;
};

inline json to_json(const Passage& p) {
    return {{"id", p.id}, {"title", p.title}, {"text", p.text}, {"source", to_string(p.source)}};
}

inline Passage passage_from_json(const json& j) {
    return {required_string(j, "id"), optional_string(j, "title"), required_string(j, "text"),
            passage_source_from_string(optional_string(j, "source", "wiki"))};
}

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Corpus snapshot: one `{"id","title","text","source"}` object per line.
inline std::vector<Passage> load_passages(const std::filesystem::path& path) {
    std::vector<Passage> out;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        try {
            out.push_back(passage_from_json(j));
        } catch (const std::exception& e) {
            throw JsonlError(path.string(), line, e.what());
        }
    });
    return out;
}

struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
};

struct DocStats {
    std::unordered_map<std::string, std::uint32_t> term_freq;
    std::size_t length = 0;
};

/// Immutable passage store with the token statistics BM25 needs.
class PassageStore {
public:
    /// Throws CorpusError on an empty stream, a duplicate id or a blank passage.
    static PassageStore ingest(std::vector<Passage> passages) {
        if (passages.empty()) throw CorpusError("empty passage stream");
        PassageStore s;
        s.passages_ = std::move(passages);
        s.docs_.resize(s.passages_.size());
        std::size_t total_len = 0;
        for (std::size_t i = 0; i < s.passages_.size(); ++i) {
            const auto& p = s.passages_[i];
            if (p.id.empty()) throw CorpusError("passage " + std::to_string(i) + " has an empty id");
            if (!s.by_id_.emplace(p.id, i).second) throw CorpusError("duplicate passage id '" + p.id + "'");
            if (text::collapse_whitespace(p.text).empty()) throw CorpusError("passage '" + p.id + "' has blank text");
            auto& d = s.docs_[i];
            auto tokens = text::tokenize(p.text);
            for (auto& tok : tokens) ++d.term_freq[tok];
            d.length = tokens.size();
            total_len += d.length;
            for (const auto& [term, tf] : d.term_freq) {
                s.postings_[term].push_back({static_cast<std::uint32_t>(i), tf});
            }
            if (p.source == PassageSource::wiki_intro) {
                s.intros_.try_emplace(text::normalize_for_match(p.title), i);
            }
        }
        s.avg_length_ = static_cast<double>(total_len) / static_cast<double>(s.passages_.size());
        return s;
    }

    std::size_t size() const { return passages_.size(); }
    const std::vector<Passage>& passages() const { return passages_; }
    const Passage& at(std::size_t i) const { return passages_.at(i); }
    const DocStats& stats(std::size_t i) const { return docs_.at(i); }
    double average_length() const { return avg_length_; }

    const Passage* find(const std::string& id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : &passages_[it->second];
    }

    std::optional<std::size_t> index_of(const std::string& id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t document_frequency(const std::string& term) const {
        auto it = postings_.find(term);
        return it == postings_.end() ? 0 : it->second.size();
    }

    std::span<const Posting> postings(const std::string& term) const {
        auto it = postings_.find(term);
        if (it == postings_.end()) return {};
        return it->second;
    }

    /// Sorted vocabulary.
    std::vector<std::string> vocabulary() const {
        std::vector<std::string> v;
        v.reserve(postings_.size());
        for (const auto& [term, _] : postings_) v.push_back(term);
        std::sort(v.begin(), v.end());
        return v;
    }

    /// Introductory passage whose title matches `title` (normalized), if any.
    const Passage* intro_for(const std::string& title) const {
        auto it = intros_.find(text::normalize_for_match(title));
        return it == intros_.end() ? nullptr : &passages_[it->second];
    }

private:
    PassageStore() = default;

    std::vector<Passage> passages_;
    std::vector<DocStats> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::map<std::string, std::size_t> intros_;
    double avg_length_ = 0.0;
};

}  // namespace irrbench::corpus
