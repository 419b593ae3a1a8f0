#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "irrbench/corpus/store.hpp"
#include "irrbench/providers/types.hpp"

namespace irrbench::corpus {

enum class ScorerKind { bm25, embedding };

inline const char* to_string(ScorerKind k) { return k == ScorerKind::bm25 ? "bm25" : "embedding"; }

inline ScorerKind scorer_kind_from_string(const std::string& s) {
    if (s == "bm25") return ScorerKind::bm25;
    if (s == "embedding") return ScorerKind::embedding;
    throw std::invalid_argument("unknown scorer kind '" + s + "'");
}

struct ScorerConfig {
    ScorerKind kind = ScorerKind::bm25;
    double k1 = 1.2;
    double b = 0.75;

    void validate() const {
        if (!(k1 > 0.0) || !std::isfinite(k1)) throw std::invalid_argument("bm25 k1 must be > 0");
        if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("bm25 b must lie in [0,1]");
    }
};

/// Relevance of passages to a query. Implementations are deterministic.
class Scorer {
public:
    virtual ~Scorer() = default;

    /// Score of arbitrary text (a stored passage or a generated item) against `query`.
    virtual double score_text(std::string_view query, std::string_view text) const = 0;

    /// Scores for every stored passage, indexed like the store.
    virtual std::vector<double> score_all(std::string_view query) const = 0;

    double score(std::string_view query, const Passage& p) const { return score_text(query, p.text); }
};

class Bm25Scorer final : public Scorer {
public:
    Bm25Scorer(const PassageStore& store, double k1 = 1.2, double b = 0.75) : store_(store), k1_(k1), b_(b) {
        ScorerConfig{ScorerKind::bm25, k1, b}.validate();
    }

    /// Okapi BM25 with the non-negative idf ln(1 + (N - df + 0.5) / (df + 0.5)).
    double idf(const std::string& term) const {
        const auto n = static_cast<double>(store_.size());
        const auto df = static_cast<double>(store_.document_frequency(term));
        return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    }

    double term_score(double idf, double tf, double doc_len) const {
        const double avg = store_.average_length();
        const double rel_len = avg > 0.0 ? doc_len / avg : 1.0;
        return idf * (tf * (k1_ + 1.0)) / (tf + k1_ * (1.0 - b_ + b_ * rel_len));
    }

    double score_text(std::string_view query, std::string_view text) const override {
        const auto q = text::tokenize(query);
        if (q.empty()) throw std::invalid_argument("empty query");
        std::unordered_map<std::string, std::uint32_t> tf;
        const auto tokens = text::tokenize(text);
        for (const auto& t : tokens) ++tf[t];
        const auto len = static_cast<double>(tokens.size());
        double s = 0.0;
        for (const auto& term : q) {
            auto it = tf.find(term);
            if (it == tf.end()) continue;
            s += term_score(idf(term), static_cast<double>(it->second), len);
        }
        return s;
    }

    std::vector<double> score_all(std::string_view query) const override {
        const auto q = text::tokenize(query);
        if (q.empty()) throw std::invalid_argument("empty query");
        std::vector<double> acc(store_.size(), 0.0);
        for (const auto& term : q) {
            const double w = idf(term);
            for (const auto& post : store_.postings(term)) {
                acc[post.doc] += term_score(w, static_cast<double>(post.tf),
                                            static_cast<double>(store_.stats(post.doc).length));
            }
        }
        return acc;
    }

private:
    const PassageStore& store_;
    double k1_;
    double b_;
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw providers::ProviderError(providers::ProviderErrorKind::dimension_mismatch, "cosine of unequal lengths");
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Cosine between provider embeddings. Passage vectors are fetched in batches
/// on first use and cached for the lifetime of the scorer.
class EmbeddingScorer final : public Scorer {
public:
    EmbeddingScorer(const PassageStore& store, providers::EmbeddingBackend& backend, std::size_t batch_size = 64)
        : store_(store), backend_(backend), batch_(std::max<std::size_t>(1, batch_size)) {}

    double score_text(std::string_view query, std::string_view text) const override {
        if (text::trim(query).empty()) throw std::invalid_argument("empty query");
        auto v = backend_.embed({std::string(query), std::string(text)});
        return cosine(v[0].values, v[1].values);
    }

    std::vector<double> score_all(std::string_view query) const override {
        if (text::trim(query).empty()) throw std::invalid_argument("empty query");
        const auto& passages = passage_vectors();
        auto q = backend_.embed({std::string(query)});
        std::vector<double> out(store_.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = cosine(q[0].values, passages[i].values);
        return out;
    }

private:
    const std::vector<providers::EmbeddingVector>& passage_vectors() const {
        std::lock_guard lock(mutex_);
        if (!cache_) {
            std::vector<providers::EmbeddingVector> all;
            all.reserve(store_.size());
            for (std::size_t start = 0; start < store_.size(); start += batch_) {
                std::vector<std::string> texts;
                for (std::size_t i = start; i < std::min(store_.size(), start + batch_); ++i) {
                    texts.push_back(store_.at(i).text);
                }
                auto vs = backend_.embed(texts);
                for (auto& v : vs) all.push_back(std::move(v));
            }
            providers::check_embeddings(all, store_.size());
            cache_ = std::move(all);
        }
        return *cache_;
    }

    const PassageStore& store_;
    providers::EmbeddingBackend& backend_;
    std::size_t batch_;
    mutable std::mutex mutex_;
    mutable std::optional<std::vector<providers::EmbeddingVector>> cache_;
};

/// `backend` is required for the embedding scorer and ignored for BM25.
inline std::unique_ptr<Scorer> make_scorer(const ScorerConfig& cfg, const PassageStore& store,
                                           providers::EmbeddingBackend* backend) {
    cfg.validate();
    if (cfg.kind == ScorerKind::bm25) return std::make_unique<Bm25Scorer>(store, cfg.k1, cfg.b);
    if (!backend) throw std::invalid_argument("embedding scorer needs an embedding backend");
    return std::make_unique<EmbeddingScorer>(store, *backend);
}

}  // namespace irrbench::corpus
