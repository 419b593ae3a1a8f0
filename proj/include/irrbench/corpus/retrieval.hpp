#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "irrbench/corpus/scoring.hpp"
#include "irrbench/corpus/store.hpp"

namespace irrbench::corpus {

struct ScoredPassage {
    std::string passage_id;
    double score = 0.0;

    bool operator==(const ScoredPassage&) const = default;
};

/// Ranking order: score descending, then passage id ascending.
inline bool ranks_before(const ScoredPassage& a, const ScoredPassage& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage_id < b.passage_id;
}

/// Exactly min(k, |store|) passages in ranking order.
inline std::vector<ScoredPassage> retrieve_top_k(std::string_view query, std::size_t k, const PassageStore& store,
                                                 const Scorer& scorer) {
    if (k == 0) throw std::invalid_argument("k must be positive");
    const auto scores = scorer.score_all(query);
    std::vector<std::size_t> idx(store.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto before = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return store.at(a).id < store.at(b).id;
    };
    const auto n = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(), before);
    std::vector<ScoredPassage> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({store.at(idx[i]).id, scores[idx[i]]});
    return out;
}

}  // namespace irrbench::corpus
