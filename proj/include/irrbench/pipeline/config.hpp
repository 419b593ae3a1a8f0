#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "irrbench/corpus/scoring.hpp"
#include "irrbench/digest.hpp"
#include "irrbench/forge/types.hpp"
#include "irrbench/harness/harness.hpp"
#include "irrbench/jsonl.hpp"
#include "irrbench/memory/memory.hpp"
#include "irrbench/metrics/metrics.hpp"
#include "irrbench/providers/transcript.hpp"

namespace irrbench::pipeline {

namespace fs = std::filesystem;

/// Bad configuration; `what()` names the offending path, e.g. "retrieval.k".
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetSection {
    std::string name = "dataset";
    fs::path triples;
    fs::path relationships;
    std::size_t max_answers = 1;
    std::size_t sample_per_relationship = 0;  // 0 keeps every triple
};

struct RetrievalSection {
    std::size_t k = 10;
    corpus::ScorerConfig scorer;
};

struct ForgeSection {
    std::size_t intro_sentences = 2;
    std::size_t intro_chars = 600;
    std::vector<forge::Level> levels{forge::Level::unrelated, forge::Level::partially_related, forge::Level::related};
    std::vector<forge::Variant> variants{std::begin(forge::kRelatedVariants), std::end(forge::kRelatedVariants)};
};

struct EvalSection {
    std::vector<std::string> conditions{"3:1"};
    std::vector<std::string> formats{"multiple_choice"};
    std::vector<std::string> mitigations{"vanilla"};
    fs::path icl_exemplar;
};

struct ProviderSection {
    std::string backend = "mock";  // mock | http
    fs::path mock_script;
    fs::path transcript;
    providers::TranscriptMode transcript_mode = providers::TranscriptMode::record;
    std::string model = "mock";
    std::string embedding_model;
    double temperature = 0.0;
    int max_tokens = 512;
    std::size_t max_inflight = 4;
    int max_retries = 3;
};

struct Config {
    std::uint64_t seed = 0;
    fs::path passages;
    DatasetSection dataset;
    RetrievalSection retrieval;
    int consistency_trials = 2;
    memory::EntailmentMode entailment = memory::EntailmentMode::judge;
    ForgeSection forge;
    EvalSection eval;
    ProviderSection provider;
    std::vector<std::string> report_formats{"csv", "markdown", "json"};
};

namespace detail {

class Reader {
public:
    Reader(const json& obj, std::string path, std::set<std::string> allowed) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
        for (const auto& [key, _] : obj_.items()) {
            if (!allowed.count(key)) throw ConfigError("unknown key '" + join(key) + "'");
        }
    }

    const json* get(const std::string& key) const {
        auto it = obj_.find(key);
        return it == obj_.end() || it->is_null() ? nullptr : &*it;
    }

    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string where() const { return path_.empty() ? "config" : path_; }

    void str(const std::string& key, std::string& out) const {
        if (auto* v = get(key)) {
            if (!v->is_string()) throw ConfigError(join(key) + " must be a string");
            out = v->get<std::string>();
        }
    }

    void path(const std::string& key, fs::path& out, const fs::path& base) const {
        std::string s;
        str(key, s);
        if (!s.empty()) out = fs::path(s).is_absolute() ? fs::path(s) : base / s;
    }

    template <class Int>
    void integer(const std::string& key, Int& out, long long lo, long long hi) const {
        if (auto* v = get(key)) {
            if (!v->is_number_integer()) throw ConfigError(join(key) + " must be an integer");
            auto n = v->get<long long>();
            if (n < lo || n > hi) {
                throw ConfigError(join(key) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                  "], got " + std::to_string(n));
            }
            out = static_cast<Int>(n);
        }
    }

    void seed(const std::string& key, std::uint64_t& out) const {
        if (auto* v = get(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(join(key) + " must be a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void real(const std::string& key, double& out, double lo, double hi) const {
        if (auto* v = get(key)) {
            if (!v->is_number()) throw ConfigError(join(key) + " must be a number");
            auto x = v->get<double>();
            if (!(x >= lo && x <= hi)) throw ConfigError(join(key) + " out of range");
            out = x;
        }
    }

    void strings(const std::string& key, std::vector<std::string>& out) const {
        if (auto* v = get(key)) {
            if (!v->is_array()) throw ConfigError(join(key) + " must be an array of strings");
            std::vector<std::string> tmp;
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_string()) throw ConfigError(join(key) + "[" + std::to_string(i) + "] must be a string");
                tmp.push_back((*v)[i].get<std::string>());
            }
            if (tmp.empty()) throw ConfigError(join(key) + " must not be empty");
            out = std::move(tmp);
        }
    }

    std::optional<Reader> section(const std::string& key, std::set<std::string> allowed) const {
        auto* v = get(key);
        if (!v) return std::nullopt;
        return Reader(*v, join(key), std::move(allowed));
    }

private:
    const json& obj_;
    std::string path_;
};

template <class Fn>
void checked(const std::string& path, Fn fn) {
    try {
        fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace detail

/// Validates and applies defaults. Relative paths resolve against `base`.
inline Config config_from_json(const json& j, const fs::path& base = fs::current_path()) {
    using detail::Reader;
    Config c;
    Reader root(j, "", {"seed", "passages", "dataset", "retrieval", "memory", "forge", "eval", "provider", "report"});
    root.seed("seed", c.seed);
    root.path("passages", c.passages, base);

    if (auto d = root.section("dataset", {"name", "triples", "relationships", "max_answers", "sample_per_relationship"})) {
        d->str("name", c.dataset.name);
        d->path("triples", c.dataset.triples, base);
        d->path("relationships", c.dataset.relationships, base);
        d->integer("max_answers", c.dataset.max_answers, 1, 1'000'000);
        d->integer("sample_per_relationship", c.dataset.sample_per_relationship, 0, 100'000'000);
    }
    if (auto r = root.section("retrieval", {"k", "scorer", "k1", "b"})) {
        r->integer("k", c.retrieval.k, 1, 1'000'000);
        std::string kind = corpus::to_string(c.retrieval.scorer.kind);
        r->str("scorer", kind);
        detail::checked("retrieval.scorer", [&] { c.retrieval.scorer.kind = corpus::scorer_kind_from_string(kind); });
        r->real("k1", c.retrieval.scorer.k1, 1e-9, 1e9);
        r->real("b", c.retrieval.scorer.b, 0.0, 1.0);
    }
    if (auto m = root.section("memory", {"consistency_trials", "entailment"})) {
        m->integer("consistency_trials", c.consistency_trials, 1, 10);
        std::string mode = "judge";
        m->str("entailment", mode);
        if (mode == "judge") c.entailment = memory::EntailmentMode::judge;
        else if (mode == "fallback") c.entailment = memory::EntailmentMode::fallback;
        else throw ConfigError("memory.entailment must be 'judge' or 'fallback'");
    }
    if (auto f = root.section("forge", {"intro_sentences", "intro_chars", "levels", "variants"})) {
        f->integer("intro_sentences", c.forge.intro_sentences, 1, 100);
        f->integer("intro_chars", c.forge.intro_chars, 1, 100'000);
        std::vector<std::string> levels;
        f->strings("levels", levels);
        if (!levels.empty()) {
            c.forge.levels.clear();
            for (const auto& l : levels) {
                detail::checked("forge.levels", [&] {
                    auto lv = forge::level_from_string(l);
                    if (lv == forge::Level::memory || lv == forge::Level::gold) {
                        throw ConfigError("forge.levels accepts unrelated, partially_related and related");
                    }
                    c.forge.levels.push_back(lv);
                });
            }
        }
        std::vector<std::string> variants;
        f->strings("variants", variants);
        if (!variants.empty()) {
            c.forge.variants.clear();
            for (const auto& v : variants) {
                detail::checked("forge.variants", [&] {
                    auto var = forge::variant_from_string(v);
                    if (var == forge::Variant::none) throw std::invalid_argument("'none' is not a related variant");
                    c.forge.variants.push_back(var);
                });
            }
        }
    }
    if (auto e = root.section("eval", {"conditions", "formats", "mitigations", "icl_exemplar"})) {
        e->strings("conditions", c.eval.conditions);
        e->strings("formats", c.eval.formats);
        e->strings("mitigations", c.eval.mitigations);
        e->path("icl_exemplar", c.eval.icl_exemplar, base);
    }
    for (const auto& s : c.eval.conditions) detail::checked("eval.conditions", [&] { harness::Condition::parse(s); });
    for (const auto& s : c.eval.formats) detail::checked("eval.formats", [&] { harness::format_from_string(s); });
    for (const auto& s : c.eval.mitigations) detail::checked("eval.mitigations", [&] { harness::Mitigation::parse(s); });

    if (auto p = root.section("provider", {"backend", "mock_script", "transcript", "transcript_mode", "model",
                                           "embedding_model", "temperature", "max_tokens", "max_inflight",
                                           "max_retries"})) {
        p->str("backend", c.provider.backend);
        if (c.provider.backend != "mock" && c.provider.backend != "http") {
            throw ConfigError("provider.backend must be 'mock' or 'http'");
        }
        p->path("mock_script", c.provider.mock_script, base);
        p->path("transcript", c.provider.transcript, base);
        std::string mode = providers::to_string(c.provider.transcript_mode);
        p->str("transcript_mode", mode);
        detail::checked("provider.transcript_mode",
                        [&] { c.provider.transcript_mode = providers::transcript_mode_from_string(mode); });
        p->str("model", c.provider.model);
        p->str("embedding_model", c.provider.embedding_model);
        p->real("temperature", c.provider.temperature, 0.0, 2.0);
        p->integer("max_tokens", c.provider.max_tokens, 1, 1'000'000);
        p->integer("max_inflight", c.provider.max_inflight, 1, 256);
        p->integer("max_retries", c.provider.max_retries, 0, 20);
    }
    if (auto r = root.section("report", {"formats"})) r->strings("formats", c.report_formats);
    for (const auto& f : c.report_formats) detail::checked("report.formats", [&] { metrics::report_format_from_string(f); });
    return c;
}

inline Config load_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j, path.has_parent_path() ? path.parent_path() : fs::current_path());
}

/// Canonical snapshot of the effective configuration. Paths are kept as
/// given after resolution.
inline json to_json(const Config& c) {
    std::vector<std::string> levels;
    for (auto l : c.forge.levels) levels.push_back(forge::to_string(l));
    std::vector<std::string> variants;
    for (auto v : c.forge.variants) variants.push_back(forge::to_string(v));
    return {
        {"seed", c.seed},
        {"passages", c.passages.string()},
        {"dataset",
         {{"name", c.dataset.name},
          {"triples", c.dataset.triples.string()},
          {"relationships", c.dataset.relationships.string()},
          {"max_answers", c.dataset.max_answers},
          {"sample_per_relationship", c.dataset.sample_per_relationship}}},
        {"retrieval",
         {{"k", c.retrieval.k},
          {"scorer", corpus::to_string(c.retrieval.scorer.kind)},
          {"k1", c.retrieval.scorer.k1},
          {"b", c.retrieval.scorer.b}}},
        {"memory",
         {{"consistency_trials", c.consistency_trials},
          {"entailment", c.entailment == memory::EntailmentMode::judge ? "judge" : "fallback"}}},
        {"forge",
         {{"intro_sentences", c.forge.intro_sentences},
          {"intro_chars", c.forge.intro_chars},
          {"levels", levels},
          {"variants", variants}}},
        {"eval",
         {{"conditions", c.eval.conditions},
          {"formats", c.eval.formats},
          {"mitigations", c.eval.mitigations},
          {"icl_exemplar", c.eval.icl_exemplar.string()}}},
        {"provider",
         {{"backend", c.provider.backend},
          {"mock_script", c.provider.mock_script.string()},
          {"transcript", c.provider.transcript.string()},
          {"transcript_mode", providers::to_string(c.provider.transcript_mode)},
          {"model", c.provider.model},
          {"embedding_model", c.provider.embedding_model},
          {"temperature", c.provider.temperature},
          {"max_tokens", c.provider.max_tokens},
          {"max_inflight", c.provider.max_inflight},
          {"max_retries", c.provider.max_retries}}},
        {"report", {{"formats", c.report_formats}}},
    };
}

}  // namespace irrbench::pipeline
