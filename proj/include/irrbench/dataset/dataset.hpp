#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "irrbench/digest.hpp"
#include "irrbench/jsonl.hpp"
#include "irrbench/random.hpp"
#include "irrbench/text.hpp"

namespace irrbench::dataset {

inline constexpr std::string_view kSubjectPlaceholder = "[subj]";
inline constexpr std::string_view kObjectPlaceholder = "[objp]";

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FactTriple {
    std::string id;
    std::string subject;
    std::string relationship;
    std::string object;
    std::vector<std::string> object_aliases;       // always contains `object`
    std::vector<std::string> alternative_answers;  // other accepted answers, if the source lists any
};

struct QuestionRecord {
    std::string triple_id;
    std::string text;
    std::string relationship;
    std::vector<std::string> gold_aliases;
};

struct RelationshipConfig {
    std::string relationship;
    std::string question_template;   // contains [subj] once
    std::string statement_template;  // contains [subj] and [objp] once each
};

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

inline void validate(const RelationshipConfig& cfg) {
    if (cfg.relationship.empty()) throw DatasetError("relationship config with empty name");
    if (count_occurrences(cfg.question_template, kSubjectPlaceholder) != 1) {
        throw DatasetError("question template for '" + cfg.relationship + "' must contain [subj] exactly once");
    }
    if (count_occurrences(cfg.statement_template, kSubjectPlaceholder) != 1 ||
        count_occurrences(cfg.statement_template, kObjectPlaceholder) != 1) {
        throw DatasetError("statement template for '" + cfg.relationship +
                           "' must contain [subj] and [objp] exactly once each");
    }
}

/// Relationship name -> templates.
class RelationshipTable {
public:
    RelationshipTable() = default;

    explicit RelationshipTable(std::vector<RelationshipConfig> configs) {
        for (auto& c : configs) add(std::move(c));
    }

    void add(RelationshipConfig cfg) {
        validate(cfg);
        auto name = cfg.relationship;
        if (!by_name_.emplace(name, std::move(cfg)).second) {
            throw DatasetError("duplicate relationship config '" + name + "'");
        }
    }

    const RelationshipConfig& at(const std::string& relationship) const {
        auto it = by_name_.find(relationship);
        if (it == by_name_.end()) throw DatasetError("no relationship config for '" + relationship + "'");
        return it->second;
    }

    bool contains(const std::string& relationship) const { return by_name_.count(relationship) > 0; }
    std::size_t size() const { return by_name_.size(); }
    const std::map<std::string, RelationshipConfig>& all() const { return by_name_; }

private:
    std::map<std::string, RelationshipConfig> by_name_;
};

/// `{"relationships": [{"relationship", "question_template", "statement_template"}, ...]}`
inline RelationshipTable relationship_table_from_json(const json& j) {
    RelationshipTable table;
    if (!j.contains("relationships") || !j["relationships"].is_array()) {
        throw DatasetError("relationship config needs a 'relationships' array");
    }
    for (const auto& r : j["relationships"]) {
        try {
            table.add({required_string(r, "relationship"), required_string(r, "question_template"),
                       required_string(r, "statement_template")});
        } catch (const std::invalid_argument& e) {
            throw DatasetError(std::string("relationship config: ") + e.what());
        }
    }
    return table;
}

inline RelationshipTable load_relationship_table(const std::filesystem::path& path) {
    return relationship_table_from_json(json::parse(read_file(path)));
}

inline json to_json(const FactTriple& t) {
    return {{"id", t.id},
            {"subject", t.subject},
            {"relationship", t.relationship},
            {"object", t.object},
            {"object_aliases", t.object_aliases},
            {"alternative_answers", t.alternative_answers}};
}

inline json to_json(const QuestionRecord& q) {
    return {{"triple_id", q.triple_id}, {"text", q.text}, {"relationship", q.relationship}, {"gold_aliases", q.gold_aliases}};
}

inline QuestionRecord question_from_json(const json& j) {
    return {required_string(j, "triple_id"), required_string(j, "text"), required_string(j, "relationship"),
            optional_strings(j, "gold_aliases")};
}

struct RejectedRow {
    std::size_t line = 0;
    std::string reason;
};

struct TripleLoadResult {
    std::vector<FactTriple> triples;
    std::vector<RejectedRow> rejected;
};

/// Parses one triple row. Throws std::invalid_argument for schema problems
/// (missing or mistyped fields) and returns a reason string for rows that are
/// well-formed but invalid.
inline std::optional<std::string> parse_triple(const json& j, FactTriple& out) {
    out.subject = required_string(j, "subject");
    out.relationship = required_string(j, "relationship");
    out.object = required_string(j, "object");
    out.object_aliases = optional_strings(j, "object_aliases");
    out.alternative_answers = optional_strings(j, "alternative_answers");
    out.id = optional_string(j, "id");
    if (text::trim(out.subject).empty()) return "empty subject";
    if (text::trim(out.relationship).empty()) return "empty relationship";
    if (text::trim(out.object).empty()) return "empty object";
    bool has_object = std::any_of(out.object_aliases.begin(), out.object_aliases.end(),
                                  [&](const std::string& a) { return text::equals_normalized(a, out.object); });
    if (!has_object) out.object_aliases.insert(out.object_aliases.begin(), out.object);
    out.object_aliases.erase(std::remove_if(out.object_aliases.begin(), out.object_aliases.end(),
                                            [](const std::string& a) { return text::trim(a).empty(); }),
                             out.object_aliases.end());
    if (out.id.empty()) {
        out.id = "t-" + sha256_hex(out.subject + "\x1f" + out.relationship + "\x1f" + out.object).substr(0, 12);
    }
    return std::nullopt;
}

/// A stored triple; throws std::invalid_argument if it is not valid.
inline FactTriple triple_from_json(const json& j) {
    FactTriple t;
    if (auto reason = parse_triple(j, t)) throw std::invalid_argument("invalid triple: " + *reason);
    return t;
}

/// Triple JSONL: subject, relationship, object, optional id, object_aliases,
/// alternative_answers. Malformed JSON and missing fields throw with the line
/// number; rows with empty values are rejected and reported.
inline TripleLoadResult load_triples(const std::filesystem::path& path) {
    TripleLoadResult result;
    std::set<std::string> ids;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        FactTriple t;
        std::optional<std::string> reason;
        try {
            reason = parse_triple(j, t);
        } catch (const std::invalid_argument& e) {
            throw JsonlError(path.string(), line, e.what());
        }
        if (reason) {
            result.rejected.push_back({line, *reason});
            return;
        }
        if (!ids.insert(t.id).second) throw JsonlError(path.string(), line, "duplicate triple id '" + t.id + "'");
        result.triples.push_back(std::move(t));
    });
    return result;
}

inline std::string substitute_once(std::string_view tmpl, std::string_view placeholder, std::string_view value) {
    auto pos = tmpl.find(placeholder);
    if (pos == std::string_view::npos) {
        throw DatasetError("template '" + std::string(tmpl) + "' lacks " + std::string(placeholder));
    }
    std::string out(tmpl.substr(0, pos));
    out += value;
    out += tmpl.substr(pos + placeholder.size());
    return out;
}

inline QuestionRecord render_question(const FactTriple& t, const RelationshipConfig& cfg) {
    if (cfg.relationship != t.relationship) {
        throw DatasetError("relationship mismatch: triple '" + t.id + "' is '" + t.relationship +
                           "', config is '" + cfg.relationship + "'");
    }
    return {t.id, substitute_once(cfg.question_template, kSubjectPlaceholder, t.subject), t.relationship,
            t.object_aliases};
}

/// Statement template with [subj] and [objp] filled. Substitution is
/// positional, so placeholder-like text inside the values is left alone.
inline std::string render_statement(const RelationshipConfig& cfg, std::string_view subject, std::string_view object) {
    const auto& tmpl = cfg.statement_template;
    auto ps = tmpl.find(kSubjectPlaceholder);
    auto po = tmpl.find(kObjectPlaceholder);
    if (ps == std::string::npos || po == std::string::npos) {
        throw DatasetError("statement template for '" + cfg.relationship + "' lacks a placeholder");
    }
    std::string out;
    if (ps < po) {
        out = tmpl.substr(0, ps) + std::string(subject) + tmpl.substr(ps + kSubjectPlaceholder.size(), po - ps - kSubjectPlaceholder.size()) +
              std::string(object) + tmpl.substr(po + kObjectPlaceholder.size());
    } else {
        out = tmpl.substr(0, po) + std::string(object) + tmpl.substr(po + kObjectPlaceholder.size(), ps - po - kObjectPlaceholder.size()) +
              std::string(subject) + tmpl.substr(ps + kSubjectPlaceholder.size());
    }
    return out;
}

/// Number of distinct answers once aliases of the object are folded together.
inline std::size_t distinct_answer_count(const FactTriple& t) {
    std::set<std::string> extra;
    for (const auto& a : t.alternative_answers) {
        bool is_alias = std::any_of(t.object_aliases.begin(), t.object_aliases.end(),
                                    [&](const std::string& alias) { return text::equals_normalized(alias, a); });
        if (!is_alias && !text::trim(a).empty()) extra.insert(text::normalize_for_match(a));
    }
    return 1 + extra.size();
}

/// Keeps triples with at most `max_answers` distinct answers.
inline std::vector<FactTriple> preprocess_filter(const std::vector<FactTriple>& triples, std::size_t max_answers = 1) {
    if (max_answers < 1) throw DatasetError("max_answers must be at least 1");
    std::vector<FactTriple> out;
    std::copy_if(triples.begin(), triples.end(), std::back_inserter(out),
                 [&](const FactTriple& t) { return distinct_answer_count(t) <= max_answers; });
    return out;
}

/// Seeded uniform sample of min(n, group size) triples per relationship,
/// without replacement. Each group is sorted by id before sampling, so the
/// result does not depend on input order. Output: relationships in name
/// order, ids ascending within each.
inline std::vector<FactTriple> sample_per_relationship(const std::vector<FactTriple>& triples, std::size_t n,
                                                       std::uint64_t seed) {
    if (n < 1) throw DatasetError("sample size must be at least 1");
    std::map<std::string, std::vector<FactTriple>> groups;
    for (const auto& t : triples) groups[t.relationship].push_back(t);
    std::vector<FactTriple> out;
    for (auto& [rel, group] : groups) {
        std::sort(group.begin(), group.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
        if (group.size() > n) {
            seeded_shuffle(group, derive_seed(seed, {"sample", rel}));
            group.resize(n);
            std::sort(group.begin(), group.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
        }
        out.insert(out.end(), group.begin(), group.end());
    }
    return out;
}

}  // namespace irrbench::dataset
