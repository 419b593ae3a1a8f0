#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "irrbench/jsonl.hpp"

namespace irrbench::forge {

enum class Role { relevant, irrelevant };
enum class Level { unrelated, partially_related, related, memory, gold };
enum class Variant { none, misleading_linkage, common_characteristics, fictional_anecdotes };

inline constexpr Variant kRelatedVariants[] = {Variant::misleading_linkage, Variant::common_characteristics,
                                               Variant::fictional_anecdotes};

inline const char* to_string(Role r) { return r == Role::relevant ? "relevant" : "irrelevant"; }

inline const char* to_string(Level l) {
    switch (l) {
        case Level::unrelated: return "unrelated";
        case Level::partially_related: return "partially_related";
        case Level::related: return "related";
        case Level::memory: return "memory";
        case Level::gold: return "gold";
    }
    return "unrelated";
}

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::none: return "none";
        case Variant::misleading_linkage: return "misleading_linkage";
        case Variant::common_characteristics: return "common_characteristics";
        case Variant::fictional_anecdotes: return "fictional_anecdotes";
    }
    return "none";
}

inline Role role_from_string(const std::string& s) {
    if (s == "relevant") return Role::relevant;
    if (s == "irrelevant") return Role::irrelevant;
    throw std::invalid_argument("unknown role '" + s + "'");
}

inline Level level_from_string(const std::string& s) {
    if (s == "unrelated") return Level::unrelated;
    if (s == "partially_related") return Level::partially_related;
    if (s == "related") return Level::related;
    if (s == "memory") return Level::memory;
    if (s == "gold") return Level::gold;
    throw std::invalid_argument("unknown level '" + s + "'");
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "none") return Variant::none;
    if (s == "misleading_linkage") return Variant::misleading_linkage;
    if (s == "common_characteristics") return Variant::common_characteristics;
    if (s == "fictional_anecdotes") return Variant::fictional_anecdotes;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

inline Role role_for(Level l) { return (l == Level::memory || l == Level::gold) ? Role::relevant : Role::irrelevant; }

struct SourcePassages {
    std::string unrelated;
    std::string partial_p1;
    std::string obj_prime_source;
};

/// The misleading counterparts mined for one question: another subject and
/// the object it is tied to.
struct DistractorPlan {
    std::string question_id;
    std::string subj;
    std::string relationship;
    std::string question_text;
    std::vector<std::string> obj_aliases;
    std::string subj_prime;
    std::string obj_prime;
    SourcePassages sources;

    bool complete() const { return !subj_prime.empty() && !obj_prime.empty(); }
};

/// Where an item came from. `first_paragraph_length` is the byte length of
/// paragraph one for two-paragraph items, 0 otherwise.
struct Provenance {
    std::string subj_prime;
    std::string obj_prime;
    std::string source_passage_id;
    std::string secondary_passage_id;
    std::size_t first_paragraph_length = 0;
};

struct InfoItem {
    std::string id;
    std::string question_id;
    Role role = Role::irrelevant;
    Level level = Level::unrelated;
    Variant variant = Variant::none;
    std::string text;
    double similarity = 0.0;
    Provenance provenance;

    /// variant set iff level is related; role follows level.
    void check_invariants() const {
        if ((variant != Variant::none) != (level == Level::related)) {
            throw std::logic_error("item " + id + ": variant must be set exactly for related items");
        }
        if (role != role_for(level)) throw std::logic_error("item " + id + ": role does not match level");
        if (text.empty()) throw std::logic_error("item " + id + ": empty text");
    }
};

struct Exclusion {
    std::string question_id;
    Level level = Level::unrelated;
    Variant variant = Variant::none;
    std::string reason;
};

inline std::string item_id(const std::string& question_id, Level level, Variant variant = Variant::none) {
    std::string id = question_id + ":" + to_string(level);
    if (variant != Variant::none) id += std::string(":") + to_string(variant);
    return id;
}

inline json to_json(const InfoItem& it) {
    return {{"id", it.id},
            {"question_id", it.question_id},
            {"role", to_string(it.role)},
            {"level", to_string(it.level)},
            {"variant", to_string(it.variant)},
            {"text", it.text},
            {"similarity", it.similarity},
            {"provenance",
             {{"subj_prime", it.provenance.subj_prime},
              {"obj_prime", it.provenance.obj_prime},
              {"source_passage_id", it.provenance.source_passage_id},
              {"secondary_passage_id", it.provenance.secondary_passage_id},
              {"first_paragraph_length", it.provenance.first_paragraph_length}}}};
}

inline InfoItem info_item_from_json(const json& j) {
    InfoItem it;
    it.id = required_string(j, "id");
    it.question_id = required_string(j, "question_id");
    it.role = role_from_string(required_string(j, "role"));
    it.level = level_from_string(required_string(j, "level"));
    it.variant = variant_from_string(optional_string(j, "variant", "none"));
    it.text = required_string(j, "text");
    it.similarity = j.value("similarity", 0.0);
    if (auto p = j.find("provenance"); p != j.end() && p->is_object()) {
        it.provenance.subj_prime = optional_string(*p, "subj_prime");
        it.provenance.obj_prime = optional_string(*p, "obj_prime");
        it.provenance.source_passage_id = optional_string(*p, "source_passage_id");
        it.provenance.secondary_passage_id = optional_string(*p, "secondary_passage_id");
        it.provenance.first_paragraph_length = p->value("first_paragraph_length", std::size_t{0});
    }
    it.check_invariants();
    return it;
}

inline json to_json(const DistractorPlan& p) {
    return {{"question_id", p.question_id},
            {"subj", p.subj},
            {"relationship", p.relationship},
            {"question_text", p.question_text},
            {"obj_aliases", p.obj_aliases},
            {"subj_prime", p.subj_prime},
            {"obj_prime", p.obj_prime},
            {"source_passage_ids",
             {{"unrelated", p.sources.unrelated},
              {"partial_p1", p.sources.partial_p1},
              {"obj_prime_source", p.sources.obj_prime_source}}}};
}

inline DistractorPlan plan_from_json(const json& j) {
    DistractorPlan p;
    p.question_id = required_string(j, "question_id");
    p.subj = required_string(j, "subj");
    p.relationship = optional_string(j, "relationship");
    p.question_text = optional_string(j, "question_text");
    p.obj_aliases = optional_strings(j, "obj_aliases");
    p.subj_prime = optional_string(j, "subj_prime");
    p.obj_prime = optional_string(j, "obj_prime");
    if (auto s = j.find("source_passage_ids"); s != j.end() && s->is_object()) {
        p.sources = {optional_string(*s, "unrelated"), optional_string(*s, "partial_p1"),
                     optional_string(*s, "obj_prime_source")};
    }
    return p;
}

inline json to_json(const Exclusion& e) {
    return {{"question_id", e.question_id}, {"level", to_string(e.level)}, {"variant", to_string(e.variant)},
            {"reason", e.reason}};
}

}  // namespace irrbench::forge
