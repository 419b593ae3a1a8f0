#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

#include "irrbench/dataset/dataset.hpp"
#include "irrbench/forge/forge.hpp"
#include "irrbench/jsonl.hpp"
#include "irrbench/memory/memory.hpp"
#include "irrbench/parallel.hpp"
#include "irrbench/providers/types.hpp"
#include "irrbench/random.hpp"
#include "irrbench/text.hpp"

namespace irrbench::harness {

using forge::InfoItem;
using forge::Level;
using forge::Role;

enum class Format { multiple_choice, boolean, free_form };
enum class OptionKind { memory, irrelevant, uncertain, gold };
enum class Outcome { kept_memory, misrepresented, uncertain, gold, unparsed };

inline const char* to_string(Format f) {
    switch (f) {
        case Format::multiple_choice: return "multiple_choice";
        case Format::boolean: return "boolean";
        case Format::free_form: return "free_form";
    }
    return "multiple_choice";
}

inline Format format_from_string(const std::string& s) {
    if (s == "multiple_choice" || s == "mc") return Format::multiple_choice;
    if (s == "boolean") return Format::boolean;
    if (s == "free_form") return Format::free_form;
    throw std::invalid_argument("unknown format '" + s + "'");
}

inline const char* to_string(OptionKind k) {
    switch (k) {
        case OptionKind::memory: return "memory";
        case OptionKind::irrelevant: return "irrelevant";
        case OptionKind::uncertain: return "uncertain";
        case OptionKind::gold: return "gold";
    }
    return "memory";
}

inline OptionKind option_kind_from_string(const std::string& s) {
    if (s == "memory") return OptionKind::memory;
    if (s == "irrelevant") return OptionKind::irrelevant;
    if (s == "uncertain") return OptionKind::uncertain;
    if (s == "gold") return OptionKind::gold;
    throw std::invalid_argument("unknown option kind '" + s + "'");
}

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::kept_memory: return "kept_memory";
        case Outcome::misrepresented: return "misrepresented";
        case Outcome::uncertain: return "uncertain";
        case Outcome::gold: return "gold";
        case Outcome::unparsed: return "unparsed";
    }
    return "unparsed";
}

inline Outcome outcome_from_string(const std::string& s) {
    if (s == "kept_memory") return Outcome::kept_memory;
    if (s == "misrepresented") return Outcome::misrepresented;
    if (s == "uncertain") return Outcome::uncertain;
    if (s == "gold") return Outcome::gold;
    if (s == "unparsed") return Outcome::unparsed;
    throw std::invalid_argument("unknown outcome '" + s + "'");
}

inline Outcome outcome_for(OptionKind k) {
    switch (k) {
        case OptionKind::memory: return Outcome::kept_memory;
        case OptionKind::irrelevant: return Outcome::misrepresented;
        case OptionKind::uncertain: return Outcome::uncertain;
        case OptionKind::gold: return Outcome::gold;
    }
    return Outcome::unparsed;
}

inline constexpr const char* kUncertainOption = "I'm not sure.";

/// `answer` is the short answer span an option asserts (empty for the
/// uncertain option); free-form alignment matches on it.
struct Option {
    char letter = 'A';
    std::string text;
    OptionKind kind = OptionKind::memory;
    std::string answer;
};

struct OptionSet {
    std::vector<Option> options;
    std::uint64_t shuffle_seed = 0;

    const Option* by_letter(char letter) const {
        for (const auto& o : options) {
            if (o.letter == letter) return &o;
        }
        return nullptr;
    }

    const Option* by_kind(OptionKind k) const {
        for (const auto& o : options) {
            if (o.kind == k) return &o;
        }
        return nullptr;
    }
};

inline json to_json(const OptionSet& s) {
    json opts = json::array();
    for (const auto& o : s.options) {
        opts.push_back({{"letter", std::string(1, o.letter)}, {"text", o.text}, {"kind", to_string(o.kind)}, {"answer", o.answer}});
    }
    return {{"options", opts}, {"shuffle_seed", s.shuffle_seed}};
}

inline OptionSet option_set_from_json(const json& j) {
    OptionSet s;
    s.shuffle_seed = j.value("shuffle_seed", std::uint64_t{0});
    for (const auto& o : j.at("options")) {
        auto letter = required_string(o, "letter");
        if (letter.size() != 1) throw std::invalid_argument("option letter must be one character");
        s.options.push_back({letter[0], required_string(o, "text"), option_kind_from_string(required_string(o, "kind")),
                             optional_string(o, "answer")});
    }
    return s;
}

inline std::string strip_final_period(std::string s) {
    s = text::trim(s);
    while (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

inline std::string ensure_final_period(std::string s) {
    s = text::trim(s);
    if (!s.empty() && s.back() != '.' && s.back() != '!' && s.back() != '?') s.push_back('.');
    return s;
}

/// The model's answer as a statement: kept when it already names the subject,
/// otherwise rendered through the relationship's statement template.
inline std::string memory_statement(const std::string& answer, const std::string& subject,
                                    const dataset::RelationshipConfig& cfg) {
    if (text::contains_normalized(answer, subject)) return ensure_final_period(answer);
    return dataset::render_statement(cfg, subject, strip_final_period(answer));
}

struct GoldAnswer {
    std::string text;
    std::string answer;
};

/// Memory, irrelevant and uncertain options, plus gold when given. A gold
/// answer that agrees with the memory answer is dropped so no two options
/// assert the same thing. Shuffled with `seed`, then lettered from A.
inline OptionSet make_options(const memory::MemoryRecord& mem, const std::string& subject, const std::string& obj_prime,
                              const dataset::RelationshipConfig& cfg, const std::optional<GoldAnswer>& gold,
                              std::uint64_t seed, const std::vector<std::string>& gold_aliases = {}) {
    if (!mem.usable) throw std::invalid_argument("memory record for " + mem.question_id + " is not usable");
    if (text::trim(obj_prime).empty()) throw std::invalid_argument("options need obj'");
    OptionSet s;
    s.shuffle_seed = seed;
    s.options.push_back({'A', memory_statement(mem.memory_answer, subject, cfg), OptionKind::memory,
                         strip_final_period(mem.memory_answer)});
    s.options.push_back({'A', dataset::render_statement(cfg, subject, obj_prime), OptionKind::irrelevant, obj_prime});
    s.options.push_back({'A', kUncertainOption, OptionKind::uncertain, {}});
    if (gold && !memory::answers_agree(mem.memory_answer, gold->answer, gold_aliases)) {
        s.options.push_back({'A', gold->text, OptionKind::gold, gold->answer});
    }
    seeded_shuffle(s.options, seed);
    for (std::size_t i = 0; i < s.options.size(); ++i) s.options[i].letter = static_cast<char>('A' + i);
    return s;
}

/// Experimental condition: a single level, an irrelevant:relevant ratio, or
/// the mixed 5+2 bundle.
struct Condition {
    enum class Kind { level, ratio, mixed };
    Kind kind = Kind::ratio;
    Level level = Level::related;
    int irrelevant = 3;
    int relevant = 1;

    std::string label() const {
        switch (kind) {
            case Kind::level: return forge::to_string(level);
            case Kind::ratio: return std::to_string(irrelevant) + ":" + std::to_string(relevant);
            case Kind::mixed: return "mixed_5_2";
        }
        return {};
    }

    /// "unrelated", "partially_related", "related", "i:r" (i in 1..3, r in 0..1) or "mixed_5_2".
    static Condition parse(const std::string& s) {
        Condition c;
        if (s == "mixed_5_2") {
            c.kind = Kind::mixed;
            return c;
        }
        if (s == "unrelated" || s == "partially_related" || s == "related") {
            c.kind = Kind::level;
            c.level = forge::level_from_string(s);
            return c;
        }
        static const std::regex ratio(R"(^([0-9]+):([0-9]+)$)");
        std::smatch m;
        if (std::regex_match(s, m, ratio)) {
            c.kind = Kind::ratio;
            c.irrelevant = std::stoi(m[1]);
            c.relevant = std::stoi(m[2]);
            if (c.irrelevant < 1 || c.irrelevant > 3 || c.relevant < 0 || c.relevant > 1) {
                throw std::invalid_argument("ratio '" + s + "' out of range: irrelevant 1..3, relevant 0..1");
            }
            return c;
        }
        throw std::invalid_argument("unknown condition '" + s + "'");
    }

    bool operator==(const Condition&) const = default;
};

struct Mitigation {
    bool cot = false;
    bool ignore_instr = false;
    bool icl = false;

    std::string label() const {
        std::string s;
        auto add = [&](const char* part) { s += s.empty() ? part : std::string("+") + part; };
        if (cot) add("cot");
        if (ignore_instr) add("instr");
        if (icl) add("icl");
        return s.empty() ? "vanilla" : s;
    }

    /// "vanilla" or '+'-joined flags from {cot, instr, icl}.
    static Mitigation parse(const std::string& s) {
        Mitigation m;
        if (s == "vanilla") return m;
        std::size_t start = 0;
        while (start <= s.size()) {
            auto end = s.find('+', start);
            auto part = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
            if (part == "cot") m.cot = true;
            else if (part == "instr") m.ignore_instr = true;
            else if (part == "icl") m.icl = true;
            else throw std::invalid_argument("unknown mitigation '" + part + "' in '" + s + "'");
            if (end == std::string::npos) break;
            start = end + 1;
        }
        return m;
    }

    bool operator==(const Mitigation&) const = default;
};

/// Items available for one question, keyed by id.
class ItemCatalog {
public:
    ItemCatalog() = default;

    void add(InfoItem item) {
        item.check_invariants();
        auto id = item.id;
        if (!items_.emplace(id, std::move(item)).second) throw std::invalid_argument("duplicate item id '" + id + "'");
    }

    const InfoItem* find(const std::string& id) const {
        auto it = items_.find(id);
        return it == items_.end() ? nullptr : &it->second;
    }

    const InfoItem& at(const std::string& id) const {
        auto* p = find(id);
        if (!p) throw std::out_of_range("no item '" + id + "'");
        return *p;
    }

    std::vector<const InfoItem*> related_for(const std::string& question_id) const {
        std::vector<const InfoItem*> out;
        for (auto v : forge::kRelatedVariants) {
            if (auto* p = find(forge::item_id(question_id, Level::related, v))) out.push_back(p);
        }
        return out;
    }

    std::size_t size() const { return items_.size(); }

private:
    std::map<std::string, InfoItem> items_;
};

/// The background passage of a usable memory record as a relevant item.
inline InfoItem memory_item(const memory::MemoryRecord& mem) {
    InfoItem it;
    it.id = forge::item_id(mem.question_id, Level::memory);
    it.question_id = mem.question_id;
    it.role = Role::relevant;
    it.level = Level::memory;
    it.text = mem.background_text;
    return it;
}

/// Related items ordered best first (similarity, then variant order).
inline std::vector<const InfoItem*> ranked_related(const ItemCatalog& catalog, const std::string& question_id) {
    auto rel = catalog.related_for(question_id);
    std::stable_sort(rel.begin(), rel.end(), [](const InfoItem* a, const InfoItem* b) {
        if (a->similarity != b->similarity) return a->similarity > b->similarity;
        return a->variant < b->variant;
    });
    return rel;
}

/// Item ids for `condition`, shuffled with `seed`.
inline forge::Built<std::vector<std::string>> assemble_bundle(const std::string& question_id, const Condition& condition,
                                                              const ItemCatalog& catalog, std::uint64_t seed) {
    using Result = forge::Built<std::vector<std::string>>;
    std::vector<std::string> ids;
    auto need = [&](Level l) -> bool {
        auto id = forge::item_id(question_id, l);
        if (!catalog.find(id)) return false;
        ids.push_back(id);
        return true;
    };
    const auto related = ranked_related(catalog, question_id);
    auto take_related = [&](std::size_t n) -> bool {
        if (related.size() < n) return false;
        for (std::size_t i = 0; i < n; ++i) ids.push_back(related[i]->id);
        return true;
    };
    switch (condition.kind) {
        case Condition::Kind::level:
            if (condition.level == Level::related) {
                if (!take_related(1)) return Result::fail("missing related item");
            } else if (!need(condition.level)) {
                return Result::fail(std::string("missing ") + forge::to_string(condition.level) + " item");
            }
            break;
        case Condition::Kind::ratio:
            if (!take_related(static_cast<std::size_t>(condition.irrelevant))) {
                return Result::fail("fewer than " + std::to_string(condition.irrelevant) + " related items");
            }
            if (condition.relevant == 1 && !need(Level::memory)) return Result::fail("missing memory item");
            break;
        case Condition::Kind::mixed:
            if (!need(Level::unrelated)) return Result::fail("missing unrelated item");
            if (!need(Level::partially_related)) return Result::fail("missing partially_related item");
            if (!take_related(3)) return Result::fail("fewer than 3 related items");
            if (!need(Level::memory)) return Result::fail("missing memory item");
            if (!need(Level::gold)) return Result::fail("missing gold item");
            break;
    }
    seeded_shuffle(ids, seed);
    return {ids, {}};
}

struct TrialSpec {
    std::string trial_id;
    std::string question_id;
    std::string question_text;
    std::string statement;  // boolean format: the irrelevant claim to judge
    Format format = Format::multiple_choice;
    Condition condition;
    Mitigation mitigation;
    std::vector<std::string> bundle;
    OptionSet options;
    std::uint64_t seed = 0;
    std::string model;
    std::string dataset;
};

inline std::string make_trial_id(const std::string& question_id, const Condition& c, Format f, const Mitigation& m) {
    return question_id + "|" + c.label() + "|" + to_string(f) + "|" + m.label();
}

inline json to_json(const TrialSpec& s) {
    return {{"trial_id", s.trial_id},
            {"question_id", s.question_id},
            {"question_text", s.question_text},
            {"statement", s.statement},
            {"format", to_string(s.format)},
            {"condition", s.condition.label()},
            {"mitigation", s.mitigation.label()},
            {"bundle", s.bundle},
            {"options", to_json(s.options)},
            {"seed", s.seed},
            {"model", s.model},
            {"dataset", s.dataset}};
}

inline TrialSpec trial_spec_from_json(const json& j) {
    TrialSpec s;
    s.trial_id = required_string(j, "trial_id");
    s.question_id = required_string(j, "question_id");
    s.question_text = required_string(j, "question_text");
    s.statement = optional_string(j, "statement");
    s.format = format_from_string(required_string(j, "format"));
    s.condition = Condition::parse(required_string(j, "condition"));
    s.mitigation = Mitigation::parse(optional_string(j, "mitigation", "vanilla"));
    s.bundle = optional_strings(j, "bundle");
    s.options = option_set_from_json(j.at("options"));
    s.seed = j.value("seed", std::uint64_t{0});
    s.model = optional_string(j, "model");
    s.dataset = optional_string(j, "dataset");
    return s;
}

inline constexpr const char* kIgnoreClause = " Feel free to ignore irrelevant information.";
inline constexpr const char* kCotSentence = "Let's think step by step.";

/// Full prompt for one trial. `icl_block` is the exemplar text placed after
/// the instruction line when the icl flag is set.
inline std::string render_prompt(const TrialSpec& spec, const ItemCatalog& catalog, const std::string& icl_block = {}) {
    std::string task;
    switch (spec.format) {
        case Format::multiple_choice: task = "choose the best choice from the following options."; break;
        case Format::boolean: task = "determine whether the statement is true or false."; break;
        case Format::free_form: task = "answer the question."; break;
    }
    std::string s = "According to the given information and your knowledge, " + task;
    if (spec.mitigation.ignore_instr) s += kIgnoreClause;
    s += "\n";
    if (spec.mitigation.icl) {
        if (text::trim(icl_block).empty()) throw std::invalid_argument("icl requested without an exemplar block");
        s += text::trim(icl_block) + "\n";
    }
    s += "Information:\n";
    for (std::size_t i = 0; i < spec.bundle.size(); ++i) {
        s += std::to_string(i + 1) + ". " + text::collapse_whitespace(catalog.at(spec.bundle[i]).text) + "\n";
    }
    if (spec.format == Format::boolean) {
        s += "Statement:\n" + spec.statement + "\nIs the statement true or false?\n";
        if (spec.mitigation.cot) s += std::string(kCotSentence) + "\n";
        return s;
    }
    s += "Question:\n" + spec.question_text + "\n";
    if (spec.format == Format::multiple_choice) {
        s += "Options:\n";
        for (const auto& o : spec.options.options) s += std::string(1, o.letter) + ". " + o.text + "\n";
    }
    s += "Answer:\n";
    if (spec.mitigation.cot) s += std::string(kCotSentence) + "\n";
    return s;
}

namespace detail {

inline bool is_option_letter(char c, const OptionSet& options) { return options.by_letter(c) != nullptr; }

/// "C", "C.", "C)", "C:", "(C)" at the start of the response.
inline std::optional<char> leading_letter(std::string_view raw, const OptionSet& options) {
    auto t = text::trim(raw);
    std::size_t i = 0;
    if (i < t.size() && t[i] == '(') ++i;
    if (i >= t.size()) return std::nullopt;
    char c = t[i];
    if (!is_option_letter(c, options)) return std::nullopt;
    if (i + 1 == t.size()) return c;
    char next = t[i + 1];
    if (next == '.' || next == ')' || next == ':' || next == ' ' || next == ',' || next == '\n') {
        if (next == ' ' && i + 2 < t.size() && std::isalpha(static_cast<unsigned char>(t[i + 2])) && t[0] != '(') {
            // "A new study ..." is prose; "A Gore Vidal ..." is a choice only
            // when the rest repeats that option.
            auto* o = options.by_letter(c);
            if (!text::contains_normalized(t.substr(i + 2), strip_final_period(o->text))) return std::nullopt;
        }
        return c;
    }
    return std::nullopt;
}

/// "answer is C", "answer: C" style conclusions; the last one wins.
inline std::optional<char> concluding_letter(const std::string& raw, const OptionSet& options) {
    static const std::regex pat(R"((?:answer|choice|option)\s*(?:is|:)\s*\(?([A-Z])(?![A-Za-z]))", std::regex::icase);
    std::optional<char> found;
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), pat); it != std::sregex_iterator(); ++it) {
        char c = (*it)[1].str()[0];
        if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
        if (is_option_letter(c, options)) found = c;
    }
    return found;
}

/// The one option whose text (or, with `by_answer`, answer span) occurs in `raw`.
inline const Option* unique_containment(std::string_view raw, const OptionSet& options, bool by_answer) {
    const Option* hit = nullptr;
    for (const auto& o : options.options) {
        auto needle = strip_final_period(by_answer ? o.answer : o.text);
        if (needle.empty() || !text::contains_normalized(raw, needle)) continue;
        if (hit) return nullptr;
        hit = &o;
    }
    return hit;
}

}  // namespace detail

struct Parsed {
    Outcome outcome = Outcome::unparsed;
    std::optional<char> letter;
};

/// Leading letter, then a concluding "answer is X", then unique option-text
/// containment; anything else is unparsed.
inline Parsed parse_mc(const std::string& raw, const OptionSet& options) {
    auto choose = [&](char c) { return Parsed{outcome_for(options.by_letter(c)->kind), c}; };
    if (auto c = detail::leading_letter(raw, options)) return choose(*c);
    if (auto c = detail::concluding_letter(raw, options)) return choose(*c);
    if (auto* o = detail::unique_containment(raw, options, false)) return choose(o->letter);
    return {};
}

/// Phrases that mark a hedged reply. Checked before any verdict.
inline const std::vector<std::string>& hedge_phrases() {
    static const std::vector<std::string> phrases{
        "not enough information", "insufficient information", "not enough context", "cannot determine",
        "can't determine", "cannot be determined", "unable to determine", "impossible to determine",
        "not possible to determine", "cannot verify", "can't verify", "cannot confirm", "can't confirm",
        "not sure", "i don't know", "i do not know", "uncertain", "unclear",
    };
    return phrases;
}

inline bool is_hedged(std::string_view raw) {
    auto norm = text::normalize_for_match(raw);
    // Curly apostrophes are folded so "can’t" matches "can't".
    std::string folded;
    for (std::size_t i = 0; i < norm.size(); ++i) {
        if (norm.compare(i, 3, "\xE2\x80\x99") == 0) {
            folded.push_back('\'');
            i += 2;
        } else {
            folded.push_back(norm[i]);
        }
    }
    return std::any_of(hedge_phrases().begin(), hedge_phrases().end(),
                       [&](const std::string& p) { return folded.find(p) != std::string::npos; });
}

/// Hedges give uncertain; "true" gives misrepresented (the statement is the
/// irrelevant claim); "false" gives kept_memory.
inline Outcome parse_boolean(const std::string& raw) {
    if (is_hedged(raw)) return Outcome::uncertain;
    auto toks = text::tokenize(raw);
    std::optional<bool> first;
    bool saw_true = false;
    bool saw_false = false;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        bool negated = i > 0 && toks[i - 1] == "not";
        if (toks[i] == "true") {
            (negated ? saw_false : saw_true) = true;
            if (!first) first = !negated;
        } else if (toks[i] == "false") {
            (negated ? saw_true : saw_false) = true;
            if (!first) first = negated;
        }
    }
    if (!saw_true && !saw_false) return Outcome::unparsed;
    if (saw_true != saw_false) return saw_true ? Outcome::misrepresented : Outcome::kept_memory;
    if (!toks.empty() && (toks.front() == "true" || toks.front() == "false")) {
        return toks.front() == "true" ? Outcome::misrepresented : Outcome::kept_memory;
    }
    return Outcome::unparsed;
}

inline std::string render_alignment_prompt(const std::string& question, const std::string& response,
                                           const OptionSet& options) {
    std::string s = "Decide which option the response below agrees with.\n\n";
    s += "Question: " + question + "\n";
    s += "Response: " + text::collapse_whitespace(response) + "\n";
    s += "Options:\n";
    for (const auto& o : options.options) s += std::string(1, o.letter) + ". " + o.text + "\n";
    s += "\nReply with the letter of the matching option only, or with \"none\" if no option matches.\nLetter:";
    return s;
}

struct Alignment {
    Outcome outcome = Outcome::unparsed;
    std::string via;  // "containment", "hedge", "aligner", or "aligner-error: ..."
};

/// Containment pre-pass (option text, then answer span), hedge check, then
/// the aligner. `aligner` may be null, in which case unmatched replies are unparsed.
inline Alignment align_free_form(const std::string& raw, const std::string& question, const OptionSet& options,
                                 providers::ChatBackend* aligner, double temperature = 0.0) {
    if (auto* o = detail::unique_containment(raw, options, false)) return {outcome_for(o->kind), "containment"};
    if (auto* o = detail::unique_containment(raw, options, true)) return {outcome_for(o->kind), "containment"};
    if (is_hedged(raw)) return {Outcome::uncertain, "hedge"};
    if (!aligner) return {Outcome::unparsed, "no aligner"};
    std::string reply;
    try {
        reply = aligner->chat({render_alignment_prompt(question, raw, options), temperature, 8, "eval.align"});
    } catch (const providers::ProviderError& e) {
        return {Outcome::unparsed, std::string("aligner-error: ") + e.what()};
    }
    auto t = text::trim(reply);
    if (auto c = detail::leading_letter(t, options)) return {outcome_for(options.by_letter(*c)->kind), "aligner"};
    return {Outcome::unparsed, "aligner"};
}

struct TrialResult {
    std::string trial_id;
    std::string question_id;
    std::string raw_response;
    Outcome outcome = Outcome::unparsed;
    std::string note;
    std::string model;
    std::string dataset;
    std::string condition;
    std::string format;
    std::string mitigation;
};

inline json to_json(const TrialResult& r) {
    return {{"trial_id", r.trial_id},   {"question_id", r.question_id}, {"raw_response", r.raw_response},
            {"outcome", to_string(r.outcome)}, {"note", r.note},         {"model", r.model},
            {"dataset", r.dataset},     {"condition", r.condition},     {"format", r.format},
            {"mitigation", r.mitigation}};
}

inline TrialResult trial_result_from_json(const json& j) {
    TrialResult r;
    r.trial_id = required_string(j, "trial_id");
    r.question_id = optional_string(j, "question_id");
    r.raw_response = optional_string(j, "raw_response");
    r.outcome = outcome_from_string(required_string(j, "outcome"));
    r.note = optional_string(j, "note");
    r.model = optional_string(j, "model");
    r.dataset = optional_string(j, "dataset");
    r.condition = optional_string(j, "condition");
    r.format = optional_string(j, "format");
    r.mitigation = optional_string(j, "mitigation");
    return r;
}

struct RunOptions {
    double temperature = 0.0;
    int max_tokens = 512;
    std::size_t max_inflight = 4;
    std::string icl_block;
};

/// Runs one trial. Provider failures become an unparsed outcome with a note.
inline TrialResult run_trial(const TrialSpec& spec, const ItemCatalog& catalog, providers::ChatBackend& chat,
                             providers::ChatBackend* aligner, const RunOptions& opts = {}) {
    TrialResult r;
    r.trial_id = spec.trial_id;
    r.question_id = spec.question_id;
    r.model = spec.model;
    r.dataset = spec.dataset;
    r.condition = spec.condition.label();
    r.format = to_string(spec.format);
    r.mitigation = spec.mitigation.label();
    try {
        r.raw_response = chat.chat({render_prompt(spec, catalog, opts.icl_block), opts.temperature, opts.max_tokens,
                                    std::string("eval.") + to_string(spec.format)});
    } catch (const providers::ProviderError& e) {
        r.outcome = Outcome::unparsed;
        r.note = std::string("provider error: ") + e.what();
        return r;
    }
    switch (spec.format) {
        case Format::multiple_choice: r.outcome = parse_mc(r.raw_response, spec.options).outcome; break;
        case Format::boolean: r.outcome = parse_boolean(r.raw_response); break;
        case Format::free_form: {
            auto a = align_free_form(r.raw_response, spec.question_text, spec.options, aligner, opts.temperature);
            r.outcome = a.outcome;
            r.note = a.via;
            break;
        }
    }
    return r;
}

/// One result per spec, sorted by trial id.
inline std::vector<TrialResult> run_condition(const std::vector<TrialSpec>& specs, const ItemCatalog& catalog,
                                              providers::ChatBackend& chat, providers::ChatBackend* aligner,
                                              const RunOptions& opts = {}) {
    auto results = parallel_map(specs, opts.max_inflight,
                                [&](const TrialSpec& s) { return run_trial(s, catalog, chat, aligner, opts); });
    std::sort(results.begin(), results.end(),
              [](const TrialResult& a, const TrialResult& b) { return a.trial_id < b.trial_id; });
    return results;
}

/// What a question contributes to trial planning.
struct QuestionPlanInput {
    dataset::FactTriple triple;
    dataset::QuestionRecord question;
    const memory::MemoryRecord* memory = nullptr;
};

struct SkippedTrial {
    std::string trial_id;
    std::string reason;
};

inline json to_json(const SkippedTrial& s) { return {{"trial_id", s.trial_id}, {"reason", s.reason}}; }

struct TrialPlan {
    std::vector<TrialSpec> specs;
    std::vector<SkippedTrial> skipped;
};

struct PlanConfig {
    std::vector<Condition> conditions{Condition{}};
    std::vector<Format> formats{Format::multiple_choice};
    std::vector<Mitigation> mitigations{Mitigation{}};
    std::uint64_t seed = 0;
    std::string model;
    std::string dataset;
};

/// Specs for every question x condition x format x mitigation. The bundle
/// and options depend only on (seed, question, condition), so formats and
/// mitigations of one question see the same information and option order.
inline TrialPlan plan_trials(const std::vector<QuestionPlanInput>& questions, const ItemCatalog& catalog,
                             const dataset::RelationshipTable& relationships, const PlanConfig& cfg) {
    TrialPlan plan;
    for (const auto& q : questions) {
        const auto& qid = q.triple.id;
        for (const auto& cond : cfg.conditions) {
            auto skip = [&](const std::string& why) {
                for (auto f : cfg.formats) {
                    for (const auto& m : cfg.mitigations) plan.skipped.push_back({make_trial_id(qid, cond, f, m), why});
                }
            };
            if (!q.memory || !q.memory->usable) {
                skip("memory record unusable");
                continue;
            }
            const auto label = cond.label();
            auto bundle = assemble_bundle(qid, cond, catalog, derive_seed(cfg.seed, {"bundle", qid, label}));
            if (!bundle) {
                skip(bundle.reason);
                continue;
            }
            // The irrelevant claim follows the misleading pair of the bundle's
            // leading distractor: the top related item, else the level item.
            const InfoItem* primary = nullptr;
            auto related = ranked_related(catalog, qid);
            if (cond.kind != Condition::Kind::level || cond.level == Level::related) {
                primary = related.empty() ? nullptr : related.front();
            } else {
                primary = catalog.find(forge::item_id(qid, cond.level));
            }
            if (!primary || primary->provenance.obj_prime.empty()) {
                skip("no obj' for the irrelevant option");
                continue;
            }
            const auto& obj_prime = primary->provenance.obj_prime;
            if (memory::answers_agree(q.memory->memory_answer, obj_prime, {})) {
                skip("memory answer coincides with obj'");
                continue;
            }
            const auto& rel = relationships.at(q.triple.relationship);
            std::optional<GoldAnswer> gold;
            if (cond.kind == Condition::Kind::mixed) {
                gold = GoldAnswer{dataset::render_statement(rel, q.triple.subject, q.triple.object), q.triple.object};
            }
            auto options = make_options(*q.memory, q.triple.subject, obj_prime, rel, gold,
                                        derive_seed(cfg.seed, {"options", qid, label}), q.question.gold_aliases);
            for (auto f : cfg.formats) {
                for (const auto& m : cfg.mitigations) {
                    TrialSpec s;
                    s.trial_id = make_trial_id(qid, cond, f, m);
                    s.question_id = qid;
                    s.question_text = q.question.text;
                    s.statement = options.by_kind(OptionKind::irrelevant)->text;
                    s.format = f;
                    s.condition = cond;
                    s.mitigation = m;
                    s.bundle = *bundle.value;
                    s.options = options;
                    s.seed = cfg.seed;
                    s.model = cfg.model;
                    s.dataset = cfg.dataset;
                    plan.specs.push_back(std::move(s));
                }
            }
        }
    }
    std::sort(plan.specs.begin(), plan.specs.end(),
              [](const TrialSpec& a, const TrialSpec& b) { return a.trial_id < b.trial_id; });
    std::sort(plan.skipped.begin(), plan.skipped.end(),
              [](const SkippedTrial& a, const SkippedTrial& b) { return a.trial_id < b.trial_id; });
    return plan;
}

}  // namespace irrbench::harness
