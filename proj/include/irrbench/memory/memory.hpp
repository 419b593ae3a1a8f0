#pragma once

// Closed-book elicitation of a model's own answer and background passage,
// followed by the consistency and entailment checks that decide whether the
// record is usable as parametric memory.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "irrbench/dataset/dataset.hpp"
#include "irrbench/jsonl.hpp"
#include "irrbench/parallel.hpp"
#include "irrbench/providers/types.hpp"
#include "irrbench/text.hpp"

namespace irrbench::memory {

enum class EntailmentMode { judge, fallback };
enum class EntailmentPath { none, judge, fallback };

inline const char* to_string(EntailmentPath p) {
    switch (p) {
        case EntailmentPath::none: return "none";
        case EntailmentPath::judge: return "judge";
        case EntailmentPath::fallback: return "fallback";
    }
    return "none";
}

inline EntailmentPath entailment_path_from_string(const std::string& s) {
    if (s == "judge") return EntailmentPath::judge;
    if (s == "fallback") return EntailmentPath::fallback;
    return EntailmentPath::none;
}

struct MemoryRecord {
    std::string question_id;
    std::string memory_answer;
    std::string background_text;
    bool consistent = false;
    bool entailed = false;
    bool usable = false;
    std::string reason;  // why the record is unusable, empty otherwise
    EntailmentPath entailment_path = EntailmentPath::none;
    bool judge_warning = false;  // judge output was unparsable, fallback used
    std::vector<std::string> reask_answers;

    void settle() {
        usable = consistent && entailed && !text::trim(memory_answer).empty() && !text::trim(background_text).empty();
        if (!usable && reason.empty()) {
            if (!consistent) reason = "inconsistent answers";
            else if (!entailed) reason = "background does not entail answer";
            else reason = "empty answer or background";
        }
        if (usable) reason.clear();
    }
};

inline json to_json(const MemoryRecord& m) {
    return {{"question_id", m.question_id},
            {"memory_answer", m.memory_answer},
            {"background_text", m.background_text},
            {"consistent", m.consistent},
            {"entailed", m.entailed},
            {"usable", m.usable},
            {"reason", m.reason},
            {"entailment_path", to_string(m.entailment_path)},
            {"judge_warning", m.judge_warning},
            {"reask_answers", m.reask_answers}};
}

inline MemoryRecord memory_from_json(const json& j) {
    MemoryRecord m;
    m.question_id = required_string(j, "question_id");
    m.memory_answer = optional_string(j, "memory_answer");
    m.background_text = optional_string(j, "background_text");
    m.consistent = j.value("consistent", false);
    m.entailed = j.value("entailed", false);
    m.usable = j.value("usable", false);
    m.reason = optional_string(j, "reason");
    m.entailment_path = entailment_path_from_string(optional_string(j, "entailment_path", "none"));
    m.judge_warning = j.value("judge_warning", false);
    m.reask_answers = optional_strings(j, "reask_answers");
    return m;
}

inline std::string render_elicitation_prompt(const std::string& question) {
    return "Answer the following question using only your own knowledge. Reply in exactly this format:\n"
           "Answer: <a short answer>\n"
           "Background: <a short passage of background knowledge that supports the answer>\n"
           "\n"
           "Question: " + question + "\n";
}

/// Re-ask phrasings, cycled across consistency trials.
inline std::string render_reask_prompt(const std::string& question, int trial) {
    switch (trial % 3) {
        case 0: return "Answer the question below with a short answer only.\nQuestion: " + question + "\nAnswer:";
        case 1: return "Give only the short answer to this question, with no explanation.\nQuestion: " + question + "\nAnswer:";
        default: return "Question: " + question + "\nReply with the answer alone.\nAnswer:";
    }
}

inline std::string render_entailment_prompt(const std::string& background, const std::string& answer) {
    return "Does the passage below support the given answer? Reply with yes or no.\n"
           "Passage: " + background + "\n"
           "Answer: " + answer + "\n"
           "Reply:";
}

/// A closed-book prompt carries no information section and no numbered passages.
inline bool is_closed_book(const std::string& prompt) {
    for (const auto& raw : text::split_lines(prompt)) {
        auto line = text::trim(raw);
        if (line == "Information:") return false;
        if (line.size() > 2 && std::isdigit(static_cast<unsigned char>(line[0])) && line[1] == '.' && line[2] == ' ') {
            return false;
        }
    }
    return true;
}

struct ParsedElicitation {
    std::string answer;
    std::string background;
};

/// Splits "Answer: ...\nBackground: ..." (labels case-insensitive, at line start).
inline std::optional<ParsedElicitation> parse_elicitation(const std::string& response) {
    auto lines = text::split_lines(response);
    std::optional<std::size_t> answer_line;
    std::optional<std::size_t> background_line;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto t = text::trim(lines[i]);
        if (!answer_line && text::starts_with_ci(t, "answer:")) answer_line = i;
        else if (answer_line && !background_line && text::starts_with_ci(t, "background:")) background_line = i;
    }
    if (!answer_line || !background_line) return std::nullopt;
    std::string answer = text::trim(lines[*answer_line]).substr(7);
    for (std::size_t i = *answer_line + 1; i < *background_line; ++i) answer += " " + lines[i];
    std::string background = text::trim(lines[*background_line]).substr(11);
    for (std::size_t i = *background_line + 1; i < lines.size(); ++i) background += "\n" + lines[i];
    ParsedElicitation out{text::collapse_whitespace(answer), text::trim(background)};
    while (!out.answer.empty() && (out.answer.back() == '.' || out.answer.back() == ',')) out.answer.pop_back();
    if (out.answer.empty() || out.background.empty()) return std::nullopt;
    return out;
}

/// Lowercased, whitespace-collapsed tokens with a leading article dropped.
inline std::vector<std::string> answer_tokens(const std::string& answer) {
    auto toks = text::tokenize(answer);
    if (!toks.empty() && (toks.front() == "the" || toks.front() == "a" || toks.front() == "an")) toks.erase(toks.begin());
    return toks;
}

inline bool contains_token_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

/// Two answers agree when they are equal after normalization, one contains
/// the other as a whole-word run, or both name one of the gold aliases.
inline bool answers_agree(const std::string& a, const std::string& b, const std::vector<std::string>& gold_aliases) {
    auto ta = answer_tokens(a);
    auto tb = answer_tokens(b);
    if (ta.empty() || tb.empty()) return false;
    if (ta == tb || contains_token_run(ta, tb) || contains_token_run(tb, ta)) return true;
    auto names_alias = [&](const std::vector<std::string>& t) {
        return std::any_of(gold_aliases.begin(), gold_aliases.end(),
                           [&](const std::string& alias) { return contains_token_run(t, answer_tokens(alias)); });
    };
    return names_alias(ta) && names_alias(tb);
}

/// First line of a short-answer reply with any "Answer:" label removed.
inline std::string parse_short_answer(const std::string& response) {
    auto t = text::trim(response);
    if (text::starts_with_ci(t, "answer:")) t = text::trim(t.substr(7));
    auto nl = t.find('\n');
    if (nl != std::string::npos) t = text::trim(t.substr(0, nl));
    while (!t.empty() && (t.back() == '.' || t.back() == ',')) t.pop_back();
    return t;
}

struct ElicitationOptions {
    int consistency_trials = 2;
    EntailmentMode entailment = EntailmentMode::judge;
    double temperature = 0.0;
    int max_tokens = 512;
    std::size_t max_inflight = 4;
};

/// Closed-book elicitation only; the record is not yet validated.
inline MemoryRecord elicit(const dataset::QuestionRecord& q, providers::ChatBackend& chat,
                           const ElicitationOptions& opts = {}) {
    MemoryRecord rec;
    rec.question_id = q.triple_id;
    std::string response;
    try {
        response = chat.chat({render_elicitation_prompt(q.text), opts.temperature, opts.max_tokens, "elicit"});
    } catch (const providers::ProviderError& e) {
        rec.reason = std::string("provider error: ") + e.what();
        return rec;
    }
    auto parsed = parse_elicitation(response);
    if (!parsed) {
        rec.reason = "unparsable elicitation response";
        return rec;
    }
    rec.memory_answer = parsed->answer;
    rec.background_text = parsed->background;
    return rec;
}

struct ConsistencyResult {
    bool consistent = false;
    std::vector<std::string> answers;
};

/// Re-asks `trials` times; consistent iff every re-ask agrees with `first_answer`.
/// Provider errors propagate so the caller can mark the record unusable.
inline ConsistencyResult check_consistency(const dataset::QuestionRecord& q, const std::string& first_answer,
                                           providers::ChatBackend& chat, int trials = 2,
                                           const ElicitationOptions& opts = {}) {
    if (trials < 1) throw std::invalid_argument("consistency trials must be at least 1");
    ConsistencyResult r;
    r.consistent = !text::trim(first_answer).empty();
    for (int i = 0; i < trials; ++i) {
        auto reply = chat.chat({render_reask_prompt(q.text, i), opts.temperature, opts.max_tokens, "elicit.reask"});
        auto ans = parse_short_answer(reply);
        r.consistent = r.consistent && answers_agree(first_answer, ans, q.gold_aliases);
        r.answers.push_back(std::move(ans));
    }
    return r;
}

struct EntailmentResult {
    bool entailed = false;
    EntailmentPath path = EntailmentPath::fallback;
    bool warning = false;
};

inline bool entailed_by_containment(const std::string& background, const std::string& answer) {
    auto a = text::trim(answer);
    while (!a.empty() && a.back() == '.') a.pop_back();
    return text::contains_normalized(background, a);
}

/// Judge path when a chat backend is given and mode is judge; an unparsable
/// verdict falls back to containment with the warning flag set.
inline EntailmentResult check_entailment(const std::string& background, const std::string& answer,
                                         EntailmentMode mode = EntailmentMode::fallback,
                                         providers::ChatBackend* judge = nullptr,
                                         const ElicitationOptions& opts = {}) {
    if (text::trim(background).empty() || text::trim(answer).empty()) {
        throw std::invalid_argument("entailment check needs a background and an answer");
    }
    if (mode == EntailmentMode::judge && judge) {
        auto reply = judge->chat({render_entailment_prompt(background, answer), opts.temperature, 8, "elicit.entail"});
        auto toks = text::tokenize(reply);
        if (!toks.empty() && (toks.front() == "yes" || toks.front() == "no")) {
            return {toks.front() == "yes", EntailmentPath::judge, false};
        }
        return {entailed_by_containment(background, answer), EntailmentPath::fallback, true};
    }
    return {entailed_by_containment(background, answer), EntailmentPath::fallback, false};
}

/// Elicitation plus both checks. Provider failures leave the record unusable
/// with the error as its reason.
inline MemoryRecord build_memory(const dataset::QuestionRecord& q, providers::ChatBackend& chat,
                                 const ElicitationOptions& opts = {}) {
    auto rec = elicit(q, chat, opts);
    if (rec.memory_answer.empty()) {
        rec.usable = false;
        return rec;
    }
    try {
        auto c = check_consistency(q, rec.memory_answer, chat, opts.consistency_trials, opts);
        rec.consistent = c.consistent;
        rec.reask_answers = std::move(c.answers);
        auto e = check_entailment(rec.background_text, rec.memory_answer, opts.entailment, &chat, opts);
        rec.entailed = e.entailed;
        rec.entailment_path = e.path;
        rec.judge_warning = e.warning;
    } catch (const providers::ProviderError& e) {
        rec.consistent = false;
        rec.entailed = false;
        rec.reason = std::string("provider error: ") + e.what();
    }
    rec.settle();
    return rec;
}

/// One validated record per question, sorted by question id.
inline std::vector<MemoryRecord> build_memories(const std::vector<dataset::QuestionRecord>& questions,
                                                providers::ChatBackend& chat, const ElicitationOptions& opts = {}) {
    auto records = parallel_map(questions, opts.max_inflight,
                                [&](const dataset::QuestionRecord& q) { return build_memory(q, chat, opts); });
    std::sort(records.begin(), records.end(),
              [](const MemoryRecord& a, const MemoryRecord& b) { return a.question_id < b.question_id; });
    return records;
}

}  // namespace irrbench::memory
