#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "irrbench/corpus/distribution.hpp"
#include "irrbench/corpus/retrieval.hpp"
#include "irrbench/corpus/scoring.hpp"
#include "irrbench/dataset/dataset.hpp"
#include "irrbench/forge/types.hpp"
#include "irrbench/parallel.hpp"
#include "irrbench/providers/types.hpp"
#include "irrbench/text.hpp"

namespace irrbench::forge {

/// One question with its own ranked retrieval.
struct QuestionContext {
    dataset::FactTriple triple;
    dataset::QuestionRecord question;
    std::vector<corpus::ScoredPassage> top;
};

struct ForgeOptions {
    std::size_t intro_sentences = 2;
    std::size_t intro_chars = 600;
    double temperature = 0.0;
    int max_tokens = 512;
    std::size_t max_inflight = 4;
    std::set<Level> levels{Level::unrelated, Level::partially_related, Level::related};
    std::vector<Variant> variants{std::begin(kRelatedVariants), std::end(kRelatedVariants)};
};

/// Result of one construction step: an item, or the reason there is none.
template <class T>
struct Built {
    std::optional<T> value;
    std::string reason;

    static Built fail(std::string why) { return {std::nullopt, std::move(why)}; }
    explicit operator bool() const { return value.has_value(); }
};

/// Shared lookup state. Pools map relationship -> passage id -> the sorted
/// ids of the triples whose questions retrieved that passage.
struct ForgeInputs {
    const corpus::PassageStore& store;
    const corpus::Scorer& scorer;
    std::map<std::string, dataset::FactTriple> triples;
    std::map<std::string, std::map<std::string, std::vector<std::string>>> pools;

    static ForgeInputs build(const corpus::PassageStore& store, const corpus::Scorer& scorer,
                             const std::vector<QuestionContext>& contexts) {
        ForgeInputs in{store, scorer, {}, {}};
        for (const auto& c : contexts) {
            in.triples.emplace(c.triple.id, c.triple);
            auto& pool = in.pools[c.triple.relationship];
            for (const auto& sp : c.top) pool[sp.passage_id].push_back(c.triple.id);
        }
        for (auto& [_, pool] : in.pools) {
            for (auto& [_, origins] : pool) {
                std::sort(origins.begin(), origins.end());
                origins.erase(std::unique(origins.begin(), origins.end()), origins.end());
            }
        }
        return in;
    }

    const std::map<std::string, std::vector<std::string>>& pool_for(const std::string& relationship) const {
        static const std::map<std::string, std::vector<std::string>> empty;
        auto it = pools.find(relationship);
        return it == pools.end() ? empty : it->second;
    }
};

inline bool is_gold_alias(std::string_view s, const std::vector<std::string>& gold) {
    return std::any_of(gold.begin(), gold.end(), [&](const std::string& g) { return text::equals_normalized(s, g); });
}

inline bool mentions_gold(std::string_view text, const std::vector<std::string>& gold) {
    return text::contains_any_normalized(text, gold);
}

namespace detail {

struct Candidate {
    double score = 0.0;
    std::string passage_id;
    const dataset::FactTriple* origin = nullptr;
    std::string obj_prime;
};

inline bool better(const Candidate& a, const std::optional<Candidate>& best) {
    if (!best) return true;
    if (a.score != best->score) return a.score > best->score;
    return a.passage_id < best->passage_id;
}

inline double score_of(const ForgeInputs& in, const std::vector<double>& scores, const std::string& passage_id) {
    auto idx = in.store.index_of(passage_id);
    if (!idx) throw std::invalid_argument("pool passage '" + passage_id + "' is not in the corpus");
    return scores[*idx];
}

/// First alias of `t` (object first) mentioned in `text`.
inline std::optional<std::string> mentioned_alias(std::string_view text, const dataset::FactTriple& t) {
    if (text::contains_normalized(text, t.object)) return t.object;
    for (const auto& a : t.object_aliases) {
        if (text::contains_normalized(text, a)) return a;
    }
    return std::nullopt;
}

}  // namespace detail

/// Highest-scoring same-relationship pool passage that names another triple's
/// subject and object and mentions neither this subject nor a gold alias.
inline Built<InfoItem> build_unrelated(const QuestionContext& ctx, const ForgeInputs& in) {
    const auto& pool = in.pool_for(ctx.triple.relationship);
    if (pool.empty()) return Built<InfoItem>::fail("empty relation pool");
    const auto scores = in.scorer.score_all(ctx.question.text);
    const auto& gold = ctx.question.gold_aliases;
    std::optional<detail::Candidate> best;
    for (const auto& [pid, origins] : pool) {
        const auto& text = in.store.find(pid)->text;
        if (text::contains_normalized(text, ctx.triple.subject) || mentions_gold(text, gold)) continue;
        const double s = detail::score_of(in, scores, pid);
        for (const auto& oid : origins) {
            const auto& t = in.triples.at(oid);
            if (oid == ctx.triple.id || text::equals_normalized(t.subject, ctx.triple.subject)) continue;
            if (!text::contains_normalized(text, t.subject)) continue;
            auto alias = detail::mentioned_alias(text, t);
            if (!alias || is_gold_alias(*alias, gold)) continue;
            detail::Candidate c{s, pid, &t, *alias};
            if (detail::better(c, best)) best = c;
            break;
        }
    }
    if (!best) return Built<InfoItem>::fail("no pool passage names another subject and object without the gold answer");
    InfoItem item;
    item.id = item_id(ctx.triple.id, Level::unrelated);
    item.question_id = ctx.triple.id;
    item.role = Role::irrelevant;
    item.level = Level::unrelated;
    item.text = in.store.find(best->passage_id)->text;
    item.similarity = best->score;
    item.provenance.subj_prime = best->origin->subject;
    item.provenance.obj_prime = best->obj_prime;
    item.provenance.source_passage_id = best->passage_id;
    return {item, {}};
}

/// Paragraph one: the best-ranked own passage naming the subject but no gold
/// alias. Paragraph two: the corpus introduction of obj', where obj' is the
/// object of the highest-scoring pool passage that mentions its own triple's
/// object.
inline Built<InfoItem> build_partially_related(const QuestionContext& ctx, const ForgeInputs& in,
                                               const ForgeOptions& opts = {}) {
    const auto& gold = ctx.question.gold_aliases;
    const corpus::Passage* p1 = nullptr;
    for (const auto& sp : ctx.top) {
        const auto* p = in.store.find(sp.passage_id);
        if (p && text::contains_normalized(p->text, ctx.triple.subject) && !mentions_gold(p->text, gold)) {
            p1 = p;
            break;
        }
    }
    if (!p1) return Built<InfoItem>::fail("no top passage names the subject without the gold answer");

    const auto& pool = in.pool_for(ctx.triple.relationship);
    const auto scores = in.scorer.score_all(ctx.question.text);
    std::optional<detail::Candidate> best;
    for (const auto& [pid, origins] : pool) {
        const auto& text = in.store.find(pid)->text;
        const double s = detail::score_of(in, scores, pid);
        for (const auto& oid : origins) {
            const auto& t = in.triples.at(oid);
            if (oid == ctx.triple.id || text::equals_normalized(t.subject, ctx.triple.subject)) continue;
            if (is_gold_alias(t.object, gold) || !detail::mentioned_alias(text, t)) continue;
            detail::Candidate c{s, pid, &t, t.object};
            if (detail::better(c, best)) best = c;
            break;
        }
    }
    if (!best) return Built<InfoItem>::fail("no pool passage carries a non-gold answer of its own question");

    const auto* intro = in.store.intro_for(best->obj_prime);
    if (!intro) return Built<InfoItem>::fail("no introduction passage for '" + best->obj_prime + "'");
    auto p2 = text::leading_excerpt(intro->text, opts.intro_sentences, opts.intro_chars);
    if (p2.empty()) return Built<InfoItem>::fail("empty introduction for '" + best->obj_prime + "'");

    InfoItem item;
    item.id = item_id(ctx.triple.id, Level::partially_related);
    item.question_id = ctx.triple.id;
    item.role = Role::irrelevant;
    item.level = Level::partially_related;
    item.text = p1->text + "\n\n" + p2;
    item.provenance.subj_prime = best->origin->subject;
    item.provenance.obj_prime = best->obj_prime;
    item.provenance.source_passage_id = p1->id;
    item.provenance.secondary_passage_id = intro->id;
    item.provenance.first_paragraph_length = p1->text.size();
    if (mentions_gold(item.text, gold)) {
        return Built<InfoItem>::fail("introduction of '" + best->obj_prime + "' mentions the gold answer");
    }
    item.similarity = in.scorer.score_text(ctx.question.text, item.text);
    return {item, {}};
}

/// Highest-scoring own top passage that mentions a gold alias.
inline Built<InfoItem> build_gold(const QuestionContext& ctx, const ForgeInputs& in) {
    const corpus::Passage* best = nullptr;
    double best_score = 0.0;
    for (const auto& sp : ctx.top) {
        const auto* p = in.store.find(sp.passage_id);
        if (!p || !mentions_gold(p->text, ctx.question.gold_aliases)) continue;
        if (!best || sp.score > best_score || (sp.score == best_score && p->id < best->id)) {
            best = p;
            best_score = sp.score;
        }
    }
    if (!best) return Built<InfoItem>::fail("no top passage mentions the gold answer");
    InfoItem item;
    item.id = item_id(ctx.triple.id, Level::gold);
    item.question_id = ctx.triple.id;
    item.role = Role::relevant;
    item.level = Level::gold;
    item.text = best->text;
    item.similarity = best_score;
    item.provenance.source_passage_id = best->id;
    return {item, {}};
}

inline DistractorPlan make_plan(const QuestionContext& ctx, const std::optional<InfoItem>& unrelated,
                                const std::optional<InfoItem>& partial) {
    DistractorPlan plan;
    plan.question_id = ctx.triple.id;
    plan.subj = ctx.triple.subject;
    plan.relationship = ctx.triple.relationship;
    plan.question_text = ctx.question.text;
    plan.obj_aliases = ctx.question.gold_aliases;
    if (unrelated) plan.sources.unrelated = unrelated->provenance.source_passage_id;
    if (partial) {
        plan.sources.partial_p1 = partial->provenance.source_passage_id;
        plan.sources.obj_prime_source = partial->provenance.secondary_passage_id;
    }
    const auto* pair_from = partial ? &*partial : (unrelated ? &*unrelated : nullptr);
    if (pair_from) {
        plan.subj_prime = pair_from->provenance.subj_prime;
        plan.obj_prime = pair_from->provenance.obj_prime;
    }
    return plan;
}

inline std::string variant_recipe(const DistractorPlan& p, Variant v) {
    switch (v) {
        case Variant::misleading_linkage:
            return "Tie " + p.subj + " to " + p.obj_prime +
                   " through some event, visit, place or activity, so that a hurried reader might link the two "
                   "when thinking about the question.";
        case Variant::common_characteristics:
            return "Compare " + p.subj + " with " + p.subj_prime + ", pointing out what they have in common, and "
                   "mention that " + p.subj_prime + " is connected to " + p.obj_prime + " in the same way the "
                   "question asks about (" + p.relationship + ").";
        case Variant::fictional_anecdotes:
            return "Make up a short story in which " + p.subj + " meets or deals with " + p.subj_prime +
                   ", with colorful but inconsequential details, and mention that " + p.subj_prime +
                   " is connected to " + p.obj_prime + ".";
        case Variant::none: break;
    }
    throw std::invalid_argument("related generation needs a variant");
}

inline std::string render_related_prompt(const DistractorPlan& p, Variant v) {
    std::string s;
    s += "Write one paragraph of three to five sentences for a reading test. The paragraph should sound relevant "
         "to the question below but must not help answer it.\n\n";
    s += "Question: " + p.question_text + "\n";
    s += "Subject: " + p.subj + "\n";
    s += "Other subject: " + p.subj_prime + "\n";
    s += "Other object: " + p.obj_prime + "\n";
    s += "Relationship: " + p.relationship + "\n";
    s += "Style: " + std::string(to_string(v)) + "\n";
    s += "Instructions: " + variant_recipe(p, v) + "\n\n";
    s += "Rules:\n";
    s += "- Mention \"" + p.subj + "\" and \"" + p.obj_prime + "\" by name";
    s += v == Variant::misleading_linkage ? ".\n" : (", and also \"" + p.subj_prime + "\".\n");
    s += "- Do not state the true answer to the question";
    if (!p.obj_aliases.empty()) s += " and never mention \"" + p.obj_aliases.front() + "\"";
    s += ".\n";
    s += "- If you cannot write such a paragraph, reply with exactly: null\n\n";
    s += "Paragraph:";
    return s;
}

inline bool is_null_response(std::string_view response) {
    auto t = text::lowercase(text::trim(response));
    while (!t.empty() && (t.back() == '.' || t.back() == '"' || t.back() == '\'')) t.pop_back();
    while (!t.empty() && (t.front() == '"' || t.front() == '\'')) t.erase(t.begin());
    return t.empty() || t == "null";
}

/// Mention rules every related text must satisfy, or the reason it fails.
inline std::optional<std::string> related_surface_violation(std::string_view text, const DistractorPlan& p, Variant v) {
    if (!text::contains_normalized(text, p.subj)) return "does not mention the subject";
    if (!text::contains_normalized(text, p.obj_prime)) return "does not mention obj'";
    if (v != Variant::misleading_linkage && !text::contains_normalized(text, p.subj_prime)) {
        return "does not mention subj'";
    }
    return std::nullopt;
}

inline Built<InfoItem> generate_related(const DistractorPlan& plan, Variant variant, providers::ChatBackend& chat,
                                        const corpus::Scorer& scorer, const ForgeOptions& opts = {}) {
    if (!plan.complete()) return Built<InfoItem>::fail("plan lacks subj' or obj'");
    auto raw = chat.chat({render_related_prompt(plan, variant), opts.temperature, opts.max_tokens, "forge.related"});
    if (is_null_response(raw)) return Built<InfoItem>::fail("generator declined (null)");
    auto body = text::trim(raw);
    if (auto bad = related_surface_violation(body, plan, variant)) return Built<InfoItem>::fail("generated text " + *bad);
    if (mentions_gold(body, plan.obj_aliases)) return Built<InfoItem>::fail("generated text mentions the gold answer");
    InfoItem item;
    item.id = item_id(plan.question_id, Level::related, variant);
    item.question_id = plan.question_id;
    item.role = Role::irrelevant;
    item.level = Level::related;
    item.variant = variant;
    item.text = body;
    item.similarity = scorer.score_text(plan.question_text, item.text);
    item.provenance.subj_prime = plan.subj_prime;
    item.provenance.obj_prime = plan.obj_prime;
    return {item, {}};
}

/// Highest similarity; ties go to the earlier variant.
inline const InfoItem& pick_top_variant(const std::vector<const InfoItem*>& related) {
    if (related.empty()) throw std::invalid_argument("pick_top_variant needs at least one related item");
    const InfoItem* best = nullptr;
    for (const auto* it : related) {
        if (it->level != Level::related) throw std::invalid_argument("item " + it->id + " is not related information");
        if (!best || it->similarity > best->similarity ||
            (it->similarity == best->similarity && it->variant < best->variant)) {
            best = it;
        }
    }
    return *best;
}

inline const InfoItem& pick_top_variant(const std::vector<InfoItem>& related) {
    std::vector<const InfoItem*> ptrs;
    for (const auto& it : related) ptrs.push_back(&it);
    return pick_top_variant(ptrs);
}

/// Construction rules for an emitted irrelevant item, checked against the
/// question's triple. Returns the first violated rule.
inline std::optional<std::string> level_violation(const InfoItem& item, const dataset::FactTriple& triple) {
    if (item.role != Role::irrelevant) return std::nullopt;
    if (mentions_gold(item.text, triple.object_aliases)) return "mentions a gold alias";
    switch (item.level) {
        case Level::unrelated:
            if (text::contains_normalized(item.text, triple.subject)) return "unrelated item mentions the subject";
            break;
        case Level::partially_related: {
            auto n = item.provenance.first_paragraph_length;
            if (n == 0 || n > item.text.size()) return "partially related item lacks a first paragraph";
            if (!text::contains_normalized(std::string_view(item.text).substr(0, n), triple.subject)) {
                return "first paragraph does not mention the subject";
            }
            break;
        }
        case Level::related: {
            DistractorPlan p;
            p.subj = triple.subject;
            p.subj_prime = item.provenance.subj_prime;
            p.obj_prime = item.provenance.obj_prime;
            if (auto bad = related_surface_violation(item.text, p, item.variant)) return *bad;
            break;
        }
        default: break;
    }
    return std::nullopt;
}

struct ForgeOutput {
    std::vector<DistractorPlan> plans;
    std::vector<InfoItem> items;
    std::vector<Exclusion> exclusions;
};

/// Plans every question single-threaded, then generates related variants
/// under bounded parallelism. `chat` may be null when related is not requested.
inline ForgeOutput forge_all(std::vector<QuestionContext> contexts, const corpus::PassageStore& store,
                             const corpus::Scorer& scorer, providers::ChatBackend* chat, const ForgeOptions& opts = {}) {
    std::sort(contexts.begin(), contexts.end(),
              [](const QuestionContext& a, const QuestionContext& b) { return a.triple.id < b.triple.id; });
    const auto in = ForgeInputs::build(store, scorer, contexts);
    const bool want_related = opts.levels.count(Level::related) > 0 && !opts.variants.empty();
    if (want_related && !chat) throw std::invalid_argument("related generation needs a chat backend");

    ForgeOutput out;
    auto exclude = [&](const std::string& qid, Level l, Variant v, std::string why) {
        out.exclusions.push_back({qid, l, v, std::move(why)});
    };
    for (const auto& ctx : contexts) {
        const auto& qid = ctx.triple.id;
        std::optional<InfoItem> unrelated;
        std::optional<InfoItem> partial;
        if (auto u = build_unrelated(ctx, in)) {
            unrelated = std::move(u.value);
        } else if (opts.levels.count(Level::unrelated)) {
            exclude(qid, Level::unrelated, Variant::none, u.reason);
        }
        if (auto p = build_partially_related(ctx, in, opts)) {
            partial = std::move(p.value);
        } else if (opts.levels.count(Level::partially_related)) {
            exclude(qid, Level::partially_related, Variant::none, p.reason);
        }
        if (unrelated && opts.levels.count(Level::unrelated)) out.items.push_back(*unrelated);
        if (partial && opts.levels.count(Level::partially_related)) out.items.push_back(*partial);
        if (auto g = build_gold(ctx, in)) {
            out.items.push_back(std::move(*g.value));
        } else {
            exclude(qid, Level::gold, Variant::none, g.reason);
        }
        out.plans.push_back(make_plan(ctx, unrelated, partial));
    }

    if (want_related) {
        std::vector<std::pair<std::size_t, Variant>> jobs;
        for (std::size_t i = 0; i < out.plans.size(); ++i) {
            if (!out.plans[i].complete()) {
                for (auto v : opts.variants) exclude(out.plans[i].question_id, Level::related, v, "no subj'/obj' pair found");
                continue;
            }
            for (auto v : opts.variants) jobs.emplace_back(i, v);
        }
        auto built = parallel_map(jobs, opts.max_inflight, [&](const std::pair<std::size_t, Variant>& job) {
            return generate_related(out.plans[job.first], job.second, *chat, scorer, opts);
        });
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (built[j]) {
                out.items.push_back(std::move(*built[j].value));
            } else {
                exclude(out.plans[jobs[j].first].question_id, Level::related, jobs[j].second, built[j].reason);
            }
        }
    }

    for (const auto& it : out.items) it.check_invariants();
    std::sort(out.items.begin(), out.items.end(), [](const InfoItem& a, const InfoItem& b) { return a.id < b.id; });
    std::sort(out.exclusions.begin(), out.exclusions.end(), [](const Exclusion& a, const Exclusion& b) {
        return std::tie(a.question_id, a.level, a.variant) < std::tie(b.question_id, b.level, b.variant);
    });
    return out;
}

struct VariantShare {
    Variant variant = Variant::none;
    std::size_t wins = 0;
    double proportion = 0.0;
};

struct QualityReport {
    std::vector<corpus::DistributionStats> levels;
    std::vector<VariantShare> shares;
    std::size_t questions_with_related = 0;

    const corpus::DistributionStats* level(const std::string& label) const {
        for (const auto& s : levels) {
            if (s.label == label) return &s;
        }
        return nullptr;
    }
};

inline constexpr const char* kTopPassageLabel = "wiki_top1";

/// Similarity distributions per level (related pooled over variants, plus one
/// row per variant), the top-1 retrieved passage per question, and how often
/// each variant is the best-scoring one.
inline QualityReport measure_quality(const std::vector<InfoItem>& items, const std::vector<QuestionContext>& contexts,
                                     const corpus::HistogramConfig& hist = {}) {
    std::vector<corpus::LabeledScore> scores;
    std::map<std::string, std::vector<const InfoItem*>> related_by_q;
    for (Level l : {Level::unrelated, Level::partially_related, Level::related}) {
        for (const auto& it : items) {
            if (it.level == l) scores.push_back({to_string(l), it.similarity});
        }
    }
    for (auto v : kRelatedVariants) {
        for (const auto& it : items) {
            if (it.level == Level::related && it.variant == v) {
                scores.push_back({std::string("related:") + to_string(v), it.similarity});
            }
        }
    }
    for (const auto& it : items) {
        if (it.level == Level::related) related_by_q[it.question_id].push_back(&it);
    }
    for (const auto& c : contexts) {
        if (!c.top.empty()) scores.push_back({kTopPassageLabel, c.top.front().score});
    }
    QualityReport r;
    if (!scores.empty()) r.levels = corpus::similarity_distribution(scores, hist);
    std::map<Variant, std::size_t> wins;
    for (const auto& [_, rel] : related_by_q) ++wins[pick_top_variant(rel).variant];
    r.questions_with_related = related_by_q.size();
    for (auto v : kRelatedVariants) {
        VariantShare s{v, wins[v], 0.0};
        if (r.questions_with_related > 0) {
            s.proportion = static_cast<double>(s.wins) / static_cast<double>(r.questions_with_related);
        }
        r.shares.push_back(s);
    }
    return r;
}

/// Distribution CSV followed by one `variant_share:<variant>` row per variant
/// (mean column = proportion, count column = wins).
inline void write_quality_csv(std::ostream& out, const QualityReport& r) {
    corpus::write_distribution_csv(out, r.levels);
    for (const auto& s : r.shares) {
        out << "variant_share:" << to_string(s.variant) << ',' << corpus::format_real(s.proportion) << ",,,,,,"
            << s.wins << '\n';
    }
}

}  // namespace irrbench::forge
