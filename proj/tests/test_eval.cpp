#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fixture_world.hpp"
#include "irrbench/metrics/metrics.hpp"
#include "irrbench/providers/transcript.hpp"

using namespace irrbench;
using forge::InfoItem;
using forge::Level;
using forge::Role;
using forge::Variant;
using harness::OptionKind;
using harness::Outcome;

// ---------------------------------------------------------------- memory

namespace {

dataset::QuestionRecord question(const std::string& text, std::vector<std::string> gold = {}) {
    return {"q1", text, "r", std::move(gold)};
}

}  // namespace

TEST(Memory, ElicitsAnswerAndBackground) {
    testkit::FnChat chat([](const providers::ChatRequest& r) -> std::string {
        EXPECT_TRUE(memory::is_closed_book(r.prompt_text));
        if (r.tag == "elicit") {
            return "Answer: New York.\nBackground: Julius Erving grew up in Roosevelt and attended school in East Meadow, "
                   "New York.";
        }
        if (r.tag == "elicit.reask") return "Answer: New York";
        return "Yes, it does.";
    });
    auto rec = memory::build_memory(question("In what city was Julius Erving born?", {"New York City"}), chat);
    EXPECT_EQ(rec.memory_answer, "New York");
    EXPECT_NE(rec.background_text.find("East Meadow"), std::string::npos);
    EXPECT_TRUE(rec.consistent);
    EXPECT_TRUE(rec.entailed);
    EXPECT_EQ(rec.entailment_path, memory::EntailmentPath::judge);
    EXPECT_TRUE(rec.usable);
    EXPECT_EQ(rec.reask_answers.size(), 2u);
}

TEST(Memory, ScriptedFoundingQuestion) {
    testkit::FnChat chat([](const providers::ChatRequest& r) -> std::string {
        if (r.tag == "elicit") {
            return "Answer: Axel Oxenstierna\nBackground: The castle was built for the chancellor Axel Oxenstierna.";
        }
        if (r.tag == "elicit.reask") return "Axel Oxenstierna.";
        return "yes";
    });
    auto rec = memory::build_memory(question("Who founded Åkerö Castle?", {"Carl Gustaf Tessin"}), chat);
    EXPECT_EQ(rec.memory_answer, "Axel Oxenstierna");
    EXPECT_TRUE(rec.usable);
}

TEST(Memory, MalformedElicitationIsUnusable) {
    testkit::FnChat chat([](const providers::ChatRequest&) -> std::string { return "I think it was somewhere north."; });
    auto rec = memory::build_memory(question("Q?"), chat);
    EXPECT_FALSE(rec.usable);
    EXPECT_EQ(rec.reason, "unparsable elicitation response");
    EXPECT_EQ(chat.calls.load(), 1);
}

TEST(Memory, ProviderErrorIsUnusable) {
    testkit::FnChat chat([](const providers::ChatRequest& r) -> std::string {
        if (r.tag == "elicit") return "Answer: X\nBackground: X is known.";
        throw providers::ProviderError(providers::ProviderErrorKind::quota, "exhausted");
    });
    auto rec = memory::build_memory(question("Q?"), chat);
    EXPECT_FALSE(rec.usable);
    EXPECT_NE(rec.reason.find("quota"), std::string::npos);
}

TEST(Memory, ConsistencyRules) {
    auto run = [](std::vector<std::string> replies, const std::string& first) {
        std::size_t i = 0;
        testkit::FnChat chat([&](const providers::ChatRequest&) { return replies[i++ % replies.size()]; });
        return memory::check_consistency(question("Q?"), first, chat, 2).consistent;
    };
    EXPECT_TRUE(run({"New York", "New York"}, "New York"));
    EXPECT_FALSE(run({"New York", "Philadelphia"}, "New York"));
    EXPECT_TRUE(run({"new york city", "Answer: New York City."}, "New York City"));
    EXPECT_TRUE(run({"New York City"}, "New York"));
    EXPECT_FALSE(run({"York"}, "Yorkshire"));
    EXPECT_TRUE(memory::answers_agree("the Beatles", "Beatles", {}));
    EXPECT_TRUE(memory::answers_agree("NYC", "New York City", {"New York City", "NYC"}));
}

TEST(Memory, ReaskPhrasingsRotate) {
    std::set<std::string> prompts;
    for (int i = 0; i < 3; ++i) prompts.insert(memory::render_reask_prompt("Q?", i));
    EXPECT_EQ(prompts.size(), 3u);
    EXPECT_EQ(memory::render_reask_prompt("Q?", 0), memory::render_reask_prompt("Q?", 3));
}

TEST(Memory, EntailmentFallbackAndJudge) {
    EXPECT_TRUE(memory::check_entailment("He was born in New York in 1950.", "New York").entailed);
    EXPECT_FALSE(memory::check_entailment("He was born in Boston in 1950.", "New York").entailed);
    EXPECT_THROW(memory::check_entailment(" ", "x"), std::invalid_argument);

    testkit::TempDir dir;
    testkit::FnChat live([](const providers::ChatRequest&) -> std::string { return "yes"; });
    {
        providers::Transcript t(providers::TranscriptMode::record, dir / "judge.jsonl");
        providers::RecordingProvider rec(t, &live, nullptr);
        memory::check_entailment("Some passage.", "Answer", memory::EntailmentMode::judge, &rec);
    }
    providers::Transcript t(providers::TranscriptMode::replay, dir / "judge.jsonl");
    providers::RecordingProvider replay(t, nullptr, nullptr);
    auto r = memory::check_entailment("Some passage.", "Answer", memory::EntailmentMode::judge, &replay);
    EXPECT_TRUE(r.entailed);
    EXPECT_EQ(r.path, memory::EntailmentPath::judge);

    testkit::FnChat vague([](const providers::ChatRequest&) -> std::string { return "Possibly."; });
    auto f = memory::check_entailment("Born in Boston.", "Boston", memory::EntailmentMode::judge, &vague);
    EXPECT_TRUE(f.entailed);
    EXPECT_TRUE(f.warning);
    EXPECT_EQ(f.path, memory::EntailmentPath::fallback);
}

TEST(Memory, FixtureMemories) {
    auto w = testkit::FixtureWorld::load();
    auto records = memory::build_memories(w.questions, *w.mock);
    ASSERT_EQ(records.size(), 30u);
    std::size_t usable = 0;
    for (const auto& r : records) usable += r.usable;
    EXPECT_EQ(usable, 26u);
}

// ---------------------------------------------------------------- forge

namespace {

struct ErvingWorld {
    corpus::PassageStore store;
    std::unique_ptr<corpus::Bm25Scorer> scorer;
    std::vector<forge::QuestionContext> contexts;

    static ErvingWorld make(std::vector<corpus::Passage> passages,
                            std::vector<std::pair<std::string, std::string>> triples = {
                                {"Julius Erving", "New York City"}, {"C. J. Bonaparte", "Baltimore"}}) {
        ErvingWorld w{corpus::PassageStore::ingest(std::move(passages)), nullptr, {}};
        w.scorer = std::make_unique<corpus::Bm25Scorer>(w.store);
        dataset::RelationshipConfig cfg{"place of birth", "In what city was [subj] born?", "[subj] was born in [objp]."};
        for (const auto& [s, o] : triples) {
            auto t = dataset::triple_from_json({{"subject", s}, {"relationship", "place of birth"}, {"object", o}});
            auto q = dataset::render_question(t, cfg);
            w.contexts.push_back({t, q, corpus::retrieve_top_k(q.text, 10, w.store, *w.scorer)});
        }
        return w;
    }
};

std::vector<corpus::Passage> erving_passages() {
    using corpus::PassageSource;
    return {
        {"e1", "Julius Erving", "Julius Erving, nicknamed Dr. J, was a star forward for Philadelphia and is remembered for his dunks.", PassageSource::wiki},
        {"e2", "Julius Erving", "Julius Erving was born in New York City and grew up in Roosevelt.", PassageSource::wiki},
        {"b1", "C. J. Bonaparte", "C. J. Bonaparte was born in Baltimore and later kept a townhouse near the harbor.", PassageSource::wiki},
        {"i1", "Baltimore", "Baltimore is the most populous city in the state of Maryland. It grew up around a deep harbor. Its port is old.", PassageSource::wiki_intro},
        {"i2", "New York City", "New York City is the most populous city in the United States. It has five boroughs.", PassageSource::wiki_intro},
    };
}

}  // namespace

TEST(Forge, UnrelatedPicksAnotherSubjectsPassage) {
    auto w = ErvingWorld::make(erving_passages());
    auto in = forge::ForgeInputs::build(w.store, *w.scorer, w.contexts);
    auto u = forge::build_unrelated(w.contexts[0], in);
    ASSERT_TRUE(u) << u.reason;
    EXPECT_EQ(u.value->provenance.source_passage_id, "b1");
    EXPECT_EQ(u.value->provenance.subj_prime, "C. J. Bonaparte");
    EXPECT_EQ(u.value->provenance.obj_prime, "Baltimore");
    EXPECT_FALSE(forge::level_violation(*u.value, w.contexts[0].triple));
}

TEST(Forge, UnrelatedTieGoesToLowerId) {
    auto ps = erving_passages();
    ps.push_back({"b0", "C. J. Bonaparte", ps[2].text, corpus::PassageSource::wiki});
    auto w = ErvingWorld::make(ps);
    auto in = forge::ForgeInputs::build(w.store, *w.scorer, w.contexts);
    auto u = forge::build_unrelated(w.contexts[0], in);
    ASSERT_TRUE(u);
    EXPECT_EQ(u.value->provenance.source_passage_id, "b0");
}

TEST(Forge, UnrelatedExcludedWhenEveryPassageNamesTheSubject) {
    auto w = ErvingWorld::make({{"x1", "", "Julius Erving met C. J. Bonaparte in Baltimore."},
                                {"x2", "", "Julius Erving played in Baltimore often."}});
    auto in = forge::ForgeInputs::build(w.store, *w.scorer, w.contexts);
    auto u = forge::build_unrelated(w.contexts[0], in);
    EXPECT_FALSE(u);
    EXPECT_FALSE(u.reason.empty());
}

TEST(Forge, PartiallyRelatedJoinsSubjectPassageAndIntro) {
    auto w = ErvingWorld::make(erving_passages());
    auto in = forge::ForgeInputs::build(w.store, *w.scorer, w.contexts);
    auto p = forge::build_partially_related(w.contexts[0], in);
    ASSERT_TRUE(p) << p.reason;
    const auto& item = *p.value;
    EXPECT_EQ(item.provenance.source_passage_id, "e1");
    EXPECT_EQ(item.provenance.obj_prime, "Baltimore");
    const auto p2 = item.text.substr(item.provenance.first_paragraph_length + 2);
    EXPECT_EQ(p2.rfind("Baltimore is the most populous city", 0), 0u) << p2;
    EXPECT_EQ(p2, "Baltimore is the most populous city in the state of Maryland. It grew up around a deep harbor.");
    EXPECT_FALSE(text::contains_normalized(item.text, "New York City"));
    EXPECT_FALSE(forge::level_violation(item, w.contexts[0].triple));
}

TEST(Forge, PartiallyRelatedExclusions) {
    // No top passage names the subject.
    auto w = ErvingWorld::make(erving_passages());
    auto ctx = w.contexts[0];
    std::erase_if(ctx.top, [&](const corpus::ScoredPassage& sp) {
        return text::contains_normalized(w.store.find(sp.passage_id)->text, "Julius Erving");
    });
    auto in = forge::ForgeInputs::build(w.store, *w.scorer, w.contexts);
    EXPECT_FALSE(forge::build_partially_related(ctx, in));

    // Every candidate obj' is a gold alias.
    auto g = ErvingWorld::make({{"e1", "", "Julius Erving starred for Philadelphia."},
                                {"b1", "", "C. J. Bonaparte was born in New York City."},
                                {"i2", "New York City", "New York City is large.", corpus::PassageSource::wiki_intro}},
                               {{"Julius Erving", "New York City"}, {"C. J. Bonaparte", "New York City"}});
    auto gin = forge::ForgeInputs::build(g.store, *g.scorer, g.contexts);
    auto r = forge::build_partially_related(g.contexts[0], gin);
    EXPECT_FALSE(r);
}

TEST(Forge, RelatedGenerationAndNullContract) {
    auto w = ErvingWorld::make(erving_passages());
    forge::DistractorPlan plan;
    plan.question_id = "q";
    plan.subj = "Julius Erving";
    plan.relationship = "place of birth";
    plan.question_text = "In what city was Julius Erving born?";
    plan.obj_aliases = {"New York City"};
    plan.subj_prime = "C. J. Bonaparte";
    plan.obj_prime = "Baltimore";
    testkit::FnChat chat([](const providers::ChatRequest& r) -> std::string {
        EXPECT_EQ(r.tag, "forge.related");
        if (r.prompt_text.find("Style: misleading_linkage") != std::string::npos) {
            return "Julius Erving once scored forty points in an exhibition in Baltimore.";
        }
        if (r.prompt_text.find("Style: common_characteristics") != std::string::npos) {
            return "Julius Erving and C. J. Bonaparte both loved long walks; Bonaparte was born in Baltimore.";
        }
        return "null";
    });
    auto link = forge::generate_related(plan, Variant::misleading_linkage, chat, *w.scorer);
    ASSERT_TRUE(link) << link.reason;
    EXPECT_EQ(link.value->id, "q:related:misleading_linkage");
    auto common = forge::generate_related(plan, Variant::common_characteristics, chat, *w.scorer);
    ASSERT_TRUE(common) << common.reason;
    EXPECT_GT(common.value->similarity, 0.0);
    auto anecdote = forge::generate_related(plan, Variant::fictional_anecdotes, chat, *w.scorer);
    EXPECT_FALSE(anecdote);
    EXPECT_EQ(anecdote.reason, "generator declined (null)");

    testkit::FnChat leaky([](const providers::ChatRequest&) -> std::string {
        return "Julius Erving visited Baltimore after leaving New York City.";
    });
    EXPECT_FALSE(forge::generate_related(plan, Variant::misleading_linkage, leaky, *w.scorer));
    EXPECT_TRUE(forge::is_null_response(" \"NULL.\" "));
    EXPECT_FALSE(forge::is_null_response("nullify"));
}

TEST(Forge, PickTopVariant) {
    auto mk = [](Variant v, double s) {
        InfoItem it;
        it.id = std::string("q:related:") + forge::to_string(v);
        it.level = Level::related;
        it.variant = v;
        it.similarity = s;
        return it;
    };
    std::vector<InfoItem> three{mk(Variant::misleading_linkage, 0.3), mk(Variant::common_characteristics, 0.5),
                                mk(Variant::fictional_anecdotes, 0.4)};
    EXPECT_EQ(forge::pick_top_variant(three).variant, Variant::common_characteristics);
    EXPECT_EQ(forge::pick_top_variant(std::vector<InfoItem>{three[2]}).variant, Variant::fictional_anecdotes);
    std::vector<InfoItem> tie{mk(Variant::misleading_linkage, 0.5), mk(Variant::common_characteristics, 0.1),
                              mk(Variant::fictional_anecdotes, 0.5)};
    EXPECT_EQ(forge::pick_top_variant(tie).variant, Variant::misleading_linkage);
    EXPECT_THROW(forge::pick_top_variant(std::vector<InfoItem>{}), std::invalid_argument);
}

TEST(Forge, QualitySharesAndOmittedQuestions) {
    auto mk = [](const std::string& q, Variant v, double s) {
        InfoItem it;
        it.id = q + ":related:" + forge::to_string(v);
        it.question_id = q;
        it.level = Level::related;
        it.variant = v;
        it.similarity = s;
        it.text = "x";
        return it;
    };
    std::vector<InfoItem> items{
        mk("a", Variant::misleading_linkage, 3), mk("a", Variant::common_characteristics, 1), mk("a", Variant::fictional_anecdotes, 1),
        mk("b", Variant::misleading_linkage, 1), mk("b", Variant::common_characteristics, 3), mk("b", Variant::fictional_anecdotes, 1),
        mk("c", Variant::misleading_linkage, 1), mk("c", Variant::common_characteristics, 1), mk("c", Variant::fictional_anecdotes, 3),
    };
    auto r = forge::measure_quality(items, {});
    EXPECT_EQ(r.questions_with_related, 3u);
    for (const auto& s : r.shares) EXPECT_DOUBLE_EQ(s.proportion, 1.0 / 3.0);
    auto empty = forge::measure_quality({}, {});
    EXPECT_EQ(empty.questions_with_related, 0u);
}

TEST(Forge, FixtureItemsSatisfyLevelRules) {
    auto w = testkit::FixtureWorld::load();
    auto out = forge::forge_all(w.contexts, w.store, *w.scorer, w.mock.get());
    std::map<std::string, dataset::FactTriple> by_id;
    for (const auto& t : w.triples) by_id[t.id] = t;
    std::size_t irrelevant = 0;
    for (const auto& it : out.items) {
        if (it.role != Role::irrelevant) continue;
        ++irrelevant;
        auto bad = forge::level_violation(it, by_id.at(it.question_id));
        EXPECT_FALSE(bad) << it.id << ": " << bad.value_or("");
    }
    EXPECT_GT(irrelevant, 100u);
    EXPECT_EQ(out.exclusions.size(), 2u);
    auto again = forge::forge_all(w.contexts, w.store, *w.scorer, w.mock.get());
    ASSERT_EQ(again.items.size(), out.items.size());
    for (std::size_t i = 0; i < out.items.size(); ++i) EXPECT_EQ(forge::to_json(again.items[i]), forge::to_json(out.items[i]));
}

TEST(Forge, FixtureQualityOrdering) {
    auto w = testkit::FixtureWorld::load();
    auto out = forge::forge_all(w.contexts, w.store, *w.scorer, w.mock.get());
    auto q = forge::measure_quality(out.items, w.contexts);
    const double u = q.level("unrelated")->mean;
    const double p = q.level("partially_related")->mean;
    const double r = q.level("related")->mean;
    EXPECT_LT(u, p);
    EXPECT_LT(p, r);
    EXPECT_LE(std::abs(r - q.level(forge::kTopPassageLabel)->mean) / q.level(forge::kTopPassageLabel)->mean, 0.10);
}

TEST(Forge, ItemJsonRoundTrip) {
    InfoItem it;
    it.id = forge::item_id("q", Level::partially_related);
    it.question_id = "q";
    it.level = Level::partially_related;
    it.text = "a\n\nb";
    it.similarity = 1.25;
    it.provenance = {"s", "o", "p1", "p2", 1};
    EXPECT_EQ(forge::to_json(forge::info_item_from_json(forge::to_json(it))), forge::to_json(it));
    InfoItem bad = it;
    bad.variant = Variant::fictional_anecdotes;
    EXPECT_THROW(bad.check_invariants(), std::logic_error);
}

// ---------------------------------------------------------------- harness

namespace {

harness::OptionSet the_man_options() {
    harness::OptionSet s;
    s.options = {{'A', "The screenwriter for The Man was Jim Piddock.", OptionKind::memory, "Jim Piddock"},
                 {'B', harness::kUncertainOption, OptionKind::uncertain, ""},
                 {'C', "Gore Vidal is the screenwriter for The Man.", OptionKind::irrelevant, "Gore Vidal"}};
    return s;
}

memory::MemoryRecord usable_memory(const std::string& qid, const std::string& answer) {
    memory::MemoryRecord m;
    m.question_id = qid;
    m.memory_answer = answer;
    m.background_text = "Background mentioning " + answer + ".";
    m.consistent = m.entailed = true;
    m.settle();
    return m;
}

InfoItem item(const std::string& qid, Level l, Variant v, double sim, const std::string& text) {
    InfoItem it;
    it.id = forge::item_id(qid, l, v);
    it.question_id = qid;
    it.level = l;
    it.variant = v;
    it.role = forge::role_for(l);
    it.similarity = sim;
    it.text = text;
    it.provenance.subj_prime = "Other";
    it.provenance.obj_prime = "Elsewhere";
    return it;
}

harness::ItemCatalog full_catalog(const std::string& qid) {
    harness::ItemCatalog c;
    c.add(item(qid, Level::unrelated, Variant::none, 1, "u"));
    c.add(item(qid, Level::partially_related, Variant::none, 2, "p"));
    c.add(item(qid, Level::related, Variant::misleading_linkage, 3, "r1"));
    c.add(item(qid, Level::related, Variant::common_characteristics, 5, "r2"));
    c.add(item(qid, Level::related, Variant::fictional_anecdotes, 4, "r3"));
    c.add(item(qid, Level::gold, Variant::none, 6, "g"));
    c.add(harness::memory_item(usable_memory(qid, "Home")));
    return c;
}

std::map<Role, int> roles(const harness::ItemCatalog& c, const std::vector<std::string>& ids) {
    std::map<Role, int> out;
    for (const auto& id : ids) ++out[c.at(id).role];
    return out;
}

}  // namespace

TEST(Harness, MakeOptions) {
    dataset::RelationshipConfig cfg{"place of birth", "In what city was [subj] born?", "[subj] was born in [objp]."};
    auto mem = usable_memory("q", "New York");
    auto s = harness::make_options(mem, "Julius Erving", "Baltimore", cfg, std::nullopt, 7);
    ASSERT_EQ(s.options.size(), 3u);
    EXPECT_EQ(s.by_kind(OptionKind::irrelevant)->text, "Julius Erving was born in Baltimore.");
    EXPECT_EQ(s.by_kind(OptionKind::uncertain)->text, "I'm not sure.");
    EXPECT_EQ(s.by_kind(OptionKind::memory)->text, "Julius Erving was born in New York.");
    auto again = harness::make_options(mem, "Julius Erving", "Baltimore", cfg, std::nullopt, 7);
    EXPECT_EQ(harness::to_json(s), harness::to_json(again));
    for (std::size_t i = 0; i < s.options.size(); ++i) EXPECT_EQ(s.options[i].letter, 'A' + static_cast<int>(i));

    dataset::RelationshipConfig founded{"founded by", "Who founded [subj]?", "[subj] was founded by [objp]."};
    auto castle = usable_memory("c", "Åkerö Castle was founded by the Swedish nobleman and statesman, Axel Oxenstierna.");
    auto mixed = harness::make_options(castle, "Åkerö Castle", "Carl Gustaf Wrangel", founded,
                                       harness::GoldAnswer{"Åkerö Castle was founded by Carl Gustaf Tessin.", "Carl Gustaf Tessin"},
                                       3, {"Carl Gustaf Tessin"});
    ASSERT_EQ(mixed.options.size(), 4u);
    EXPECT_EQ(mixed.by_kind(OptionKind::gold)->text, "Åkerö Castle was founded by Carl Gustaf Tessin.");
    EXPECT_EQ(mixed.by_kind(OptionKind::memory)->text, castle.memory_answer);

    auto agrees = harness::make_options(usable_memory("q", "Tessin"), "Åkerö Castle", "Carl Gustaf Wrangel", founded,
                                        harness::GoldAnswer{"x", "Carl Gustaf Tessin"}, 3);
    EXPECT_EQ(agrees.options.size(), 3u);
    memory::MemoryRecord unusable;
    EXPECT_THROW(harness::make_options(unusable, "s", "o", cfg, std::nullopt, 1), std::invalid_argument);
}

TEST(Harness, ShuffleFairnessOverSeeds) {
    std::map<std::string, int> counts;
    const int n = 10000;
    for (int seed = 0; seed < n; ++seed) {
        std::vector<char> v{'m', 'i', 'u'};
        seeded_shuffle(v, static_cast<std::uint64_t>(seed));
        ++counts[std::string(v.begin(), v.end())];
    }
    ASSERT_EQ(counts.size(), 6u);
    double chi = 0;
    for (const auto& [_, c] : counts) {
        EXPECT_NEAR(static_cast<double>(c) / n, 1.0 / 6.0, 0.02);
        const double e = n / 6.0;
        chi += (c - e) * (c - e) / e;
    }
    EXPECT_LT(chi, 15.086);
}

TEST(Harness, BundleComposition) {
    auto c = full_catalog("q");
    auto b31 = harness::assemble_bundle("q", harness::Condition::parse("3:1"), c, 1);
    ASSERT_TRUE(b31);
    EXPECT_EQ(b31.value->size(), 4u);
    EXPECT_EQ(roles(c, *b31.value)[Role::relevant], 1);
    auto mixed = harness::assemble_bundle("q", harness::Condition::parse("mixed_5_2"), c, 1);
    ASSERT_TRUE(mixed);
    EXPECT_EQ(mixed.value->size(), 7u);
    EXPECT_EQ(roles(c, *mixed.value)[Role::irrelevant], 5);
    EXPECT_EQ(roles(c, *mixed.value)[Role::relevant], 2);
    std::map<Level, int> levels;
    for (const auto& id : *mixed.value) ++levels[c.at(id).level];
    EXPECT_EQ(levels[Level::unrelated], 1);
    EXPECT_EQ(levels[Level::partially_related], 1);
    EXPECT_EQ(levels[Level::related], 3);
    auto u = harness::assemble_bundle("q", harness::Condition::parse("unrelated"), c, 1);
    ASSERT_TRUE(u);
    EXPECT_EQ(*u.value, std::vector<std::string>{"q:unrelated"});
    auto top = harness::assemble_bundle("q", harness::Condition::parse("1:0"), c, 1);
    EXPECT_EQ(*top.value, std::vector<std::string>{"q:related:common_characteristics"});
    auto one_one = harness::assemble_bundle("q", harness::Condition::parse("1:1"), c, 1);
    EXPECT_EQ(one_one.value->size(), 2u);

    harness::ItemCatalog sparse;
    sparse.add(item("q", Level::related, Variant::misleading_linkage, 1, "r"));
    auto missing = harness::assemble_bundle("q", harness::Condition::parse("3:1"), sparse, 1);
    EXPECT_FALSE(missing);
    EXPECT_EQ(missing.reason, "fewer than 3 related items");
}

TEST(Harness, BundleOrderIsASeededShuffle) {
    auto c = full_catalog("q");
    auto cond = harness::Condition::parse("mixed_5_2");
    std::set<std::vector<std::string>> orders;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto a = harness::assemble_bundle("q", cond, c, seed);
        EXPECT_EQ(*a.value, *harness::assemble_bundle("q", cond, c, seed).value);
        orders.insert(*a.value);
    }
    EXPECT_GT(orders.size(), 20u);
}

TEST(Harness, ConditionAndMitigationParsing) {
    EXPECT_EQ(harness::Condition::parse("2:1").label(), "2:1");
    EXPECT_EQ(harness::Condition::parse("partially_related").label(), "partially_related");
    EXPECT_THROW(harness::Condition::parse("4:1"), std::invalid_argument);
    EXPECT_THROW(harness::Condition::parse("3:2"), std::invalid_argument);
    EXPECT_THROW(harness::Condition::parse("gold"), std::invalid_argument);
    auto m = harness::Mitigation::parse("cot+instr+icl");
    EXPECT_TRUE(m.cot && m.ignore_instr && m.icl);
    EXPECT_EQ(m.label(), "cot+instr+icl");
    EXPECT_EQ(harness::Mitigation::parse("vanilla").label(), "vanilla");
    EXPECT_THROW(harness::Mitigation::parse("cot+magic"), std::invalid_argument);
}

namespace {

harness::TrialSpec the_man_spec(harness::Format f, harness::Mitigation m = {}) {
    harness::TrialSpec s;
    s.trial_id = "t";
    s.question_id = "q";
    s.question_text = "Who was the screenwriter for The Man?";
    s.format = f;
    s.mitigation = m;
    s.bundle = {"q:related:common_characteristics", "q:memory"};
    s.options = the_man_options();
    s.statement = s.options.by_kind(OptionKind::irrelevant)->text;
    return s;
}

}  // namespace

TEST(Harness, MultipleChoicePromptLayout) {
    auto c = full_catalog("q");
    auto prompt = harness::render_prompt(the_man_spec(harness::Format::multiple_choice), c);
    EXPECT_EQ(prompt,
              "According to the given information and your knowledge, choose the best choice from the following options.\n"
              "Information:\n"
              "1. r2\n"
              "2. Background mentioning Home.\n"
              "Question:\n"
              "Who was the screenwriter for The Man?\n"
              "Options:\n"
              "A. The screenwriter for The Man was Jim Piddock.\n"
              "B. I'm not sure.\n"
              "C. Gore Vidal is the screenwriter for The Man.\n"
              "Answer:\n");
}

TEST(Harness, MitigationPlacement) {
    auto c = full_catalog("q");
    auto cot = harness::render_prompt(the_man_spec(harness::Format::multiple_choice, {true, false, false}), c);
    EXPECT_EQ(cot.substr(cot.size() - std::string("Answer:\nLet's think step by step.\n").size()),
              "Answer:\nLet's think step by step.\n");
    auto full = harness::render_prompt(the_man_spec(harness::Format::multiple_choice, {false, true, true}), c,
                                       "Example block\nLabel: Relevant");
    EXPECT_EQ(full.rfind("According to the given information and your knowledge, choose the best choice from the "
                         "following options. Feel free to ignore irrelevant information.\nExample block\nLabel: "
                         "Relevant\nInformation:\n",
                         0),
              0u);
    EXPECT_THROW(harness::render_prompt(the_man_spec(harness::Format::multiple_choice, {false, false, true}), c),
                 std::invalid_argument);
}

TEST(Harness, FormatIsolation) {
    auto c = full_catalog("q");
    auto spec = the_man_spec(harness::Format::free_form);
    auto ff = harness::render_prompt(spec, c);
    for (const auto& o : spec.options.options) EXPECT_EQ(ff.find(o.text), std::string::npos) << o.text;
    EXPECT_NE(ff.find("answer the question."), std::string::npos);

    auto bspec = the_man_spec(harness::Format::boolean);
    auto b = harness::render_prompt(bspec, c);
    EXPECT_NE(b.find("Statement:\nGore Vidal is the screenwriter for The Man.\nIs the statement true or false?"),
              std::string::npos);
    EXPECT_EQ(b.find("Options:"), std::string::npos);
    EXPECT_EQ(b.find("Jim Piddock"), std::string::npos);
    EXPECT_EQ(b.find(harness::kUncertainOption), std::string::npos);
}

TEST(Harness, ParseMultipleChoice) {
    auto o = the_man_options();
    EXPECT_EQ(harness::parse_mc("C. Gore Vidal is the screenwriter for The Man.", o).outcome, Outcome::misrepresented);
    EXPECT_EQ(harness::parse_mc("B. I'm not sure.", o).outcome, Outcome::uncertain);
    EXPECT_EQ(harness::parse_mc("A", o).outcome, Outcome::kept_memory);
    EXPECT_EQ(harness::parse_mc("(C)", o).outcome, Outcome::misrepresented);
    EXPECT_EQ(harness::parse_mc("Reasoning first. Therefore, the answer is A.", o).outcome, Outcome::kept_memory);
    EXPECT_EQ(harness::parse_mc("Gore Vidal is the screenwriter for The Man.", o).outcome, Outcome::misrepresented);
    EXPECT_EQ(harness::parse_mc("Either The screenwriter for The Man was Jim Piddock or Gore Vidal is the screenwriter "
                                "for The Man.",
                                o)
                  .outcome,
              Outcome::unparsed);
    EXPECT_EQ(harness::parse_mc("A new film by someone else.", o).outcome, Outcome::unparsed);
    EXPECT_EQ(harness::parse_mc("", o).outcome, Outcome::unparsed);
    EXPECT_EQ(harness::parse_mc("D.", o).outcome, Outcome::unparsed);
}

TEST(Harness, ParseBoolean) {
    EXPECT_EQ(harness::parse_boolean("There is not enough information to determine the veracity of the statement."),
              Outcome::uncertain);
    EXPECT_EQ(harness::parse_boolean("True."), Outcome::misrepresented);
    EXPECT_EQ(harness::parse_boolean("The statement is false."), Outcome::kept_memory);
    EXPECT_EQ(harness::parse_boolean("This is not true."), Outcome::kept_memory);
    EXPECT_EQ(harness::parse_boolean("I can’t determine that."), Outcome::uncertain);
    EXPECT_EQ(harness::parse_boolean("Maybe."), Outcome::unparsed);
    EXPECT_EQ(harness::parse_boolean("True, although some would call it false."), Outcome::misrepresented);
}

TEST(Harness, FreeFormAlignment) {
    auto o = the_man_options();
    auto pre = harness::align_free_form("Jim Piddock was the screenwriter for The Man.", "Q", o, nullptr);
    EXPECT_EQ(pre.outcome, Outcome::kept_memory);
    EXPECT_EQ(pre.via, "containment");
    testkit::FnChat none([](const providers::ChatRequest& r) -> std::string {
        EXPECT_EQ(r.tag, "eval.align");
        return "none";
    });
    EXPECT_EQ(harness::align_free_form("It was a studio committee.", "Q", o, &none).outcome, Outcome::unparsed);
    testkit::FnChat failing([](const providers::ChatRequest&) -> std::string {
        throw providers::ProviderError(providers::ProviderErrorKind::network, "down");
    });
    auto err = harness::align_free_form("It was a studio committee.", "Q", o, &failing);
    EXPECT_EQ(err.outcome, Outcome::unparsed);
    EXPECT_EQ(err.via.rfind("aligner-error", 0), 0u);
    EXPECT_EQ(harness::align_free_form("I'm not sure who wrote it.", "Q", o, &none).outcome, Outcome::uncertain);
}

TEST(Harness, AlignerReplayReturnsRecordedLetter) {
    auto o = the_man_options();
    testkit::TempDir dir;
    testkit::FnChat live([](const providers::ChatRequest&) -> std::string { return "B"; });
    {
        providers::Transcript t(providers::TranscriptMode::record, dir / "align.jsonl");
        providers::RecordingProvider rec(t, &live, nullptr);
        harness::align_free_form("Hard to say.", "Q", o, &rec);
    }
    providers::Transcript t(providers::TranscriptMode::replay, dir / "align.jsonl");
    providers::RecordingProvider replay(t, nullptr, nullptr);
    auto a = harness::align_free_form("Hard to say.", "Q", o, &replay);
    EXPECT_EQ(a.outcome, Outcome::uncertain);
    EXPECT_EQ(a.via, "aligner");
}

TEST(Harness, RunConditionSortsAndRecordsProviderErrors) {
    auto c = full_catalog("q");
    std::vector<harness::TrialSpec> specs;
    for (int i = 9; i >= 0; --i) {
        auto s = the_man_spec(harness::Format::multiple_choice);
        s.trial_id = "t" + std::to_string(i);
        specs.push_back(s);
    }
    testkit::FnChat chat([](const providers::ChatRequest& r) -> std::string {
        if (r.prompt_text.empty()) return "";
        static std::atomic<int> n{0};
        if (++n == 3) throw providers::ProviderError(providers::ProviderErrorKind::timeout, "slow");
        return "C";
    });
    harness::RunOptions opts;
    opts.max_inflight = 3;
    auto results = harness::run_condition(specs, c, chat, nullptr, opts);
    ASSERT_EQ(results.size(), 10u);
    int unparsed = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        EXPECT_EQ(results[i].trial_id, "t" + std::to_string(i));
        if (results[i].outcome == Outcome::unparsed) {
            ++unparsed;
            EXPECT_NE(results[i].note.find("provider error"), std::string::npos);
        } else {
            EXPECT_EQ(results[i].outcome, Outcome::misrepresented);
        }
    }
    EXPECT_EQ(unparsed, 1);
}

TEST(Harness, FixturePlanRespectsInvariants) {
    auto w = testkit::FixtureWorld::load();
    auto out = forge::forge_all(w.contexts, w.store, *w.scorer, w.mock.get());
    auto memories = memory::build_memories(w.questions, *w.mock);
    harness::ItemCatalog catalog;
    for (const auto& it : out.items) catalog.add(it);
    std::map<std::string, const memory::MemoryRecord*> mem_by_q;
    for (const auto& m : memories) {
        mem_by_q[m.question_id] = &m;
        if (m.usable) catalog.add(harness::memory_item(m));
    }
    std::vector<harness::QuestionPlanInput> inputs;
    for (const auto& ctx : w.contexts) inputs.push_back({ctx.triple, ctx.question, mem_by_q.at(ctx.triple.id)});
    harness::PlanConfig cfg;
    for (const auto* c : {"unrelated", "partially_related", "related", "1:0", "3:0", "1:1", "3:1", "mixed_5_2"}) {
        cfg.conditions.push_back(harness::Condition::parse(c));
    }
    cfg.conditions.erase(cfg.conditions.begin());
    cfg.formats = {harness::Format::multiple_choice, harness::Format::boolean, harness::Format::free_form};
    cfg.seed = 3;
    auto plan = harness::plan_trials(inputs, catalog, w.relationships, cfg);
    EXPECT_EQ(plan.specs.size() + plan.skipped.size(), 30u * 8u * 3u);
    EXPECT_GT(plan.specs.size(), 400u);
    for (const auto& s : plan.specs) {
        const auto& opts = s.options.options;
        int unc = 0, mem = 0, irr = 0, gold = 0;
        for (const auto& o : opts) {
            unc += o.kind == OptionKind::uncertain;
            mem += o.kind == OptionKind::memory;
            irr += o.kind == OptionKind::irrelevant;
            gold += o.kind == OptionKind::gold;
        }
        EXPECT_EQ(unc, 1);
        EXPECT_EQ(mem, 1);
        EXPECT_EQ(irr, 1);
        EXPECT_EQ(s.options.by_kind(OptionKind::uncertain)->text, "I'm not sure.");
        if (s.condition.kind != harness::Condition::Kind::mixed) EXPECT_EQ(gold, 0) << s.trial_id;
        auto r = roles(catalog, s.bundle);
        switch (s.condition.kind) {
            case harness::Condition::Kind::level: EXPECT_EQ(s.bundle.size(), 1u); break;
            case harness::Condition::Kind::ratio:
                EXPECT_EQ(r[Role::irrelevant], s.condition.irrelevant);
                EXPECT_EQ(r[Role::relevant], s.condition.relevant);
                break;
            case harness::Condition::Kind::mixed:
                EXPECT_EQ(r[Role::irrelevant], 5);
                EXPECT_EQ(r[Role::relevant], 2);
                break;
        }
        EXPECT_EQ(harness::trial_spec_from_json(harness::to_json(s)).trial_id, s.trial_id);
    }
}

// ---------------------------------------------------------------- metrics

namespace {

std::vector<harness::TrialResult> synthetic_log(std::size_t n, std::size_t mis, std::size_t unc, std::uint64_t seed) {
    std::vector<harness::TrialResult> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].trial_id = "t" + std::to_string(i);
        out[i].condition = "3:1";
        out[i].format = "multiple_choice";
        out[i].mitigation = "vanilla";
        out[i].outcome = i < mis ? Outcome::misrepresented : i < mis + unc ? Outcome::uncertain : Outcome::kept_memory;
    }
    seeded_shuffle(out, seed);
    return out;
}

}  // namespace

TEST(Metrics, RatioExamples) {
    auto log = synthetic_log(200, 11, 145, 1);
    EXPECT_NEAR(metrics::misrepresentation_ratio(log), 0.055, 1e-12);
    EXPECT_NEAR(metrics::uncertainty_ratio(log), 0.725, 1e-12);
    EXPECT_EQ(metrics::misrepresentation_ratio(synthetic_log(10, 0, 3, 1)), 0.0);
    EXPECT_EQ(metrics::misrepresentation_ratio(synthetic_log(10, 10, 0, 1)), 1.0);
    EXPECT_EQ(metrics::uncertainty_ratio(synthetic_log(10, 4, 0, 1)), 0.0);
    EXPECT_THROW(metrics::misrepresentation_ratio({}), std::invalid_argument);
}

TEST(Metrics, PartitionAndScaleInvariance) {
    std::mt19937_64 gen(17);
    const std::vector<std::string> conds{"unrelated", "related", "3:1"};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<harness::TrialResult> log;
        const auto n = 1 + gen() % 300;
        for (std::size_t i = 0; i < n; ++i) {
            harness::TrialResult r;
            r.trial_id = std::to_string(i);
            r.condition = conds[gen() % conds.size()];
            r.format = "boolean";
            r.mitigation = "vanilla";
            r.outcome = static_cast<Outcome>(gen() % 5);
            log.push_back(r);
        }
        auto reports = metrics::aggregate(log);
        std::size_t total = 0;
        for (const auto& rep : reports) {
            total += rep.n_total;
            EXPECT_EQ(rep.n_misrepresented + rep.n_uncertain + rep.n_kept + rep.n_gold + rep.n_unparsed, rep.n_total);
            std::vector<harness::TrialResult> group;
            for (const auto& r : log) {
                if (r.condition == rep.key.condition) group.push_back(r);
            }
            EXPECT_EQ(rep.n_total, group.size());
            EXPECT_DOUBLE_EQ(rep.mr, metrics::misrepresentation_ratio(group));
        }
        EXPECT_EQ(total, log.size());
        auto doubled = log;
        doubled.insert(doubled.end(), log.begin(), log.end());
        EXPECT_NEAR(metrics::misrepresentation_ratio(doubled), metrics::misrepresentation_ratio(log), 1e-15);
        EXPECT_NEAR(metrics::uncertainty_ratio(doubled), metrics::uncertainty_ratio(log), 1e-15);
    }
}

TEST(Metrics, PercentRounding) {
    EXPECT_EQ(metrics::percent_1dp(11, 200), "5.5");
    EXPECT_EQ(metrics::percent_1dp(145, 200), "72.5");
    EXPECT_EQ(metrics::percent_1dp(1, 3), "33.3");
    EXPECT_EQ(metrics::percent_1dp(2, 3), "66.7");
    EXPECT_EQ(metrics::percent_1dp(1, 16), "6.3");
    EXPECT_EQ(metrics::percent_1dp(0, 7), "0.0");
    EXPECT_EQ(metrics::percent_1dp(7, 7), "100.0");
}

TEST(Metrics, EmitReport) {
    auto reports = metrics::aggregate(synthetic_log(200, 11, 145, 2));
    auto csv = metrics::emit_report(reports, metrics::ReportFormat::csv);
    EXPECT_EQ(csv,
              "condition,format,mitigation,n_total,n_misrepresented,n_uncertain,n_kept,n_unparsed,mr,ur\n"
              "3:1,multiple_choice,vanilla,200,11,145,44,0,5.5,72.5\n");
    EXPECT_EQ(csv, metrics::emit_report(reports, metrics::ReportFormat::csv));
    auto md = metrics::emit_report(reports, metrics::ReportFormat::markdown, "run-x");
    EXPECT_EQ(md.rfind("<!-- run_id: run-x -->\n| Condition |", 0), 0u);
    EXPECT_NE(md.find("| 3:1 | multiple_choice | vanilla | 5.5 | 72.5 | 200 | 44 | 0 |"), std::string::npos);
    auto j = json::parse(metrics::emit_report(reports, metrics::ReportFormat::json, "run-x"));
    EXPECT_EQ(j["run_id"], "run-x");
    EXPECT_EQ(j["reports"][0]["mr"], "5.5");
    EXPECT_FALSE(j["reports"][0].contains("model"));
    EXPECT_FALSE(j["reports"][0].contains("n_gold"));
    EXPECT_THROW(metrics::emit_report({}, metrics::ReportFormat::csv), std::invalid_argument);

    auto with_model = synthetic_log(4, 1, 1, 3);
    for (auto& r : with_model) r.model = "m, \"quoted\"";
    with_model[0].outcome = Outcome::gold;
    auto csv2 = metrics::emit_report(metrics::aggregate(with_model), metrics::ReportFormat::csv);
    EXPECT_EQ(csv2.rfind("model,condition,", 0), 0u);
    EXPECT_NE(csv2.find("\"m, \"\"quoted\"\"\""), std::string::npos);
    EXPECT_NE(csv2.find("n_gold"), std::string::npos);
}

TEST(Metrics, TallyFromJsonlMatchesBruteForce) {
    testkit::TempDir dir;
    auto log = synthetic_log(120, 17, 40, 4);
    log[5].outcome = Outcome::unparsed;
    std::vector<json> rows;
    for (const auto& r : log) rows.push_back(harness::to_json(r));
    write_jsonl(dir / "results.jsonl", rows);
    auto loaded = metrics::load_results(dir / "results.jsonl");
    std::size_t mis = 0, unc = 0, lines = 0;
    std::ifstream in(dir / "results.jsonl");
    for (std::string line; std::getline(in, line);) {
        ++lines;
        mis += line.find("\"outcome\":\"misrepresented\"") != std::string::npos;
        unc += line.find("\"outcome\":\"uncertain\"") != std::string::npos;
    }
    EXPECT_DOUBLE_EQ(metrics::misrepresentation_ratio(loaded), static_cast<double>(mis) / static_cast<double>(lines));
    EXPECT_DOUBLE_EQ(metrics::uncertainty_ratio(loaded), static_cast<double>(unc) / static_cast<double>(lines));
}
