// Smallest end-to-end use of the library: rank passages for a question,
// build a partially related distractor, render a multiple-choice trial and
// score a canned response. No provider calls are made.

#include <iostream>

#include "irrbench/corpus/retrieval.hpp"
#include "irrbench/forge/forge.hpp"
#include "irrbench/harness/harness.hpp"

using namespace irrbench;

int main() {
    auto store = corpus::PassageStore::ingest({
        {"e1", "Julius Erving", "Julius Erving, nicknamed Dr. J, starred for Philadelphia.", corpus::PassageSource::wiki},
        {"b1", "C. J. Bonaparte", "C. J. Bonaparte was born in Baltimore.", corpus::PassageSource::wiki},
        {"i1", "Baltimore", "Baltimore is a port city in Maryland. It sits on the Patapsco River.",
         corpus::PassageSource::wiki_intro},
    });
    corpus::Bm25Scorer scorer(store);

    dataset::RelationshipConfig rel{"place of birth", "In what city was [subj] born?", "[subj] was born in [objp]."};
    std::vector<forge::QuestionContext> contexts;
    for (auto [s, o] : {std::pair{"Julius Erving", "New York City"}, std::pair{"C. J. Bonaparte", "Baltimore"}}) {
        auto t = dataset::triple_from_json({{"subject", s}, {"relationship", rel.relationship}, {"object", o}});
        auto q = dataset::render_question(t, rel);
        contexts.push_back({t, q, corpus::retrieve_top_k(q.text, 3, store, scorer)});
    }
    for (const auto& sp : contexts[0].top) std::cout << sp.passage_id << "  " << sp.score << '\n';

    auto inputs = forge::ForgeInputs::build(store, scorer, contexts);
    auto partial = forge::build_partially_related(contexts[0], inputs);
    if (!partial) {
        std::cerr << "no distractor: " << partial.reason << '\n';
        return 1;
    }

    memory::MemoryRecord mem;
    mem.question_id = contexts[0].triple.id;
    mem.memory_answer = "New York City";
    mem.background_text = "Julius Erving was born in New York City.";
    mem.consistent = mem.entailed = true;
    mem.settle();

    harness::ItemCatalog catalog;
    catalog.add(*partial.value);
    harness::TrialSpec spec;
    spec.trial_id = "demo";
    spec.question_id = mem.question_id;
    spec.question_text = contexts[0].question.text;
    spec.bundle = {partial.value->id};
    spec.options = harness::make_options(mem, "Julius Erving", partial.value->provenance.obj_prime, rel, std::nullopt, 1);
    std::cout << '\n' << harness::render_prompt(spec, catalog) << '\n';

    const char letter = spec.options.by_kind(harness::OptionKind::irrelevant)->letter;
    auto parsed = harness::parse_mc(std::string(1, letter) + ".", spec.options);
    std::cout << "response " << letter << " -> " << harness::to_string(parsed.outcome) << '\n';
}
