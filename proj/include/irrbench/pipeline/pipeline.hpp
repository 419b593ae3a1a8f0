#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "irrbench/corpus/distribution.hpp"
#include "irrbench/corpus/retrieval.hpp"
#include "irrbench/corpus/scoring.hpp"
#include "irrbench/corpus/store.hpp"
#include "irrbench/dataset/dataset.hpp"
#include "irrbench/digest.hpp"
#include "irrbench/forge/forge.hpp"
#include "irrbench/harness/harness.hpp"
#include "irrbench/jsonl.hpp"
#include "irrbench/memory/memory.hpp"
#include "irrbench/metrics/metrics.hpp"
#include "irrbench/pipeline/config.hpp"
#include "irrbench/providers/http.hpp"
#include "irrbench/providers/mock.hpp"
#include "irrbench/providers/resilient.hpp"
#include "irrbench/providers/transcript.hpp"

namespace irrbench::pipeline {

class PrerequisiteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitPrerequisite = 2, kExitConfig = 3, kExitProvider = 4 };

inline const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"ingest", "build-questions", "elicit", "forge",
                                                "measure", "eval",            "report"};
    return names;
}

/// File names inside a workspace.
namespace files {
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* passages = "passages.jsonl";
inline constexpr const char* questions = "questions.jsonl";
inline constexpr const char* relations = "relations.json";
inline constexpr const char* build_log = "build_log.jsonl";
inline constexpr const char* memory = "memory.jsonl";
inline constexpr const char* retrieval = "retrieval.jsonl";
inline constexpr const char* plans = "plans.jsonl";
inline constexpr const char* items = "items.jsonl";
inline constexpr const char* forge_log = "forge_log.jsonl";
inline constexpr const char* quality = "quality.csv";
inline constexpr const char* trials = "trials.jsonl";
inline constexpr const char* results = "results.jsonl";
inline constexpr const char* eval_log = "eval_log.jsonl";
}  // namespace files

inline std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string digest_or_empty(const fs::path& p) {
    return (!p.empty() && fs::exists(p)) ? file_digest(p) : std::string();
}

/// Default location of the shipped data files (relationship configs, ICL exemplar).
inline fs::path default_data_dir() {
    if (const char* env = std::getenv("IRRBENCH_DATA_DIR")) return env;
#ifdef IRRBENCH_DATA_DIR
    return IRRBENCH_DATA_DIR;
#else
    return "data";
#endif
}

/// Run identity: the effective configuration with every path replaced by the
/// digest of the file it names, so the id does not depend on where inputs live.
inline json config_identity(const Config& c) {
    auto j = to_json(c);
    j["passages"] = digest_or_empty(c.passages);
    j["dataset"]["triples"] = digest_or_empty(c.dataset.triples);
    j["dataset"]["relationships"] = digest_or_empty(c.dataset.relationships);
    j["eval"]["icl_exemplar"] = digest_or_empty(c.eval.icl_exemplar);
    j["provider"]["mock_script"] = digest_or_empty(c.provider.mock_script);
    j["provider"]["transcript"] = c.provider.transcript.empty() ? "" : "set";
    return j;
}

inline std::string compute_run_id(const Config& c) { return "run-" + sha256_hex(config_identity(c).dump()).substr(0, 12); }

/// Chat/embedding stack: base backend, retries and bounded concurrency, then
/// the transcript layer when a transcript path is configured.
class ProviderStack {
public:
    explicit ProviderStack(const ProviderSection& p) {
        const bool replay = !p.transcript.empty() && p.transcript_mode == providers::TranscriptMode::replay;
        providers::ChatBackend* base_chat = nullptr;
        providers::EmbeddingBackend* base_embed = nullptr;
        if (!replay) {
            if (p.backend == "mock") {
                if (p.mock_script.empty()) {
                    mock_ = std::make_unique<providers::MockProvider>();
                } else {
                    if (!fs::exists(p.mock_script)) throw ConfigError("provider.mock_script not found: " + p.mock_script.string());
                    mock_ = std::make_unique<providers::MockProvider>(providers::MockProvider::from_file(p.mock_script));
                }
                base_chat = mock_.get();
                base_embed = mock_.get();
            } else {
                auto ep = providers::HttpEndpoint::from_env();
                if (!p.model.empty()) ep.chat_model = p.model;
                if (!p.embedding_model.empty()) ep.embedding_model = p.embedding_model;
                http_ = std::make_unique<providers::HttpProvider>(ep);
                base_chat = http_.get();
                base_embed = http_.get();
            }
            providers::RetryPolicy policy;
            policy.max_retries = p.max_retries;
            resilient_ = std::make_unique<providers::ResilientBackend>(base_chat, base_embed, policy,
                                                                       static_cast<std::ptrdiff_t>(p.max_inflight));
            base_chat = resilient_.get();
            base_embed = resilient_.get();
        }
        if (!p.transcript.empty()) {
            try {
                transcript_ = std::make_unique<providers::Transcript>(p.transcript_mode, p.transcript);
            } catch (const std::runtime_error& e) {
                throw providers::ProviderError(providers::ProviderErrorKind::replay_miss, e.what());
            }
            recording_ = std::make_unique<providers::RecordingProvider>(*transcript_, base_chat, base_embed);
            chat_ = recording_.get();
            embed_ = recording_.get();
        } else {
            chat_ = base_chat;
            embed_ = base_embed;
        }
    }

    providers::ChatBackend& chat() { return *chat_; }
    providers::EmbeddingBackend& embed() { return *embed_; }
    const providers::Transcript* transcript() const { return transcript_.get(); }

private:
    std::unique_ptr<providers::MockProvider> mock_;
    std::unique_ptr<providers::HttpProvider> http_;
    std::unique_ptr<providers::ResilientBackend> resilient_;
    std::unique_ptr<providers::Transcript> transcript_;
    std::unique_ptr<providers::RecordingProvider> recording_;
    providers::ChatBackend* chat_ = nullptr;
    providers::EmbeddingBackend* embed_ = nullptr;
};

enum class StageStatus { ran, up_to_date };

/// One workspace directory, one manifest, seven stages. Each stage checks its
/// prerequisites in the manifest, fingerprints its inputs, and is skipped
/// without touching any file when the fingerprint and outputs are unchanged.
class Pipeline {
public:
    Pipeline(Config cfg, fs::path workspace, std::ostream& log = std::cerr)
        : cfg_(std::move(cfg)), ws_(std::move(workspace)), log_(log) {
        fs::create_directories(ws_);
        run_id_ = compute_run_id(cfg_);
        if (fs::exists(ws_ / files::manifest)) {
            try {
                manifest_ = json::parse(read_file(ws_ / files::manifest));
            } catch (const json::parse_error& e) {
                throw std::runtime_error("corrupt manifest " + (ws_ / files::manifest).string() + ": " + e.what());
            }
        }
        if (!manifest_.is_object()) manifest_ = json::object();
        if (!manifest_.contains("stages")) manifest_["stages"] = json::object();
    }

    const std::string& run_id() const { return run_id_; }
    const fs::path& workspace() const { return ws_; }
    fs::path path(const char* name) const { return ws_ / name; }
    const json& manifest() const { return manifest_; }

    StageStatus run(const std::string& stage) {
        if (stage == "ingest") return ingest();
        if (stage == "build-questions") return build_questions();
        if (stage == "elicit") return elicit();
        if (stage == "forge") return forge();
        if (stage == "measure") return measure();
        if (stage == "eval") return eval();
        if (stage == "report") return report();
        throw std::invalid_argument("unknown stage '" + stage + "'");
    }

    void run_all() {
        for (const auto& s : stage_names()) run(s);
    }

    StageStatus ingest() {
        require_input(cfg_.passages, "passages");
        return stage("ingest", {}, {{"passages", cfg_.passages}}, json::object(), {files::passages}, [&] {
            auto store = corpus::PassageStore::ingest(corpus::load_passages(cfg_.passages));
            std::vector<json> rows;
            for (const auto& p : store.passages()) rows.push_back(stamped(corpus::to_json(p)));
            write_jsonl(path(files::passages), rows);
            log_ << "ingest: " << store.size() << " passages\n";
        });
    }

    StageStatus build_questions() {
        require_input(cfg_.dataset.triples, "dataset.triples");
        require_input(cfg_.dataset.relationships, "dataset.relationships");
        json params = {{"max_answers", cfg_.dataset.max_answers},
                       {"sample_per_relationship", cfg_.dataset.sample_per_relationship},
                       {"seed", cfg_.seed}};
        return stage("build-questions", {},
                     {{"triples", cfg_.dataset.triples}, {"relationships", cfg_.dataset.relationships}}, params,
                     {files::questions, files::relations, files::build_log}, [&] {
                         auto table = dataset::load_relationship_table(cfg_.dataset.relationships);
                         auto loaded = dataset::load_triples(cfg_.dataset.triples);
                         std::vector<json> log;
                         for (const auto& r : loaded.rejected) {
                             log.push_back(stamped({{"line", r.line}, {"reason", r.reason}}));
                         }
                         auto kept = dataset::preprocess_filter(loaded.triples, cfg_.dataset.max_answers);
                         for (const auto& t : loaded.triples) {
                             if (dataset::distinct_answer_count(t) > cfg_.dataset.max_answers) {
                                 log.push_back(stamped({{"triple_id", t.id}, {"reason", "too many distinct answers"}}));
                             }
                         }
                         if (cfg_.dataset.sample_per_relationship > 0) {
                             kept = dataset::sample_per_relationship(kept, cfg_.dataset.sample_per_relationship, cfg_.seed);
                         } else {
                             std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
                                 return std::tie(a.relationship, a.id) < std::tie(b.relationship, b.id);
                             });
                         }
                         std::vector<json> rows;
                         for (const auto& t : kept) {
                             if (!table.contains(t.relationship)) {
                                 log.push_back(stamped({{"triple_id", t.id}, {"reason", "no relationship config for '" + t.relationship + "'"}}));
                                 continue;
                             }
                             auto q = dataset::render_question(t, table.at(t.relationship));
                             rows.push_back(stamped({{"triple", dataset::to_json(t)}, {"question", dataset::to_json(q)}}));
                         }
                         if (rows.empty()) throw dataset::DatasetError("no questions survived filtering");
                         write_jsonl(path(files::questions), rows);
                         write_jsonl(path(files::build_log), log);
                         json rels = json::array();
                         for (const auto& [name, r] : table.all()) {
                             rels.push_back({{"relationship", name},
                                             {"question_template", r.question_template},
                                             {"statement_template", r.statement_template}});
                         }
                         write_file_atomic(path(files::relations),
                                           json{{"run_id", run_id_}, {"relationships", rels}}.dump(2) + "\n");
                         log_ << "build-questions: " << rows.size() << " questions, " << log.size() << " dropped\n";
                     });
    }

    StageStatus elicit() {
        json params = provider_params();
        params["consistency_trials"] = cfg_.consistency_trials;
        params["entailment"] = cfg_.entailment == memory::EntailmentMode::judge ? "judge" : "fallback";
        return stage("elicit", {"build-questions"}, {{"questions", path(files::questions)}}, params, {files::memory}, [&] {
            auto qs = load_questions();
            std::vector<dataset::QuestionRecord> records;
            for (const auto& [t, q] : qs) records.push_back(q);
            memory::ElicitationOptions opts;
            opts.consistency_trials = cfg_.consistency_trials;
            opts.entailment = cfg_.entailment;
            opts.temperature = cfg_.provider.temperature;
            opts.max_tokens = cfg_.provider.max_tokens;
            opts.max_inflight = cfg_.provider.max_inflight;
            auto mems = memory::build_memories(records, providers().chat(), opts);
            std::vector<json> rows;
            std::size_t usable = 0;
            for (const auto& m : mems) {
                usable += m.usable;
                rows.push_back(stamped(memory::to_json(m)));
            }
            write_jsonl(path(files::memory), rows);
            log_ << "elicit: " << usable << "/" << mems.size() << " usable memories\n";
        });
    }

    StageStatus forge() {
        json params = provider_params();
        params["k"] = cfg_.retrieval.k;
        params["scorer"] = to_json(cfg_)["retrieval"];
        params["forge"] = to_json(cfg_)["forge"];
        return stage("forge", {"ingest", "build-questions"},
                     {{"passages", path(files::passages)}, {"questions", path(files::questions)}}, params,
                     {files::retrieval, files::plans, files::items, files::forge_log}, [&] {
                         auto store = load_store();
                         auto scorer = make_scorer(store);
                         auto contexts = retrieve_contexts(store, *scorer);
                         std::vector<json> rrows;
                         for (const auto& c : contexts) {
                             json top = json::array();
                             for (const auto& sp : c.top) top.push_back({{"passage_id", sp.passage_id}, {"score", sp.score}});
                             rrows.push_back(stamped({{"question_id", c.triple.id}, {"top", top}}));
                         }
                         write_jsonl(path(files::retrieval), rrows);

                         forge::ForgeOptions opts;
                         opts.intro_sentences = cfg_.forge.intro_sentences;
                         opts.intro_chars = cfg_.forge.intro_chars;
                         opts.temperature = cfg_.provider.temperature;
                         opts.max_tokens = cfg_.provider.max_tokens;
                         opts.max_inflight = cfg_.provider.max_inflight;
                         opts.levels = {cfg_.forge.levels.begin(), cfg_.forge.levels.end()};
                         opts.variants = cfg_.forge.variants;
                         const bool related = opts.levels.count(forge::Level::related) > 0;
                         auto out = forge::forge_all(contexts, store, *scorer, related ? &providers().chat() : nullptr, opts);
                         write_records(files::plans, out.plans);
                         write_records(files::items, out.items);
                         write_records(files::forge_log, out.exclusions);
                         log_ << "forge: " << out.items.size() << " items, " << out.exclusions.size() << " exclusions\n";
                     });
    }

    StageStatus measure() {
        return stage("measure", {"forge"}, {{"items", path(files::items)}, {"retrieval", path(files::retrieval)}},
                     {{"scorer", corpus::to_string(cfg_.retrieval.scorer.kind)}}, {files::quality}, [&] {
                         auto items = load_items();
                         std::vector<forge::QuestionContext> contexts;
                         for (const auto& [qid, top] : load_retrieval()) {
                             forge::QuestionContext c;
                             c.triple.id = qid;
                             c.top = top;
                             contexts.push_back(std::move(c));
                         }
                         auto report = forge::measure_quality(items, contexts, histogram());
                         std::ostringstream out;
                         out << "# run_id: " << run_id_ << '\n';
                         forge::write_quality_csv(out, report);
                         write_file_atomic(path(files::quality), out.str());
                         for (const char* label : {"unrelated", "partially_related", "related", forge::kTopPassageLabel}) {
                             if (auto* s = report.level(label)) {
                                 log_ << "measure: " << label << " mean " << corpus::format_real(s->mean, 3) << " (n=" << s->count << ")\n";
                             }
                         }
                     });
    }

    StageStatus eval() {
        json params = provider_params();
        params["eval"] = to_json(cfg_)["eval"];
        params["eval"]["icl_exemplar"] = digest_or_empty(icl_path());
        params["seed"] = cfg_.seed;
        params["dataset"] = cfg_.dataset.name;
        return stage("eval", {"elicit", "forge"},
                     {{"questions", path(files::questions)},
                      {"memory", path(files::memory)},
                      {"items", path(files::items)},
                      {"relations", path(files::relations)}},
                     params, {files::trials, files::results, files::eval_log}, [&] {
                         auto plan = plan_eval();
                         harness::RunOptions opts;
                         opts.temperature = cfg_.provider.temperature;
                         opts.max_tokens = cfg_.provider.max_tokens;
                         opts.max_inflight = cfg_.provider.max_inflight;
                         opts.icl_block = icl_block();
                         auto results = harness::run_condition(plan.specs, catalog_, providers().chat(), &providers().chat(), opts);
                         write_records(files::trials, plan.specs);
                         write_records(files::results, results);
                         write_records(files::eval_log, plan.skipped);
                         log_ << "eval: " << results.size() << " trials, " << plan.skipped.size() << " skipped\n";
                     });
    }

    StageStatus report() {
        std::vector<const char*> outputs;
        for (const auto& f : cfg_.report_formats) outputs.push_back(report_file(metrics::report_format_from_string(f)));
        return stage("report", {"eval"}, {{"results", path(files::results)}}, {{"formats", cfg_.report_formats}}, outputs,
                     [&] {
                         auto results = metrics::load_results(path(files::results));
                         if (results.empty()) throw std::runtime_error("report: no trial results to aggregate");
                         auto reports = metrics::aggregate(results);
                         for (const auto& f : cfg_.report_formats) {
                             auto fmt = metrics::report_format_from_string(f);
                             write_file_atomic(path(report_file(fmt)), metrics::emit_report(reports, fmt, run_id_));
                         }
                         log_ << "report: " << reports.size() << " groups\n";
                     });
    }

    static const char* report_file(metrics::ReportFormat f) {
        switch (f) {
            case metrics::ReportFormat::csv: return "report.csv";
            case metrics::ReportFormat::markdown: return "report.md";
            case metrics::ReportFormat::json: return "report.json";
        }
        return "report.csv";
    }

private:
    using Body = std::function<void()>;

    StageStatus stage(const std::string& name, const std::vector<std::string>& prereqs,
                      const std::vector<std::pair<std::string, fs::path>>& inputs, const json& params,
                      const std::vector<const char*>& outputs, const Body& body) {
        for (const auto& p : prereqs) {
            if (!stage_complete(p)) {
                throw PrerequisiteError("stage '" + name + "' needs stage '" + p + "' to run first");
            }
        }
        json fp_doc = {{"stage", name}, {"params", params}, {"inputs", json::object()}};
        for (const auto& [label, file] : inputs) fp_doc["inputs"][label] = file_digest(file);
        const auto fingerprint = sha256_hex(fp_doc.dump());
        if (up_to_date(name, fingerprint, outputs)) {
            log_ << name << ": up to date\n";
            return StageStatus::up_to_date;
        }
        body();
        json out_digests = json::object();
        for (const auto* o : outputs) out_digests[o] = file_digest(path(o));
        auto& st = manifest_["stages"][name];
        st = {{"fingerprint", fingerprint}, {"outputs", out_digests}, {"completed_at", utc_timestamp()}};
        manifest_["run_id"] = run_id_;
        manifest_["config"] = to_json(cfg_);
        manifest_["seeds"] = {{"seed", cfg_.seed}};
        manifest_["provider_mode"] = provider_mode();
        json digests = json::object();
        for (const auto& [label, file] : inputs) digests[label] = file_digest(file);
        manifest_["inputs"][name] = digests;
        if (providers_ && providers_->transcript()) {
            manifest_["transcript"] = {{"path", cfg_.provider.transcript.string()},
                                       {"digest", providers_->transcript()->content_digest()}};
        }
        write_file_atomic(path(files::manifest), manifest_.dump(2) + "\n");
        return StageStatus::ran;
    }

    bool stage_complete(const std::string& name) const {
        auto st = manifest_["stages"].find(name);
        if (st == manifest_["stages"].end()) return false;
        for (const auto& [file, _] : (*st)["outputs"].items()) {
            if (!fs::exists(ws_ / file)) return false;
        }
        return true;
    }

    bool up_to_date(const std::string& name, const std::string& fingerprint, const std::vector<const char*>& outputs) const {
        auto st = manifest_["stages"].find(name);
        if (st == manifest_["stages"].end() || st->value("fingerprint", "") != fingerprint) return false;
        const auto& recorded = (*st)["outputs"];
        for (const auto* o : outputs) {
            if (!recorded.contains(o) || !fs::exists(ws_ / o) || file_digest(ws_ / o) != recorded[o].get<std::string>()) {
                return false;
            }
        }
        return true;
    }

    void require_input(const fs::path& p, const std::string& key) const {
        if (p.empty()) throw ConfigError(key + " is not set");
        if (!fs::exists(p)) throw ConfigError(key + " not found: " + p.string());
    }

    std::string provider_mode() const {
        if (!cfg_.provider.transcript.empty()) return providers::to_string(cfg_.provider.transcript_mode);
        return cfg_.provider.backend;
    }

    json provider_params() const {
        json p = to_json(cfg_)["provider"];
        p.erase("transcript");
        p.erase("max_inflight");
        p.erase("max_retries");
        p["mock_script"] = digest_or_empty(cfg_.provider.mock_script);
        if (!cfg_.provider.transcript.empty() && cfg_.provider.transcript_mode == providers::TranscriptMode::replay) {
            p["transcript"] = digest_or_empty(cfg_.provider.transcript);
        }
        return p;
    }

    ProviderStack& providers() {
        if (!providers_) providers_ = std::make_unique<ProviderStack>(cfg_.provider);
        return *providers_;
    }

    json stamped(json j) const {
        j["run_id"] = run_id_;
        return j;
    }

    template <class T>
    void write_records(const char* name, const std::vector<T>& records) {
        std::vector<json> rows;
        rows.reserve(records.size());
        for (const auto& r : records) rows.push_back(stamped(to_json(r)));
        write_jsonl(path(name), rows);
    }

    std::vector<std::pair<dataset::FactTriple, dataset::QuestionRecord>> load_questions() const {
        std::vector<std::pair<dataset::FactTriple, dataset::QuestionRecord>> out;
        for (const auto& j : read_jsonl(path(files::questions))) {
            out.emplace_back(dataset::triple_from_json(j.at("triple")), dataset::question_from_json(j.at("question")));
        }
        return out;
    }

    corpus::PassageStore load_store() const { return corpus::PassageStore::ingest(corpus::load_passages(path(files::passages))); }

    std::unique_ptr<corpus::Scorer> make_scorer(const corpus::PassageStore& store) {
        auto* embed = cfg_.retrieval.scorer.kind == corpus::ScorerKind::embedding ? &providers().embed() : nullptr;
        return corpus::make_scorer(cfg_.retrieval.scorer, store, embed);
    }

    corpus::HistogramConfig histogram() const {
        if (cfg_.retrieval.scorer.kind == corpus::ScorerKind::embedding) return {0.0, 1.0, 20};
        return {0.0, 20.0, 20};
    }

    std::vector<forge::QuestionContext> retrieve_contexts(const corpus::PassageStore& store, const corpus::Scorer& scorer) {
        auto qs = load_questions();
        std::vector<forge::QuestionContext> out;
        for (auto& [t, q] : qs) {
            auto top = corpus::retrieve_top_k(q.text, cfg_.retrieval.k, store, scorer);
            out.push_back({std::move(t), std::move(q), std::move(top)});
        }
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.triple.id < b.triple.id; });
        return out;
    }

    std::vector<std::pair<std::string, std::vector<corpus::ScoredPassage>>> load_retrieval() const {
        std::vector<std::pair<std::string, std::vector<corpus::ScoredPassage>>> out;
        for (const auto& j : read_jsonl(path(files::retrieval))) {
            std::vector<corpus::ScoredPassage> top;
            for (const auto& sp : j.at("top")) top.push_back({sp.at("passage_id").get<std::string>(), sp.at("score").get<double>()});
            out.emplace_back(j.at("question_id").get<std::string>(), std::move(top));
        }
        return out;
    }

    std::vector<forge::InfoItem> load_items() const {
        std::vector<forge::InfoItem> out;
        for (const auto& j : read_jsonl(path(files::items))) out.push_back(forge::info_item_from_json(j));
        return out;
    }

    fs::path icl_path() const {
        return cfg_.eval.icl_exemplar.empty() ? default_data_dir() / "icl_exemplar.txt" : cfg_.eval.icl_exemplar;
    }

    bool wants_icl() const {
        return std::any_of(cfg_.eval.mitigations.begin(), cfg_.eval.mitigations.end(),
                           [](const std::string& m) { return harness::Mitigation::parse(m).icl; });
    }

    std::string icl_block() const {
        if (!wants_icl()) return {};
        auto p = icl_path();
        if (!fs::exists(p)) throw ConfigError("eval.icl_exemplar not found: " + p.string());
        return read_file(p);
    }

    harness::TrialPlan plan_eval() {
        auto qs = load_questions();
        dataset::RelationshipTable table = dataset::relationship_table_from_json(json::parse(read_file(path(files::relations))));
        std::map<std::string, memory::MemoryRecord> mems;
        for (const auto& j : read_jsonl(path(files::memory))) {
            auto m = memory::memory_from_json(j);
            mems.emplace(m.question_id, std::move(m));
        }
        catalog_ = harness::ItemCatalog();
        for (auto& it : load_items()) catalog_.add(std::move(it));
        for (const auto& [qid, m] : mems) {
            if (m.usable) catalog_.add(harness::memory_item(m));
        }
        std::vector<harness::QuestionPlanInput> inputs;
        for (auto& [t, q] : qs) {
            auto it = mems.find(t.id);
            inputs.push_back({t, q, it == mems.end() ? nullptr : &it->second});
        }
        harness::PlanConfig pc;
        pc.conditions.clear();
        for (const auto& c : cfg_.eval.conditions) pc.conditions.push_back(harness::Condition::parse(c));
        pc.formats.clear();
        for (const auto& f : cfg_.eval.formats) pc.formats.push_back(harness::format_from_string(f));
        pc.mitigations.clear();
        for (const auto& m : cfg_.eval.mitigations) pc.mitigations.push_back(harness::Mitigation::parse(m));
        pc.seed = cfg_.seed;
        pc.model = cfg_.provider.model;
        pc.dataset = cfg_.dataset.name;
        return harness::plan_trials(inputs, catalog_, table, pc);
    }

    Config cfg_;
    fs::path ws_;
    std::ostream& log_;
    std::string run_id_;
    json manifest_;
    std::unique_ptr<ProviderStack> providers_;
    harness::ItemCatalog catalog_;
};

}  // namespace irrbench::pipeline
