// irrbench: command-line driver for the benchmark pipeline.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "irrbench/pipeline/config.hpp"
#include "irrbench/pipeline/pipeline.hpp"

namespace pl = irrbench::pipeline;

namespace {

struct Overrides {
    std::string backend;
    std::string mock_script;
    std::string transcript;
    std::string transcript_mode;
    std::vector<std::string> levels;
    std::vector<std::string> variants;
    std::vector<std::string> formats;
    std::vector<std::string> conditions;
    bool cot = false;
    bool ignore_instr = false;
    bool icl = false;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> report_formats;
};

/// CLI flags win over the config file; the merged result is validated again.
pl::Config apply(pl::Config cfg, const Overrides& o, const std::string& stage) {
    auto j = pl::to_json(cfg);
    auto& p = j["provider"];
    if (!o.backend.empty()) p["backend"] = o.backend;
    if (!o.mock_script.empty()) p["mock_script"] = std::filesystem::absolute(o.mock_script).string();
    if (!o.transcript.empty()) p["transcript"] = std::filesystem::absolute(o.transcript).string();
    if (!o.transcript_mode.empty()) p["transcript_mode"] = o.transcript_mode;
    if (stage == "forge") {
        if (!o.levels.empty()) j["forge"]["levels"] = o.levels;
        if (!o.variants.empty()) j["forge"]["variants"] = o.variants;
    }
    if (stage == "eval") {
        if (!o.formats.empty()) j["eval"]["formats"] = o.formats;
        if (!o.conditions.empty()) j["eval"]["conditions"] = o.conditions;
        if (o.cot || o.ignore_instr || o.icl) {
            irrbench::harness::Mitigation m{o.cot, o.ignore_instr, o.icl};
            j["eval"]["mitigations"] = {m.label()};
        }
    }
    if (o.seed) j["seed"] = *o.seed;
    if (stage == "report" && !o.report_formats.empty()) j["report"]["formats"] = o.report_formats;
    return pl::config_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Irrelevant-information robustness benchmark pipeline"};
    app.require_subcommand(1);
    std::string config_path;
    std::string workspace = "workspace";
    Overrides o;
    std::uint64_t seed = 0;
    app.add_option("-c,--config", config_path, "Pipeline config (JSON)")->required();
    app.add_option("-w,--workspace", workspace, "Workspace directory")->capture_default_str();
    app.add_option("--backend", o.backend, "Provider backend: mock or http");
    app.add_option("--mock-script", o.mock_script, "Mock provider rule script");
    app.add_option("--transcript", o.transcript, "Transcript JSONL path");
    app.add_option("--transcript-mode", o.transcript_mode, "record, replay or passthrough");
    auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");

    std::vector<std::string> stages = pl::stage_names();
    std::vector<CLI::App*> subs;
    for (const auto& s : stages) subs.push_back(app.add_subcommand(s, "Run the " + s + " stage"));
    auto* all = app.add_subcommand("run", "Run every stage in order");

    auto* forge_cmd = app.get_subcommand("forge");
    forge_cmd->add_option("--levels", o.levels, "Levels to emit: unrelated, partially_related, related");
    forge_cmd->add_option("--variants", o.variants, "Related variants to generate");
    auto* eval_cmd = app.get_subcommand("eval");
    eval_cmd->add_option("--format", o.formats, "multiple_choice, boolean, free_form");
    eval_cmd->add_option("--condition", o.conditions, "unrelated, partially_related, related, i:r or mixed_5_2");
    eval_cmd->add_flag("--cot", o.cot, "Append the step-by-step cue");
    eval_cmd->add_flag("--ignore-instr", o.ignore_instr, "Tell the model it may ignore irrelevant information");
    eval_cmd->add_flag("--icl", o.icl, "Prepend the labelled exemplar");
    app.get_subcommand("report")->add_option("--format", o.report_formats, "csv, markdown, json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    if (seed_opt->count() > 0) o.seed = seed;

    std::string stage;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (subs[i]->parsed()) stage = stages[i];
    }
    if (all->parsed()) stage = "run";

    try {
        auto cfg = apply(pl::load_config(config_path), o, stage);
        pl::Pipeline pipeline(std::move(cfg), workspace);
        if (stage == "run") {
            pipeline.run_all();
        } else {
            pipeline.run(stage);
        }
        return pl::kExitOk;
    } catch (const pl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return pl::kExitConfig;
    } catch (const pl::PrerequisiteError& e) {
        std::cerr << "prerequisite error: " << e.what() << '\n';
        return pl::kExitPrerequisite;
    } catch (const irrbench::providers::ProviderError& e) {
        std::cerr << "provider error: " << e.what() << '\n';
        return pl::kExitProvider;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return pl::kExitFailure;
    }
}
