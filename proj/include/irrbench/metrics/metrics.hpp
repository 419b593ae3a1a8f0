#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "irrbench/harness/harness.hpp"
#include "irrbench/jsonl.hpp"

namespace irrbench::metrics {

using harness::Outcome;
using harness::TrialResult;

struct GroupKey {
    std::string model;
    std::string dataset;
    std::string condition;
    std::string format;
    std::string mitigation;

    auto tie() const { return std::tie(model, dataset, condition, format, mitigation); }
    bool operator<(const GroupKey& o) const { return tie() < o.tie(); }
    bool operator==(const GroupKey& o) const { return tie() == o.tie(); }
};

inline GroupKey key_of(const TrialResult& r) { return {r.model, r.dataset, r.condition, r.format, r.mitigation}; }

struct MetricsReport {
    GroupKey key;
    std::size_t n_total = 0;
    std::size_t n_misrepresented = 0;
    std::size_t n_uncertain = 0;
    std::size_t n_kept = 0;
    std::size_t n_gold = 0;
    std::size_t n_unparsed = 0;
    double mr = 0.0;
    double ur = 0.0;

    void count(Outcome o) {
        ++n_total;
        switch (o) {
            case Outcome::misrepresented: ++n_misrepresented; break;
            case Outcome::uncertain: ++n_uncertain; break;
            case Outcome::kept_memory: ++n_kept; break;
            case Outcome::gold: ++n_gold; break;
            case Outcome::unparsed: ++n_unparsed; break;
        }
    }

    void finish() {
        if (n_total == 0) throw std::invalid_argument("metrics over an empty group");
        mr = static_cast<double>(n_misrepresented) / static_cast<double>(n_total);
        ur = static_cast<double>(n_uncertain) / static_cast<double>(n_total);
    }
};

inline std::size_t count_outcome(std::span<const TrialResult> results, Outcome o) {
    return static_cast<std::size_t>(
        std::count_if(results.begin(), results.end(), [&](const TrialResult& r) { return r.outcome == o; }));
}

/// Share of trials (unparsed included) that switched to the irrelevant answer.
inline double misrepresentation_ratio(std::span<const TrialResult> results) {
    if (results.empty()) throw std::invalid_argument("misrepresentation ratio of an empty group");
    return static_cast<double>(count_outcome(results, Outcome::misrepresented)) / static_cast<double>(results.size());
}

inline double uncertainty_ratio(std::span<const TrialResult> results) {
    if (results.empty()) throw std::invalid_argument("uncertainty ratio of an empty group");
    return static_cast<double>(count_outcome(results, Outcome::uncertain)) / static_cast<double>(results.size());
}

/// One report per non-empty (model, dataset, condition, format, mitigation), in key order.
inline std::vector<MetricsReport> aggregate(std::span<const TrialResult> results) {
    std::map<GroupKey, MetricsReport> groups;
    for (const auto& r : results) {
        auto key = key_of(r);
        auto [it, _] = groups.try_emplace(key);
        it->second.key = key;
        it->second.count(r.outcome);
    }
    std::vector<MetricsReport> out;
    for (auto& [_, rep] : groups) {
        rep.finish();
        out.push_back(rep);
    }
    return out;
}

/// n/total as a percentage with one decimal, rounded half up in exact
/// integer arithmetic (11/200 -> "5.5").
inline std::string percent_1dp(std::size_t n, std::size_t total) {
    if (total == 0) throw std::invalid_argument("percentage of zero trials");
    const auto tenths = (2000ULL * n + total) / (2ULL * total);
    return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

enum class ReportFormat { csv, markdown, json };

inline ReportFormat report_format_from_string(const std::string& s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    if (s == "json") return ReportFormat::json;
    throw std::invalid_argument("unknown report format '" + s + "'");
}

inline const char* extension(ReportFormat f) {
    switch (f) {
        case ReportFormat::csv: return "csv";
        case ReportFormat::markdown: return "md";
        case ReportFormat::json: return "json";
    }
    return "csv";
}

namespace detail {

struct Columns {
    bool model = false;
    bool dataset = false;
    bool gold = false;
};

/// model, dataset and n_gold appear only when some report uses them.
inline Columns optional_columns(const std::vector<MetricsReport>& reports) {
    Columns c;
    for (const auto& r : reports) {
        c.model = c.model || !r.key.model.empty();
        c.dataset = c.dataset || !r.key.dataset.empty();
        c.gold = c.gold || r.n_gold > 0;
    }
    return c;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace detail

/// Rendered report. `run_id`, when given, leads the output: a comment line in
/// csv and markdown, a field in json. MR and UR are percentages to one decimal.
inline std::string emit_report(const std::vector<MetricsReport>& reports, ReportFormat format,
                               const std::string& run_id = {}) {
    if (reports.empty()) throw std::invalid_argument("no reports to emit");
    const auto cols = detail::optional_columns(reports);
    std::ostringstream out;
    switch (format) {
        case ReportFormat::csv: {
            if (!run_id.empty()) out << "# run_id: " << run_id << '\n';
            if (cols.model) out << "model,";
            if (cols.dataset) out << "dataset,";
            out << "condition,format,mitigation,n_total,n_misrepresented,n_uncertain,n_kept,";
            if (cols.gold) out << "n_gold,";
            out << "n_unparsed,mr,ur\n";
            for (const auto& r : reports) {
                if (cols.model) out << detail::csv_field(r.key.model) << ',';
                if (cols.dataset) out << detail::csv_field(r.key.dataset) << ',';
                out << detail::csv_field(r.key.condition) << ',' << detail::csv_field(r.key.format) << ','
                    << detail::csv_field(r.key.mitigation) << ',' << r.n_total << ',' << r.n_misrepresented << ','
                    << r.n_uncertain << ',' << r.n_kept << ',';
                if (cols.gold) out << r.n_gold << ',';
                out << r.n_unparsed << ',' << percent_1dp(r.n_misrepresented, r.n_total) << ','
                    << percent_1dp(r.n_uncertain, r.n_total) << '\n';
            }
            break;
        }
        case ReportFormat::markdown: {
            if (!run_id.empty()) out << "<!-- run_id: " << run_id << " -->\n";
            out << "|";
            if (cols.model) out << " Model |";
            if (cols.dataset) out << " Dataset |";
            out << " Condition | Format | Mitigation | MR | UR | N | Kept |";
            if (cols.gold) out << " Gold |";
            out << " Unparsed |\n|";
            const int n_cols = 8 + cols.model + cols.dataset + cols.gold;
            for (int i = 0; i < n_cols; ++i) out << "---|";
            out << '\n';
            for (const auto& r : reports) {
                out << "|";
                if (cols.model) out << ' ' << r.key.model << " |";
                if (cols.dataset) out << ' ' << r.key.dataset << " |";
                out << ' ' << r.key.condition << " | " << r.key.format << " | " << r.key.mitigation << " | "
                    << percent_1dp(r.n_misrepresented, r.n_total) << " | " << percent_1dp(r.n_uncertain, r.n_total)
                    << " | " << r.n_total << " | " << r.n_kept << " |";
                if (cols.gold) out << ' ' << r.n_gold << " |";
                out << ' ' << r.n_unparsed << " |\n";
            }
            break;
        }
        case ReportFormat::json: {
            json rows = json::array();
            for (const auto& r : reports) {
                json row = {{"condition", r.key.condition},
                            {"format", r.key.format},
                            {"mitigation", r.key.mitigation},
                            {"n_total", r.n_total},
                            {"n_misrepresented", r.n_misrepresented},
                            {"n_uncertain", r.n_uncertain},
                            {"n_kept", r.n_kept},
                            {"n_unparsed", r.n_unparsed},
                            {"mr", percent_1dp(r.n_misrepresented, r.n_total)},
                            {"ur", percent_1dp(r.n_uncertain, r.n_total)}};
                if (cols.model) row["model"] = r.key.model;
                if (cols.dataset) row["dataset"] = r.key.dataset;
                if (cols.gold) row["n_gold"] = r.n_gold;
                rows.push_back(std::move(row));
            }
            json doc = {{"reports", rows}};
            if (!run_id.empty()) doc["run_id"] = run_id;
            out << doc.dump(2) << '\n';
            break;
        }
    }
    return out.str();
}

inline std::vector<TrialResult> load_results(const std::filesystem::path& path) {
    std::vector<TrialResult> out;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        try {
            out.push_back(harness::trial_result_from_json(j));
        } catch (const std::exception& e) {
            throw JsonlError(path.string(), line, e.what());
        }
    });
    return out;
}

}  // namespace irrbench::metrics
