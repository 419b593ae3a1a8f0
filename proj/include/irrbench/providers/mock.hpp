#pragma once

// Rule-based offline provider. A pure function of the request: the first
// rule whose tag and pattern match decides the response.

#include <cmath>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "irrbench/jsonl.hpp"
#include "irrbench/digest.hpp"
#include "irrbench/providers/types.hpp"
#include "irrbench/random.hpp"

namespace irrbench::providers {

enum class MatchKind { always, contains, ends_with, regex };
enum class MockAction { reply, choose_first_option, pick };

struct MockRule {
    std::string name;
    std::string tag_prefix;  // empty matches every tag
    MatchKind match = MatchKind::always;
    std::string pattern;
    MockAction action = MockAction::reply;
    std::string response;  // for regex rules, $1..$9 expand to capture groups
    std::vector<std::string> responses;  // candidates for `pick`
};

namespace detail {

/// "A. text" for the first lettered option line following "Options:".
inline std::optional<std::string> first_option_line(const std::string& prompt) {
    auto lines = text::split_lines(prompt);
    bool in_options = false;
    for (const auto& raw : lines) {
        auto line = text::trim(raw);
        if (line == "Options:") {
            in_options = true;
            continue;
        }
        if (in_options && line.size() >= 2 && line[0] == 'A' && (line[1] == '.' || line[1] == ')')) return line;
    }
    return std::nullopt;
}

}  // namespace detail

class MockProvider final : public ChatBackend, public EmbeddingBackend {
public:
    explicit MockProvider(std::vector<MockRule> rules = {}, std::size_t embedding_dim = 64)
        : rules_(std::move(rules)), dim_(embedding_dim) {
        compiled_.reserve(rules_.size());
        for (const auto& r : rules_) {
            if (r.match == MatchKind::regex) {
                compiled_.emplace_back(std::regex(r.pattern, std::regex::ECMAScript));
            } else {
                compiled_.emplace_back(std::nullopt);
            }
            if (r.action == MockAction::pick && r.responses.empty()) {
                throw std::invalid_argument("mock rule '" + r.name + "': pick needs responses");
            }
        }
    }

    static MockProvider from_json(const json& j) {
        std::vector<MockRule> rules;
        for (const auto& r : j.value("rules", json::array())) {
            MockRule rule;
            rule.name = r.value("name", "");
            rule.tag_prefix = r.value("tag", "");
            auto match = r.value("match", std::string("always"));
            if (match == "always") rule.match = MatchKind::always;
            else if (match == "contains") rule.match = MatchKind::contains;
            else if (match == "ends_with") rule.match = MatchKind::ends_with;
            else if (match == "regex") rule.match = MatchKind::regex;
            else throw std::invalid_argument("unknown mock match kind '" + match + "'");
            rule.pattern = r.value("pattern", "");
            auto action = r.value("action", std::string("reply"));
            if (action == "reply") rule.action = MockAction::reply;
            else if (action == "choose_first_option") rule.action = MockAction::choose_first_option;
            else if (action == "pick") rule.action = MockAction::pick;
            else throw std::invalid_argument("unknown mock action '" + action + "'");
            rule.response = r.value("response", "");
            rule.responses = r.value("responses", std::vector<std::string>{});
            rules.push_back(std::move(rule));
        }
        return MockProvider(std::move(rules), j.value("embedding_dim", std::size_t{64}));
    }

    static MockProvider from_file(const std::filesystem::path& path) {
        return from_json(json::parse(read_file(path)));
    }

    std::string chat(const ChatRequest& req) override {
        req.validate();
        for (std::size_t i = 0; i < rules_.size(); ++i) {
            if (auto out = apply(i, req)) return *out;
        }
        throw ProviderError(ProviderErrorKind::no_rule, "mock has no rule for tag '" + req.tag + "'");
    }

    /// Hashed bag-of-words vectors, L2-normalized. Identical texts give identical vectors.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        validate_embed_batch(texts);
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            std::vector<double> v(dim_, 0.0);
            for (const auto& tok : text::tokenize(t)) {
                auto h = fnv1a64(tok);
                v[h % dim_] += ((h >> 32) & 1) ? 1.0 : -1.0;
            }
            double norm = 0.0;
            for (double x : v) norm += x * x;
            if (norm > 0) {
                norm = std::sqrt(norm);
                for (double& x : v) x /= norm;
            }
            out.push_back({std::move(v), "mock-hash-" + std::to_string(dim_)});
        }
        return out;
    }

    std::size_t embedding_dim() const { return dim_; }

private:
    std::optional<std::string> apply(std::size_t i, const ChatRequest& req) const {
        const auto& r = rules_[i];
        if (!r.tag_prefix.empty() && req.tag.rfind(r.tag_prefix, 0) != 0) return std::nullopt;
        std::smatch m;
        switch (r.match) {
            case MatchKind::always: break;
            case MatchKind::contains:
                if (req.prompt_text.find(r.pattern) == std::string::npos) return std::nullopt;
                break;
            case MatchKind::ends_with: {
                auto p = text::trim(req.prompt_text);
                if (p.size() < r.pattern.size() || p.compare(p.size() - r.pattern.size(), r.pattern.size(), r.pattern) != 0) {
                    return std::nullopt;
                }
                break;
            }
            case MatchKind::regex:
                if (!std::regex_search(req.prompt_text, m, *compiled_[i])) return std::nullopt;
                break;
        }
        switch (r.action) {
            case MockAction::reply:
                if (r.match == MatchKind::regex) return m.format(r.response);
                return r.response;
            case MockAction::choose_first_option:
                return detail::first_option_line(req.prompt_text);
            case MockAction::pick: {
                auto h = fnv1a64(text::normalize_prompt(req.prompt_text));
                return r.responses[h % r.responses.size()];
            }
        }
        return std::nullopt;
    }

    std::vector<MockRule> rules_;
    std::vector<std::optional<std::regex>> compiled_;
    std::size_t dim_;
};

}  // namespace irrbench::providers
