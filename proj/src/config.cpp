#include "xlprime/config.hpp"
#include "xlprime/error.hpp"
#include "xlprime/text.hpp"

#include <fmt/format.h>

#include <charconv>

namespace xlprime {

namespace {

constexpr std::string_view kKeys[] = {
    "stimuli",      "experiments",         "scorer",      "seed",        "out",          "family",       "jobs",
    "cache",        "reverse",             "logit",       "alpha",       "corpus",       "classifier_a", "classifier_b",
    "token_budget", "paragraph_threshold", "threshold_a", "threshold_b", "contaminants", "timeout_ms",   "retries",
};

constexpr std::string_view kCorpusTokensPrefix = "corpus_tokens.";

} // namespace

bool RunConfig::known_key(std::string_view key)
{
    if (starts_with(key, kCorpusTokensPrefix))
        return key.size() > kCorpusTokensPrefix.size();
    for (auto k : kKeys)
        if (k == key)
            return true;
    return false;
}

RunConfig RunConfig::parse(std::string_view text, std::string_view source)
{
    RunConfig config;
    size_t number = 0;
    for (auto raw : split(text, '\n')) {
        ++number;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#')
            continue;
        const size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::Usage, fmt::format("{}:{}: expected key = value", source, number));
        const std::string key(trim(line.substr(0, eq)));
        if (!known_key(key))
            throw Error(ErrorCode::Usage, fmt::format("{}:{}: unknown key '{}'", source, number, key));
        config.add(key, std::string(trim(line.substr(eq + 1))));
    }
    return config;
}

RunConfig RunConfig::load(const std::string& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::Usage, fmt::format("cannot read config {}: {}", path, e.detail()));
    }
    return parse(text, path);
}

std::optional<std::string> RunConfig::get(const std::string& key) const
{
    const auto it = entries_.find(key);
    if (it == entries_.end() || it->second.empty())
        return std::nullopt;
    return it->second.back();
}

std::vector<std::string> RunConfig::all(const std::string& key) const
{
    const auto it = entries_.find(key);
    return it == entries_.end() ? std::vector<std::string>{} : it->second;
}

std::vector<std::string> RunConfig::list(const std::string& key) const
{
    std::vector<std::string> out;
    for (const auto& value : all(key))
        for (auto piece : split(value, ','))
            if (const auto t = trim(piece); !t.empty())
                out.emplace_back(t);
    return out;
}

void RunConfig::set(const std::string& key, std::string value) { entries_[key] = {std::move(value)}; }

void RunConfig::add(const std::string& key, std::string value) { entries_[key].push_back(std::move(value)); }

void RunConfig::erase(const std::string& key) { entries_.erase(key); }

std::optional<double> RunConfig::number(const std::string& key) const
{
    const auto v = get(key);
    if (!v)
        return std::nullopt;
    double out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size())
        throw Error(ErrorCode::Usage, fmt::format("{} must be a number, got '{}'", key, *v));
    return out;
}

std::optional<uint64_t> RunConfig::count(const std::string& key) const
{
    const auto v = get(key);
    if (!v)
        return std::nullopt;
    uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size())
        throw Error(ErrorCode::Usage, fmt::format("{} must be a non-negative integer, got '{}'", key, *v));
    return out;
}

std::optional<bool> RunConfig::flag(const std::string& key) const
{
    const auto v = get(key);
    if (!v)
        return std::nullopt;
    if (*v == "true" || *v == "yes" || *v == "1")
        return true;
    if (*v == "false" || *v == "no" || *v == "0")
        return false;
    throw Error(ErrorCode::Usage, fmt::format("{} must be true or false, got '{}'", key, *v));
}

std::string RunConfig::canonical(const std::set<std::string>& excluded) const
{
    std::string out;
    for (const auto& [key, values] : entries_) {
        if (excluded.count(key))
            continue;
        for (const auto& v : values)
            out += key + "=" + v + "\n";
    }
    return out;
}

AuditConfig audit_config(const RunConfig& config)
{
    AuditConfig audit;
    if (auto v = config.count("token_budget"))
        audit.token_budget = *v;
    if (auto v = config.number("paragraph_threshold"))
        audit.paragraph_threshold = *v;
    if (auto v = config.number("threshold_a"))
        audit.threshold_a = *v;
    if (auto v = config.number("threshold_b"))
        audit.threshold_b = *v;
    if (auto v = config.count("seed"))
        audit.seed = *v;
    audit.contaminants = config.list("contaminants");
    for (const auto& [key, values] : config.entries())
        if (starts_with(key, kCorpusTokensPrefix)) {
            const auto language = key.substr(kCorpusTokensPrefix.size());
            audit.corpus_tokens[language] = *config.number(key);
        }
    try {
        audit.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::Usage, e.detail());
    }
    return audit;
}

} // namespace xlprime
